import numpy as np
import pytest

from oracles import binomial_ci, qfunc
from thzgdd.atmosphere import complex_refractivity, frequency_grid, identity_channel, los_transfer
from thzgdd.catalog import AtmosphereState, load_default_catalog
from thzgdd.equalize import EqualizerSpec, FirChannelEstimate, MlseComplexityError
from thzgdd.link import (BerResult, SemiAnalyticBudgetError, SweepPointError, constellation_csv, noise_variance,
                         run_ber_sweep, semi_analytic_ber, sweep_csv)
from thzgdd.multipath import quadratic_phase_channel
from thzgdd.phy import LinkConfig

BPSK = LinkConfig("BPSK", 10.0, 380.0, 0.35, 0, 8192, 2)
QPSK = LinkConfig("QPSK", 10.0, 380.0, 0.35, 0, 4096, 4)
HUMID = AtmosphereState.from_celsius(29, 0.45)


def _grid(config):
    return frequency_grid(config.carrier - config.sample_rate / 2 - 1, config.carrier + config.sample_rate / 2 + 1, 0.01)


def _atmosphere(f_lo, f_hi, distance):
    freq = frequency_grid(f_lo, f_hi, 0.01)
    return los_transfer(complex_refractivity(load_default_catalog(), HUMID, freq), distance)


def test_identity_bpsk_matches_q_function():
    sweep = run_ber_sweep(BPSK, identity_channel(_grid(BPSK)), None, False, [2.0, 4.0, 6.0], (400, 400_000))
    for r in sweep.results:
        p = float(qfunc(np.sqrt(2 * 10 ** (r.ebn0_db / 10))))
        lo, hi = binomial_ci(p, r.bits_simulated)
        assert lo <= r.ber <= hi, r
        assert r.method == "monte_carlo" and r.ber == r.bit_errors / r.bits_simulated


def test_sweep_is_reproducible():
    ch = quadratic_phase_channel(_grid(QPSK), 500.0, 380.0)
    eq = EqualizerSpec("mmse", 5)
    a = run_ber_sweep(QPSK, ch, eq, True, [4.0, 6.0], (50, 20_000), seed=3)
    b = run_ber_sweep(QPSK, ch, eq, True, [4.0, 6.0], (50, 20_000), seed=3)
    c = run_ber_sweep(QPSK, ch, eq, True, [4.0, 6.0], (50, 20_000), seed=4)
    assert a.results == b.results and a.fingerprint == b.fingerprint
    assert np.array_equal(a.constellation_snapshot, b.constellation_snapshot)
    assert [r.bit_errors for r in a.results] != [r.bit_errors for r in c.results]


def test_pdc_on_phase_only_channel_is_lossless():
    ch = quadratic_phase_channel(_grid(QPSK), 3000.0, 380.0)
    sweep = run_ber_sweep(QPSK, ch, None, True, [4.0, 6.0], (300, 300_000))
    for r in sweep.results:
        es = 10 ** (r.ebn0_db / 10) * 2
        p = float(qfunc(np.sqrt(es)))  # per-bit error of Gray QPSK
        lo, hi = binomial_ci(p, r.bits_simulated)
        assert lo <= r.ber <= hi


def test_grid_must_increase():
    with pytest.raises(ValueError):
        run_ber_sweep(BPSK, identity_channel(_grid(BPSK)), None, False, [4.0, 4.0], (1, 10))


def test_error_tags_snr_point():
    ch = quadratic_phase_channel(_grid(QPSK), 20000.0, 380.0)
    with pytest.raises(SweepPointError) as info:
        run_ber_sweep(QPSK, ch, EqualizerSpec("mlse"), False, [7.5, 9.0], (10, 1000))
    assert info.value.ebn0_db == 7.5
    assert isinstance(info.value.cause, MlseComplexityError)


def test_csv_schemas():
    sweep = run_ber_sweep(BPSK, identity_channel(_grid(BPSK)), EqualizerSpec("dfe", 3), False, [3.0, 5.0],
                          (10, 8192))
    text = sweep_csv(sweep)
    lines = text.strip().splitlines()
    assert lines[0] == "ebn0_db,ber,bits,errors,eq,taps,pdc,channel_label,fingerprint"
    assert len(lines) == 3 and ",dfe:3,3,off,identity," in lines[1]
    snap = constellation_csv(sweep.constellation_snapshot, sweep.snapshot_tx_index).splitlines()
    assert snap[0] == "re,im,tx_symbol_index" and len(snap) == 8193


def test_semi_analytic_single_tap():
    for ebn0 in (0.0, 5.0, 9.6):
        r = semi_analytic_ber(FirChannelEstimate([1.0]), "BPSK", ebn0)
        assert r.ber == pytest.approx(float(qfunc(np.sqrt(2 * 10 ** (ebn0 / 10)))), rel=1e-12)
        assert r.method == "semi_analytic"


def test_semi_analytic_two_tap_hand_formula():
    g = np.sqrt(2 * 10 ** 0.8)
    hand = 0.5 * (qfunc(1.3 * g) + qfunc(0.7 * g))
    assert semi_analytic_ber(FirChannelEstimate([1.0, 0.3]), "BPSK", 8.0).ber == pytest.approx(float(hand), abs=1e-12)


def test_semi_analytic_budget():
    est = FirChannelEstimate(np.r_[1.0, np.full(30, 0.1)])
    with pytest.raises(SemiAnalyticBudgetError, match="Monte Carlo"):
        semi_analytic_ber(est, "BPSK", 8.0, budget=2 ** 20)


def test_semi_analytic_matches_symbol_level_simulation():
    taps = np.array([1.0, 0.45, -0.2])
    ebn0 = 6.0
    n = 1_000_000
    rng = np.random.default_rng(21)
    s = np.where(rng.integers(0, 2, n) == 0, 1.0, -1.0)
    n0 = noise_variance(ebn0, 1)
    r = np.convolve(s, taps)[:n] + np.sqrt(n0 / 2) * rng.standard_normal(n)
    ber = np.mean(np.sign(r) != s)
    lo, hi = binomial_ci(ber, n)
    assert lo <= semi_analytic_ber(FirChannelEstimate(taps), "BPSK", ebn0).ber <= hi


def test_ber_result_invariants():
    with pytest.raises(ValueError):
        BerResult(1.0, 10, 11, 1.1, "monte_carlo", "x", 1)
    r = BerResult(3.0, 100, 5, 0.05, "monte_carlo", "x", 2)
    assert r.esn0_db == pytest.approx(3.0 + 10 * np.log10(2))


def _spread(soft, idx):
    # rms cluster spread relative to the centroid radius, so path loss does not count as smear
    groups = [soft[idx == k] for k in np.unique(idx)]
    rms = np.mean([np.sqrt(np.mean(np.abs(g - g.mean()) ** 2)) for g in groups])
    return float(rms / np.mean([abs(g.mean()) for g in groups]))


def test_fig4_constellation_smear():
    atm = _atmosphere(370, 390, 30.0)
    isi = run_ber_sweep(QPSK, atm, None, False, [21.4], (1, 1), snapshot_ebn0_db=21.4)
    clean = run_ber_sweep(QPSK, identity_channel(atm.freq_grid), None, False, [21.4], (1, 1),
                          snapshot_ebn0_db=21.4)
    assert isi.constellation_snapshot.size == QPSK.n_symbols
    assert _spread(isi.constellation_snapshot, isi.snapshot_tx_index) >= \
        5 * _spread(clean.constellation_snapshot, clean.snapshot_tx_index)


def test_lms_training_on_clean_channel():
    eq = EqualizerSpec("mmse", 7, training="lms", n_train=1024)
    sweep = run_ber_sweep(BPSK, identity_channel(_grid(BPSK)), eq, False, [5.0], (300, 300_000))
    r = sweep.results[0]
    assert r.bits_simulated % (BPSK.n_symbols - 1024) == 0  # pilots excluded from the count
    p = float(qfunc(np.sqrt(2 * 10 ** 0.5)))
    assert r.ber < 1.5 * p


@pytest.mark.slow
def test_fig5_long_dfe_beats_short_dfe():
    link = LinkConfig("BPSK", 200.0, 380.0, 0.6, 0, 2 ** 14, 2)
    atm = _atmosphere(220, 540, 100.0)
    ber = {}
    for taps in (7, 61):
        sweep = run_ber_sweep(link, atm, EqualizerSpec("dfe", taps), False, [8.0, 10.0, 12.0], (100, 200_000))
        ber[taps] = [r.ber for r in sweep.results]
    assert all(b61 < b7 for b61, b7 in zip(ber[61], ber[7])), ber
