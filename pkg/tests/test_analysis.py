import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thzgdd.analysis import coherence_time, integrated_gdd_metric, papr, phase_profile, required_gdd
from thzgdd.atmosphere import ChannelResponse, GridError, frequency_grid
from thzgdd.multipath import PathSet, multipath_transfer, quadratic_phase_channel
from thzgdd.phy import Waveform


def _omega(freq):
    return 2 * np.pi * freq * 1e-3  # rad/ps


def test_pure_delay():
    freq = frequency_grid(300, 310, 0.01)
    prof = phase_profile(ChannelResponse(freq, np.exp(-1j * _omega(freq) * 100.0), 0.0))
    assert np.allclose(prof.group_delay, 100.0, atol=1e-6)
    assert np.allclose(prof.gdd, 0.0, atol=1e-3)


def test_quadratic_phase_gdd():
    freq = frequency_grid(375, 385, 0.01)
    prof = phase_profile(quadratic_phase_channel(freq, 2533.0))
    assert np.allclose(prof.gdd[1:-1], 2533.0, rtol=1e-6)


def _two_path_gdd_oracle(f_ghz, a, tau_ps):
    # h = 1 + a exp(-j w tau); group delay a tau (a + cos x)/(1 + a^2 + 2 a cos x), x = w tau
    x = _omega(f_ghz) * tau_ps
    return a * tau_ps ** 2 * np.sin(x) * (a * a - 1) / (1 + a * a + 2 * a * np.cos(x)) ** 2


def test_two_path_gdd_matches_closed_form():
    a, tau = 0.9, 50.5
    freq = frequency_grid(100, 200, 0.001)
    prof = phase_profile(multipath_transfer(PathSet.from_pairs([(0.0, 1.0), (tau, a)]), freq))
    picks = np.linspace(2000, 97000, 10).astype(int)
    expected = _two_path_gdd_oracle(freq[picks], a, tau)
    assert np.allclose(prof.gdd[picks], expected, rtol=1e-4, atol=1e-3 * np.max(np.abs(expected)))


def test_two_path_gdd_changes_sign_between_nulls():
    a, tau = 0.9, 50.5
    freq = frequency_grid(100, 200, 0.005)
    prof = phase_profile(multipath_transfer(PathSet.from_pairs([(0.0, 1.0), (tau, a)]), freq))
    spacing = 1e3 / tau
    nulls = (np.arange(6, 10) + 0.5) * spacing
    for lo, hi in zip(nulls, nulls[1:]):
        # GDD is one sign after a null and the other before the next one
        sel = (freq > lo + 0.1 * spacing) & (freq < hi - 0.1 * spacing)
        g = prof.gdd[sel]
        assert g[0] * g[-1] < 0


def test_short_grid():
    with pytest.raises(GridError):
        phase_profile(ChannelResponse(np.arange(4.0), np.ones(4, complex), 0.0))


def test_masked_points_are_nan():
    freq = frequency_grid(100, 200, 0.01)
    h = np.ones(freq.size, complex)
    h[5000] = 0
    prof = phase_profile(ChannelResponse(freq, h, 0.0))
    assert prof.amplitude_floor_mask[5000] and np.isnan(prof.gdd[5000])
    assert np.all(np.isfinite(prof.gdd[~prof.amplitude_floor_mask]))


def _const_profile(gdd, f_lo=0.0, f_hi=9.0, step=0.01):
    freq = frequency_grid(f_lo, f_hi, step)
    return phase_profile(quadratic_phase_channel(freq, gdd))


def test_metric_arithmetic():
    value = integrated_gdd_metric(_const_profile(2533.0), (0.0, 9.0))
    assert value == pytest.approx(143.0, rel=0.01)
    assert value == pytest.approx(2 * np.pi * 9e9 * 2533e-24 * 1e12, rel=1e-6)


def test_metric_zero_and_linear_in_band():
    assert integrated_gdd_metric(_const_profile(0.0), (0.0, 9.0)) == pytest.approx(0.0, abs=1e-6)
    prof = _const_profile(1000.0)
    full = integrated_gdd_metric(prof, (0.0, 9.0))
    half = integrated_gdd_metric(prof, (0.0, 4.5))
    assert half == pytest.approx(full / 2, rel=1e-6)


def test_metric_empty_band():
    with pytest.raises(ValueError):
        integrated_gdd_metric(_const_profile(1.0), (3.0, 3.0))


def test_coherence_times():
    assert coherence_time(28, 108) == pytest.approx(0.178e-3, rel=0.01)
    assert coherence_time(28, 108) == pytest.approx(0.18e-3, rel=0.015)
    assert coherence_time(250, 325) == pytest.approx(6.65e-6, rel=0.01)
    assert coherence_time(56, 108) == pytest.approx(coherence_time(28, 108) / 2, rel=1e-12)
    with pytest.raises(ValueError):
        coherence_time(0, 10)


def _wave(x):
    return Waveform(np.asarray(x, complex), 100.0, 300.0, 2)


def test_papr_basics():
    n = 256
    assert papr(_wave(np.exp(2j * np.pi * 5 * np.arange(n) / n))) == pytest.approx(0.0, abs=1e-12)
    impulse = np.zeros(n, complex)
    impulse[17] = 3.0
    assert papr(_wave(impulse)) == pytest.approx(10 * np.log10(n), abs=1e-12)
    with pytest.raises(ValueError):
        papr(np.zeros(8))


def test_papr_multitone_gdd_and_inverse():
    n, tones = 4096, 64
    k = np.arange(tones) * 8
    spec = np.zeros(n, complex)
    spec[k] = 1.0
    x = np.fft.ifft(spec)
    phase = np.zeros(n)
    phase[k] = 0.5 * 40.0 * (np.arange(tones) - tones / 2) ** 2 / tones
    y = np.fft.ifft(spec * np.exp(-1j * phase))
    z = np.fft.ifft(np.fft.fft(y) * np.exp(1j * phase))
    assert papr(y) < papr(x)
    assert abs(papr(z) - papr(x)) < 0.01


@given(b=st.floats(1e8, 1e12))
def test_required_gdd_inverse_square(b):
    assert required_gdd(2 * b) == pytest.approx(required_gdd(b) / 4, rel=1e-12)
    # the metric reaches the symbol duration 1/B at that GDD
    assert 2 * np.pi * b * required_gdd(b) * 1e-24 == pytest.approx(1 / b, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(total=st.floats(1.0, 1e4), curvature=st.floats(-1, 1), offset=st.floats(-50, 50))
def test_unwrap_recovers_phase(total, curvature, offset):
    freq = frequency_grid(200, 400, 0.01)
    x = (freq - freq[0]) / (freq[-1] - freq[0])
    phi = offset + total * (x + curvature * x * (1 - x))
    prof = phase_profile(ChannelResponse(freq, np.exp(1j * phi), 0.0))
    diff = prof.phase_unwrapped - phi
    k = np.round(diff[0] / (2 * np.pi))
    assert np.allclose(diff, 2 * np.pi * k, atol=1e-6 * max(1.0, total))


@settings(max_examples=30, deadline=None)
@given(c3=st.floats(-1e3, 1e3).filter(lambda v: abs(v) > 1e-3), f0=st.floats(250, 350))
def test_cubic_phase_second_derivative(c3, f0):
    freq = frequency_grid(290, 310, 0.01)
    w = _omega(freq - f0)
    prof = phase_profile(ChannelResponse(freq, np.exp(1j * c3 * w ** 3), 0.0))
    analytic = -6 * c3 * w  # gdd = -phi''
    inner = slice(1, -1)
    scale = np.max(np.abs(analytic))
    assert np.max(np.abs(prof.gdd[inner] - analytic[inner])) < 1e-4 * scale
