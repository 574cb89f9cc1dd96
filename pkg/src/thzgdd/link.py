"""Monte-Carlo and semi-analytic bit-error-rate experiments.

Eb/N0 is referenced to the transmitted symbol energy, so channel loss shows up
as a BER penalty instead of being normalized away.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .atmosphere import ChannelResponse
from .equalize import (DEFAULT_STATE_BUDGET, EqualizerError, MlseComplexityError, EqualizerSpec, FirChannelEstimate,
                       constellation, dfe, dfe_design, estimate_fir, linear_mmse, lms_equalize, mlse, pdc_filter,
                       zf_equalizer)
from .phy import (LinkConfig, add_awgn, apply_filter, channel_on_bins, demodulate, map_bits, modulate,
                  prbs, symbols_to_bits)

__all__ = [
    "BerResult", "SweepResult", "SweepPointError", "SemiAnalyticBudgetError", "run_ber_sweep",
    "semi_analytic_ber", "noise_variance", "sweep_csv", "constellation_csv", "fingerprint",
    "DEFAULT_STOP_RULE", "PRBS_ORDER",
]

DEFAULT_STOP_RULE = (100, 10 ** 8)
PRBS_ORDER = 23


class SweepPointError(RuntimeError):
    """Wraps a failure at one SNR point of a sweep."""

    def __init__(self, ebn0_db: float, cause: Exception):
        self.ebn0_db = ebn0_db
        self.cause = cause
        super().__init__(f"at Eb/N0 = {ebn0_db:g} dB: {type(cause).__name__}: {cause}")


class SemiAnalyticBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class BerResult:
    ebn0_db: float
    bits_simulated: int
    bit_errors: int
    ber: float
    method: str
    config_fingerprint: str
    bits_per_symbol: int = 1

    def __post_init__(self):
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError(f"BER {self.ber} outside [0, 1]")
        if self.method not in ("monte_carlo", "semi_analytic"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "monte_carlo" and self.bits_simulated and \
                self.ber != self.bit_errors / self.bits_simulated:
            raise ValueError("monte-carlo BER must equal errors / bits")

    @property
    def esn0_db(self) -> float:
        return self.ebn0_db + 10 * np.log10(self.bits_per_symbol)


@dataclass(frozen=True, eq=False)
class SweepResult:
    results: tuple[BerResult, ...]
    constellation_snapshot: np.ndarray
    snapshot_tx_index: np.ndarray
    snapshot_ebn0_db: float
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = [r.ebn0_db for r in self.results]
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("SNR grid must be strictly increasing")

    @property
    def ebn0_db(self) -> np.ndarray:
        return np.array([r.ebn0_db for r in self.results])

    @property
    def ber(self) -> np.ndarray:
        return np.array([r.ber for r in self.results])

    @property
    def fingerprint(self) -> str:
        return self.results[0].config_fingerprint if self.results else ""


def noise_variance(ebn0_db: float, bits_per_symbol: int) -> float:
    """Per-symbol N0 after the matched filter for unit symbol energy."""
    return 1.0 / (bits_per_symbol * 10 ** (ebn0_db / 10))


def _qfunc(x):
    return 0.5 * special.erfc(np.asarray(x) / np.sqrt(2))


def fingerprint(payload: dict) -> str:
    def default(obj):
        if isinstance(obj, np.ndarray):
            return hashlib.sha256(np.ascontiguousarray(obj).tobytes()).hexdigest()
        if isinstance(obj, complex):
            return [obj.real, obj.imag]
        if isinstance(obj, np.generic):
            return obj.item()
        raise TypeError(f"cannot fingerprint {type(obj)}")
    text = json.dumps(payload, sort_keys=True, default=default)
    return hashlib.sha256(text.encode()).hexdigest()


def semi_analytic_ber(est: FirChannelEstimate, scheme: str, ebn0_db: float, cml_window: int | None = None,
                      equalizer_taps: np.ndarray | None = None, decision_delay: int | None = None,
                      budget: int = DEFAULT_STATE_BUDGET) -> BerResult:
    """Average the Gaussian error probability over every interfering symbol sequence.

    With ``equalizer_taps`` the composite response is the equalizer (applied as
    ``sum conj(c_i) r[n - i]``) cascaded with ``est`` and the noise is scaled by
    the equalizer energy; ``decision_delay`` picks the cursor (default: largest tap).
    """
    scheme = scheme.upper()
    bps = 1 if scheme == "BPSK" else 2
    alphabet = constellation(scheme)
    g = est.taps
    noise_gain = 1.0
    if equalizer_taps is not None:
        w = np.conj(np.asarray(equalizer_taps, dtype=complex))
        g = np.convolve(w, g)
        noise_gain = float(np.sum(np.abs(w) ** 2))
    cursor = int(np.argmax(np.abs(g))) if decision_delay is None else int(decision_delay)
    main = g[cursor]
    others = np.delete(g, cursor)
    order = np.argsort(-np.abs(others))
    window = others.size if cml_window is None else min(int(cml_window), others.size)
    used, residual = others[order[:window]], others[order[window:]]
    if np.sum(np.abs(residual) ** 2) > 0.01 * abs(main) ** 2:
        raise SemiAnalyticBudgetError("taps outside the window carry more than 1% of the main-tap energy")
    if float(alphabet.size) ** used.size > budget:
        raise SemiAnalyticBudgetError(f"{alphabet.size}^{used.size} sequences exceed the budget of "
                                      f"{budget}; use Monte Carlo instead")
    # every value of the ISI sum, built one interferer at a time
    isi = np.zeros(1, dtype=complex)
    for tap in used:
        isi = (isi[:, None] + tap * alphabet[None, :]).reshape(-1)
    rotate = np.conj(main) / abs(main)
    sigma = np.sqrt(noise_variance(ebn0_db, bps) / 2 * noise_gain)
    if scheme == "BPSK":
        centre = abs(main) + (isi * rotate).real
        ber = float(np.mean(_qfunc(centre / sigma)))
    else:
        s0 = alphabet[0]
        centre = abs(main) * s0 + isi * rotate
        ber = float(np.mean(0.5 * (_qfunc(centre.real / sigma) + _qfunc(centre.imag / sigma))))
    fp = fingerprint({"taps": est.taps, "offset": est.delay_offset, "scheme": scheme, "ebn0": ebn0_db,
                      "window": window, "eq": equalizer_taps, "cursor": cursor})
    return BerResult(float(ebn0_db), 0, 0, ber, "semi_analytic", fp, bps)


def _point_seed(master: int, point: int, frame: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master) & 0xFFFFFFFF, point, frame])


class _Receiver:
    """Equalizer applied to one frame of soft symbols; returns hard-decided bits."""

    def __init__(self, config: LinkConfig, eq: EqualizerSpec | None, est: FirChannelEstimate | None,
                 n0: float):
        self.scheme = config.scheme
        self.kind = None if eq is None else eq.kind
        self.spec = eq
        self.est = est
        self.eq = None
        self.skip = 0  # leading pilot symbols excluded from the error count
        if eq is not None and eq.training == "lms" and self.kind in ("LinearMMSE", "DFE"):
            self.kind = "LMS"
            self.skip = min(eq.n_train, config.n_symbols)
        elif self.kind == "LinearMMSE":
            self.eq = linear_mmse(est, EqualizerSpec("LinearMMSE", eq.n_taps, n0))
        elif self.kind == "DFE":
            self.spec = EqualizerSpec("DFE", eq.n_taps, n0)
            self.eq = dfe_design(est, self.spec)
        elif self.kind == "MLSE":
            # fail before any trellis memory is touched
            states = float(constellation(self.scheme).size) ** est.cml
            if states > eq.state_budget:
                raise MlseComplexityError(states, eq.state_budget)

    def front(self, soft: np.ndarray) -> np.ndarray:
        """Equalizer input; without an equalizer, ideal carrier and timing recovery."""
        if self.kind is not None:
            return soft
        main = self.est.taps[self.est.main_index]
        shift = self.est.delay_offset + self.est.main_index
        return np.roll(soft, -shift) * (np.conj(main) / abs(main))

    def decide(self, soft: np.ndarray, tx_symbols: np.ndarray) -> np.ndarray:
        scheme = self.scheme
        if self.kind in (None, "ZF"):
            return soft
        if self.kind == "LinearMMSE":
            return self.eq.apply(soft)
        if self.kind == "DFE":
            return dfe(self.est, self.spec, soft, scheme, design=self.eq)
        est = self.est
        if self.kind == "LMS":
            # genie timing: put each symbol's strongest tap at index k
            aligned = np.roll(soft, -(est.delay_offset + est.main_index))
            n_fb = self.spec.n_taps if self.spec.kind == "DFE" else 0
            _, decided = lms_equalize(aligned, tx_symbols, self.spec.n_taps, n_fb, self.spec.step_size,
                                      self.spec.n_train, scheme)
            return decided
        # MLSE over the cyclic frame, primed by wrapping the last symbols in front
        lead = 4 * max(est.cml, 1)
        n = soft.size
        aligned = np.roll(soft, -est.delay_offset)
        extended = np.concatenate([aligned[n - lead:], aligned])
        return mlse(FirChannelEstimate(est.taps), extended, scheme, state_budget=self.spec.state_budget)[lead:]


def run_ber_sweep(link: LinkConfig, channel: ChannelResponse, eq: EqualizerSpec | None, pdc: bool,
                  snr_grid: Sequence[float], stop_rule: tuple[int, int] = DEFAULT_STOP_RULE, seed: int = 0,
                  pdc_placement: str = "rx", snapshot_ebn0_db: float | None = None,
                  pdc_band: tuple[float, float] | None = None, max_frames: int | None = None,
                  fir_threshold: float = 1e-4, scramble: ChannelResponse | None = None) -> SweepResult:
    """Monte-Carlo BER over ``snr_grid`` (Eb/N0, dB).

    Each point runs whole frames until ``stop_rule = (min_errors, max_bits)`` is
    met.  Frames are cyclic, so the edge guard is the wrap-around itself: DFE and
    MLSE are primed on the frame tail before deciding symbol 0.  ``scramble`` is
    an all-pass profile applied before the channel; its conjugate is applied at
    the receiver after the noise.
    """
    grid = [float(x) for x in snr_grid]
    if not grid:
        raise ValueError("empty SNR grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("SNR grid must be strictly increasing")
    if pdc_placement not in ("rx", "tx"):
        raise ValueError("pdc_placement must be 'rx' or 'tx'")
    min_errors, max_bits = int(stop_rule[0]), int(stop_rule[1])
    if min_errors < 1 or max_bits < 1:
        raise ValueError("stop rule needs positive error and bit counts")

    band = link.band if pdc_band is None else pdc_band
    probe = modulate(np.zeros(link.frame_bits, dtype=np.uint8), link)
    h_bins = channel_on_bins(probe, channel)
    effective = channel
    g_bins = None
    if pdc:
        g = pdc_filter(channel, band)
        g_bins = channel_on_bins(probe, g)
        effective = ChannelResponse(channel.freq_grid, channel.h * g.h, 0.0, f"{channel.label}+pdc")
    s_bins = None if scramble is None else channel_on_bins(probe, scramble)
    zf_bins = None
    if eq is not None and eq.kind == "ZF":
        zf_bins = channel_on_bins(probe, zf_equalizer(effective, link.band))
    needs_est = eq is None or eq.kind in ("LinearMMSE", "DFE", "MLSE")
    if eq is not None and needs_est and eq.training == "lms" and eq.n_train >= link.n_symbols:
        raise ValueError("LMS training length must be shorter than the frame")
    est = estimate_fir(effective, link, fir_threshold) if needs_est else None

    fp = fingerprint({
        "link": asdict(link), "freq": channel.freq_grid, "h": channel.h, "label": channel.label,
        "eq": None if eq is None else asdict(eq), "pdc": bool(pdc),
        "placement": pdc_placement, "band": list(band), "grid": grid, "stop": [min_errors, max_bits],
        "seed": int(seed), "threshold": fir_threshold,
        "scramble": None if scramble is None else [scramble.label, scramble.h],
    })
    snap_at = grid[len(grid) // 2] if snapshot_ebn0_db is None else float(snapshot_ebn0_db)
    snapshot = np.zeros(0, complex)
    snapshot_idx = np.zeros(0, int)
    alphabet = constellation(link.scheme)
    results = []
    for p, ebn0 in enumerate(grid):
        try:
            n0 = noise_variance(ebn0, link.bits_per_symbol)
            rx = _Receiver(link, eq, est, n0)
            errors = bits = frame = 0
            while errors < min_errors and bits < max_bits and (max_frames is None or frame < max_frames):
                ss = _point_seed(seed, p, frame)
                prbs_seed, noise_seed = ss.spawn(2)
                tx_bits = prbs(PRBS_ORDER, int(prbs_seed.generate_state(1)[0]) or 1, link.frame_bits)
                tx_sym = map_bits(tx_bits, link.scheme)
                wave = modulate(tx_bits, link)
                response = h_bins if (g_bins is None or pdc_placement == "rx") else h_bins * g_bins
                if s_bins is not None:
                    response = response * s_bins
                wave = apply_filter(wave, response)
                wave = add_awgn(wave, ebn0, noise_seed)
                if s_bins is not None:
                    wave = apply_filter(wave, np.conj(s_bins))
                if g_bins is not None and pdc_placement == "rx":
                    wave = apply_filter(wave, g_bins)
                if zf_bins is not None:
                    wave = apply_filter(wave, zf_bins)
                soft = rx.front(demodulate(wave, link))
                if frame == 0 and abs(ebn0 - snap_at) < 1e-9:
                    snapshot = soft
                    snapshot_idx = np.argmin(np.abs(tx_sym[:, None] - alphabet[None, :]), axis=1)
                rx_bits = symbols_to_bits(rx.decide(soft, tx_sym), link.scheme)
                keep = rx.skip * link.bits_per_symbol
                errors += int(np.count_nonzero(rx_bits[keep:] != tx_bits[keep:]))
                bits += tx_bits.size - keep
                frame += 1
        except (EqualizerError, ValueError) as exc:
            raise SweepPointError(ebn0, exc) from exc
        results.append(BerResult(ebn0, bits, errors, errors / bits if bits else 0.0, "monte_carlo", fp,
                                 link.bits_per_symbol))
    labels = {"eq": "none" if eq is None else eq.label(), "taps": 0 if eq is None else eq.n_taps,
              "pdc": "on" if pdc else "off", "channel_label": channel.label,
              "cml": None if est is None else est.cml}
    return SweepResult(tuple(results), snapshot, snapshot_idx, snap_at, labels)


def sweep_csv(sweep: SweepResult) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["ebn0_db", "ber", "bits", "errors", "eq", "taps", "pdc", "channel_label", "fingerprint"])
    lab = sweep.labels
    for r in sweep.results:
        writer.writerow([f"{r.ebn0_db:g}", f"{r.ber:.6e}", r.bits_simulated, r.bit_errors, lab.get("eq", ""),
                         lab.get("taps", ""), lab.get("pdc", ""), lab.get("channel_label", ""),
                         r.config_fingerprint])
    return out.getvalue()


def constellation_csv(soft: np.ndarray, tx_index: np.ndarray) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["re", "im", "tx_symbol_index"])
    for z, k in zip(soft, tx_index):
        writer.writerow([f"{z.real:.9g}", f"{z.imag:.9g}", int(k)])
    return out.getvalue()
