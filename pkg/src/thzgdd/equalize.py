"""Electronic equalizers, the phase-only dispersion compensator and GDD scrambling.

Symbol-spaced model used throughout::

    r[n] = sum_j taps[j] * s[n - delay_offset - j] + w[n],   E|w|^2 = noise_variance

Equalizers work on whole cyclic frames unless told otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, linalg

from .analysis import AMPLITUDE_FLOOR, band_mask, integrated_gdd_metric, phase_profile
from .atmosphere import ChannelResponse, frequency_grid
from .phy import LinkConfig, Waveform, channel_on_bins, map_bits, rrc_response, slice_symbols

__all__ = [
    "EqualizerError", "NonInvertibleChannelError", "MaskedPhaseError", "MlseComplexityError",
    "FirChannelEstimate", "EqualizerSpec", "LinearEqualizer", "DfeEqualizer",
    "estimate_fir", "estimate_fir_from_pilots", "zf_equalizer", "linear_mmse", "dfe_design",
    "dfe", "mlse", "lms_equalize", "pdc_filter", "scramble_profile", "constellation",
    "DEFAULT_STATE_BUDGET", "TRUNCATION",
]

DEFAULT_STATE_BUDGET = 2 ** 20
TRUNCATION = 1e-4
DIAGONAL_LOADING = 1e-12
KINDS = ("ZF", "LinearMMSE", "DFE", "MLSE")
_KIND_ALIASES = {"zf": "ZF", "mmse": "LinearMMSE", "linearmmse": "LinearMMSE", "linear": "LinearMMSE",
                 "dfe": "DFE", "mlse": "MLSE"}


class EqualizerError(ValueError):
    pass


class NonInvertibleChannelError(EqualizerError):
    def __init__(self, frequency: float, amplitude: float):
        self.frequency = frequency
        super().__init__(f"channel not invertible: |h| = {amplitude:.3g} at {frequency:.6g} GHz "
                         "is below the zero-forcing floor")


class MaskedPhaseError(EqualizerError):
    pass


class MlseComplexityError(EqualizerError):
    def __init__(self, states: float, budget: int):
        self.states = states
        self.budget = budget
        super().__init__(f"MLSE needs {states:.4g} trellis states, over the budget of {budget}")


def constellation(scheme: str) -> np.ndarray:
    if scheme.upper() == "BPSK":
        return np.array([1.0, -1.0], dtype=complex)
    return map_bits(np.array([0, 0, 0, 1, 1, 0, 1, 1], dtype=np.uint8), "QPSK")


@dataclass(frozen=True, eq=False)
class FirChannelEstimate:
    taps: np.ndarray
    delay_offset: int = 0
    source: str = "genie_from_H"

    def __post_init__(self):
        taps = np.atleast_1d(np.asarray(self.taps, dtype=complex))
        object.__setattr__(self, "taps", taps)
        if taps.ndim != 1 or taps.size == 0 or not np.all(np.isfinite(taps)):
            raise ValueError("taps must be a finite, non-empty 1-D array")
        if np.max(np.abs(taps)) == 0:
            raise ValueError("main tap must be nonzero")
        if self.source not in ("genie_from_H", "pilot_trained"):
            raise ValueError(f"unknown estimate source {self.source!r}")

    @property
    def cml(self) -> int:
        return self.taps.size - 1

    @property
    def main_index(self) -> int:
        return int(np.argmax(np.abs(self.taps)))


@dataclass(frozen=True)
class EqualizerSpec:
    kind: str
    n_taps: int = 1
    noise_variance: float = 0.0
    state_budget: int = DEFAULT_STATE_BUDGET
    training: str = "genie"  # or "lms": adapted on a pilot prefix, then decision-directed
    step_size: float = 0.01
    n_train: int = 2048

    def __post_init__(self):
        if self.training not in ("genie", "lms"):
            raise ValueError(f"training must be 'genie' or 'lms', got {self.training!r}")
        if self.step_size <= 0 or self.n_train < 0:
            raise ValueError("LMS needs a positive step size and a non-negative training length")
        kind = _KIND_ALIASES.get(str(self.kind).lower(), self.kind)
        if kind not in KINDS:
            raise ValueError(f"equalizer kind must be one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.n_taps < 1:
            raise ValueError("n_taps must be >= 1")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be >= 0")

    @classmethod
    def parse(cls, text: str, noise_variance: float = 0.0) -> "EqualizerSpec":
        """``zf``, ``mmse:N``, ``dfe:N`` or ``mlse``."""
        name, _, taps = text.partition(":")
        return cls(name, int(taps) if taps else 1, noise_variance)

    def label(self) -> str:
        short = {"ZF": "zf", "LinearMMSE": "mmse", "DFE": "dfe", "MLSE": "mlse"}[self.kind]
        return f"{short}:{self.n_taps}" if self.kind in ("LinearMMSE", "DFE") else short


def _composite_response(channel: ChannelResponse, config: LinkConfig, n_symbols: int) -> np.ndarray:
    sps = config.samples_per_symbol
    probe = Waveform(np.zeros(n_symbols * sps), config.sample_rate, config.carrier, sps,
                     occupied_bandwidth=config.occupied_bandwidth if config.span_symbols == 0 else None)
    pulse = np.abs(rrc_response(probe.samples.size, sps, config.rolloff, config.span_symbols)) ** 2
    return np.fft.ifft(pulse * channel_on_bins(probe, channel))[::sps]


def estimate_fir(channel: ChannelResponse, config: LinkConfig, threshold: float = TRUNCATION,
                 n_symbols: int = 2 ** 14) -> FirChannelEstimate:
    """Symbol-spaced end-to-end response (pulse, channel, matched filter), truncated.

    Taps below ``threshold`` times the main tap are dropped from both ends.
    """
    q = _composite_response(channel, config, n_symbols)
    mag = np.abs(q)
    peak = int(np.argmax(mag))
    # centre the peak so precursors are not split across the wrap
    shift = n_symbols // 2 - peak
    q = np.roll(q, shift)
    keep = np.flatnonzero(np.abs(q) >= threshold * mag[peak])
    first, last = keep[0], keep[-1]
    if first == 0 or last == n_symbols - 1:
        raise EqualizerError("impulse response fills the analysis frame; raise n_symbols")
    return FirChannelEstimate(q[first:last + 1], int(first - shift), "genie_from_H")


def estimate_fir_from_pilots(tx_symbols: np.ndarray, rx_soft: np.ndarray, n_taps: int,
                             delay_offset: int = 0) -> FirChannelEstimate:
    """Least-squares taps from a known cyclic pilot frame."""
    tx = np.asarray(tx_symbols, dtype=complex)
    rx = np.asarray(rx_soft, dtype=complex)
    if tx.size != rx.size or n_taps < 1 or n_taps > tx.size:
        raise ValueError("pilot and received frames must match and exceed n_taps")
    basis = np.stack([np.roll(tx, delay_offset + j) for j in range(n_taps)], axis=1)
    taps, *_ = np.linalg.lstsq(basis, rx, rcond=None)
    return FirChannelEstimate(taps, delay_offset, "pilot_trained")


def zf_equalizer(channel: ChannelResponse, band: tuple[float, float],
                 floor: float = 1e-2) -> ChannelResponse:
    """``1/h`` inside ``band`` and 1 outside; ``floor`` is relative to the in-band peak."""
    sel = band_mask(channel.freq_grid, band)
    if not np.any(sel):
        raise ValueError(f"band {band} holds no grid points")
    amp = np.abs(channel.h)
    limit = floor * amp[sel].max()
    weak = sel & (amp < limit)
    if np.any(weak):
        i = np.flatnonzero(weak)[np.argmin(amp[weak])]
        raise NonInvertibleChannelError(float(channel.freq_grid[i]), float(amp[i]))
    g = np.ones_like(channel.h)
    g[sel] = 1.0 / channel.h[sel]
    return ChannelResponse(channel.freq_grid, g, 0.0, f"zf({channel.label})")


def _convolution_matrix(taps: np.ndarray, n_rows: int) -> np.ndarray:
    k = taps.size
    h = np.zeros((n_rows, n_rows + k - 1), dtype=complex)
    for i in range(n_rows):
        h[i, i:i + k] = taps
    return h


def _cyclic_filter(x: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """``z[n] = sum_i coeffs[i] * x[n - i]`` with cyclic indexing."""
    padded = np.zeros(x.size, dtype=complex)
    padded[:coeffs.size] = coeffs
    return np.fft.ifft(np.fft.fft(x) * np.fft.fft(padded))


@dataclass(frozen=True, eq=False)
class LinearEqualizer:
    """``y[n] = sum_i conj(taps[i]) * r[n - i]`` estimates ``s[n - delay_offset - decision_delay]``."""

    taps: np.ndarray
    decision_delay: int
    delay_offset: int
    mse: float
    loading: float = 0.0

    @property
    def latency(self) -> int:
        return self.delay_offset + self.decision_delay

    def apply(self, soft: np.ndarray) -> np.ndarray:
        """Equalize a cyclic frame; output index ``m`` estimates transmitted symbol ``m``."""
        z = _cyclic_filter(np.asarray(soft, dtype=complex), np.conj(self.taps))
        return np.roll(z, -self.latency)


@dataclass(frozen=True, eq=False)
class DfeEqualizer:
    feedforward: np.ndarray
    feedback: np.ndarray  # feedback[j-1] multiplies the decision j symbols back
    decision_delay: int
    delay_offset: int
    mse: float
    loading: float = 0.0

    @property
    def latency(self) -> int:
        return self.delay_offset + self.decision_delay


def _mmse_design(est: FirChannelEstimate, n_ff: int, n_fb: int, noise_variance: float):
    """Best (mse, delay, ff, fb, loading) over all decision delays."""
    h_full = _convolution_matrix(est.taps, n_ff)
    n_cols = h_full.shape[1]
    best = None
    for delay in range(n_cols):
        cancelled = np.arange(delay + 1, min(delay + 1 + n_fb, n_cols))
        kept = np.setdiff1d(np.arange(n_cols), cancelled)
        h_r = h_full[:, kept]
        r = h_r @ h_r.conj().T + noise_variance * np.eye(n_ff)
        p = h_full[:, delay]
        loading = 0.0
        if np.linalg.cond(r) > 1e12:
            loading = DIAGONAL_LOADING
            r = r + loading * np.eye(n_ff)
        c = linalg.solve(r, p, assume_a="pos")
        mse = float(np.real(1 - np.vdot(p, c)))
        if best is None or mse < best[0] - 1e-15:
            fb = np.zeros(n_fb, dtype=complex)
            for j in range(1, n_fb + 1):
                if delay + j < n_cols:
                    fb[j - 1] = np.vdot(c, h_full[:, delay + j])
            best = (mse, delay, c, fb, loading)
    return best


def linear_mmse(est: FirChannelEstimate, spec: EqualizerSpec) -> LinearEqualizer:
    """Finite-length Wiener equalizer with the MSE-optimal decision delay."""
    if spec.kind != "LinearMMSE":
        raise ValueError(f"linear_mmse needs a LinearMMSE spec, got {spec.kind}")
    mse, delay, c, _, loading = _mmse_design(est, spec.n_taps, 0, spec.noise_variance)
    return LinearEqualizer(c, delay, est.delay_offset, mse, loading)


def dfe_design(est: FirChannelEstimate, spec: EqualizerSpec, n_feedback: int | None = None) -> DfeEqualizer:
    """MMSE feed-forward and feedback taps (feedback count defaults to ``n_taps``)."""
    n_fb = spec.n_taps if n_feedback is None else n_feedback
    mse, delay, c, fb, loading = _mmse_design(est, spec.n_taps, n_fb, spec.noise_variance)
    return DfeEqualizer(c, fb, delay, est.delay_offset, mse, loading)


def dfe(est: FirChannelEstimate, spec: EqualizerSpec, soft_symbols: np.ndarray, scheme: str = "BPSK",
        cyclic: bool = True, warmup: int | None = None, n_feedback: int | None = None,
        design: DfeEqualizer | None = None) -> np.ndarray:
    """Decision-feedback equalization with hard-decision feedback; returns decided symbols.

    For cyclic frames the recursion starts ``warmup`` symbols before the frame
    (wrapping around) so the feedback is primed by the time symbol 0 is decided.
    """
    if spec.kind != "DFE":
        raise ValueError(f"dfe needs a DFE spec, got {spec.kind}")
    eq = dfe_design(est, spec, n_feedback) if design is None else design
    r = np.asarray(soft_symbols, dtype=complex)
    n = r.size
    if cyclic:
        z = np.roll(_cyclic_filter(r, np.conj(eq.feedforward)), -eq.latency)
        start = -(eq.feedback.size + eq.feedforward.size + est.taps.size) if warmup is None else -warmup
    else:
        full = np.convolve(r, np.conj(eq.feedforward))
        k = np.arange(n) + eq.latency
        ok = (k >= 0) & (k < full.size)
        z = np.zeros(n, dtype=complex)
        z[ok] = full[k[ok]]
        start = 0
    start = max(start, -n)
    fb = eq.feedback
    n_fb = fb.size
    decided = np.zeros(n, dtype=complex)
    bpsk = scheme.upper() == "BPSK"
    inv_sqrt2 = 1 / np.sqrt(2)
    # plain Python lists keep the per-symbol loop cheap
    fb_list = fb.tolist()
    hist = [0j] * n_fb  # hist[j] = decision j+1 symbols back
    zl = z.tolist()
    for m in range(start, n):
        y = zl[m % n]
        for j in range(n_fb):
            y -= fb_list[j] * hist[j]
        if bpsk:
            d = 1.0 + 0j if y.real >= 0 else -1.0 + 0j
        else:
            d = complex(inv_sqrt2 if y.real >= 0 else -inv_sqrt2, inv_sqrt2 if y.imag >= 0 else -inv_sqrt2)
        if n_fb:
            hist.pop()
            hist.insert(0, d)
        if m >= 0 or cyclic:
            decided[m % n] = d
    return decided


def lms_equalize(soft_symbols: np.ndarray, known_symbols: np.ndarray, n_ff: int, n_fb: int = 0,
                 step: float = 0.01, n_train: int = 2048, scheme: str = "BPSK",
                 reference: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Adaptive LMS linear equalizer or DFE on a cyclic frame.

    ``soft_symbols[k]`` should carry symbol ``k`` at its strongest tap.  The
    feed-forward line holds ``r[k + reference - i]`` (reference tap defaults to
    the centre), the feedback line the last ``n_fb`` decisions.  Taps start at
    zero, adapt on the first ``n_train`` known symbols and then follow the
    slicer.  Returns (equalizer outputs, decided symbols).
    """
    r = np.asarray(soft_symbols, dtype=complex)
    known = np.asarray(known_symbols, dtype=complex)
    n = r.size
    if known.size < min(n_train, n):
        raise ValueError("not enough known symbols for training")
    if n_ff < 1 or n_fb < 0:
        raise ValueError("need n_ff >= 1 and n_fb >= 0")
    ref = n_ff // 2 if reference is None else int(reference)
    w = np.zeros(n_ff, dtype=complex)
    b = np.zeros(n_fb, dtype=complex)
    past = np.zeros(n_fb, dtype=complex)
    outputs = np.empty(n, dtype=complex)
    decided = np.empty(n, dtype=complex)
    bpsk = scheme.upper() == "BPSK"
    a = 1 / np.sqrt(2)
    lags = ref - np.arange(n_ff)
    for k in range(n):
        x = r[(k + lags) % n]
        y = np.vdot(w, x)
        if n_fb:
            y -= np.vdot(b, past)
        if bpsk:
            d = 1.0 if y.real >= 0 else -1.0
        else:
            d = complex(a if y.real >= 0 else -a, a if y.imag >= 0 else -a)
        target = known[k] if k < n_train else d
        e = target - y
        w += step * x * np.conj(e)
        if n_fb:
            b -= step * past * np.conj(e)
            past = np.roll(past, 1)
            past[0] = target
        outputs[k] = y
        decided[k] = d
    return outputs, decided


def mlse(est: FirChannelEstimate, soft_symbols: np.ndarray, scheme: str = "BPSK",
         n_symbols: int | None = None, state_budget: int = DEFAULT_STATE_BUDGET) -> np.ndarray:
    """Viterbi detection over the ISI trellis of ``est``.

    ``soft_symbols[k]`` is matched to ``sum_j taps[j] * s[k - j]`` (the estimate's
    delay offset is assumed removed).  Symbols before index 0 and from
    ``n_symbols`` on are taken as zero; observations past ``n_symbols`` (if any)
    therefore only constrain the final state.
    """
    alphabet = constellation(scheme)
    m = alphabet.size
    cml = est.cml
    states = float(m) ** cml
    if states > state_budget:
        raise MlseComplexityError(states, state_budget)
    obs = np.asarray(soft_symbols, dtype=complex)
    n_sym = obs.size if n_symbols is None else int(n_symbols)
    if n_sym < 1 or n_sym > obs.size:
        raise ValueError("n_symbols must be in [1, len(soft_symbols)]")
    taps = est.taps
    s_count = m ** cml
    idx = np.arange(s_count)
    # digits[j] = alphabet index of the symbol j+1 steps back
    digits = np.stack([(idx // m ** j) % m for j in range(cml)]) if cml else np.zeros((0, 1), int)
    past_values = alphabet[digits] if cml else np.zeros((0, 1), complex)
    tail_power = m ** (cml - 1) if cml else 1

    metric = np.zeros(s_count)
    back = np.zeros((n_sym, s_count), dtype=np.uint8 if m <= 256 else np.int32)
    current = alphabet[None, :] * taps[0]
    preds = (idx // m)[:, None] + np.arange(m)[None, :] * tail_power if cml else np.zeros((1, m), int)
    for t in range(n_sym):
        if cml:
            mask = (np.arange(1, cml + 1) <= t).astype(float)
            isi = (taps[1:] * mask) @ past_values
        else:
            isi = np.zeros(1, complex)
        # branch[state, a]: cost of emitting symbol a from state
        branch = np.abs(obs[t] - isi[:, None] - current) ** 2
        total = metric[:, None] + branch
        if cml:
            # new state ns = (state * m + a) % s_count; its predecessors are preds[ns]
            a = idx % m
            cand = total[preds, a[:, None]]
            k = np.argmin(cand, axis=1)
            metric = cand[idx, k]
            back[t] = k
        else:
            a_best = np.argmin(total[0])
            metric = total[0, a_best:a_best + 1]
            back[t, 0] = a_best
    # tail observations with zero input
    for t in range(n_sym, obs.size):
        lag = t - n_sym
        isi = np.zeros(s_count, complex)
        for j in range(lag + 1, cml + 1):
            isi += taps[j] * alphabet[digits[j - 1 - lag]]
        metric = metric + np.abs(obs[t] - isi) ** 2
    state = int(np.argmin(metric))
    out = np.empty(n_sym, dtype=complex)
    for t in range(n_sym - 1, -1, -1):
        if cml:
            out[t] = alphabet[state % m]
            state = int(preds[state, back[t, state]])
        else:
            out[t] = alphabet[back[t, 0]]
    return out


def pdc_filter(channel: ChannelResponse, band: tuple[float, float],
               floor: float = AMPLITUDE_FLOOR) -> ChannelResponse:
    """Phase-only compensator: undo the non-affine part of the in-band phase."""
    sel = band_mask(channel.freq_grid, band)
    if np.count_nonzero(sel) < 3:
        raise ValueError(f"band {band} holds fewer than three grid points")
    amp = np.abs(channel.h[sel])
    if np.any(amp < floor):
        f_bad = channel.freq_grid[sel][np.argmin(amp)]
        raise MaskedPhaseError(f"in-band amplitude {amp.min():.3g} below floor {floor:g} "
                               f"at {f_bad:.6g} GHz; phase cannot be unwrapped")
    f = channel.freq_grid[sel]
    phi = np.unwrap(np.angle(channel.h[sel]))
    x = (f - f.mean()) / np.ptp(f)
    residual = phi - np.polyval(np.polyfit(x, phi, 1), x)
    g = np.ones(channel.h.size, dtype=complex)
    g[sel] = np.exp(-1j * residual)
    return ChannelResponse(channel.freq_grid, g, 0.0, f"pdc({channel.label})")


def scramble_profile(key: int, band: tuple[float, float], target_metric: float, n_segments: int = 32,
                     step: float = 0.001) -> ChannelResponse:
    """Smooth pseudo-random phase-only response with integrated GDD ``target_metric`` (ps).

    The phase is a cubic B-spline with ``n_segments`` uniform pieces and
    Gaussian coefficients drawn from ``key``, scaled to hit the target.
    """
    if target_metric <= 0:
        raise ValueError("target metric must be positive")
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    f_lo, f_hi = band
    freq = frequency_grid(f_lo, f_hi, step)
    degree = 3
    inner = np.linspace(f_lo, f_hi, n_segments + 1)
    knots = np.concatenate([[f_lo] * degree, inner, [f_hi] * degree])
    rng = np.random.default_rng(np.random.SeedSequence([0x5C4A, int(key)]))
    coeffs = rng.standard_normal(n_segments + degree)
    shape = interpolate.BSpline(knots, coeffs, degree)(freq)
    unit = ChannelResponse(freq, np.exp(1j * shape), 0.0)
    scale = target_metric / integrated_gdd_metric(phase_profile(unit), (f_lo, f_hi))
    # the finite-difference metric is linear in the phase, so one rescale hits the target
    return ChannelResponse(freq, np.exp(1j * scale * shape), 0.0, f"scramble:{key}")
