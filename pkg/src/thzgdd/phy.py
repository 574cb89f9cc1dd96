"""Single-carrier BPSK/QPSK waveforms at complex baseband.

Frames are treated as cyclic blocks: pulse shaping, channels and the matched
filter are all applied as products over the frame's FFT bins.  With the
default ``span_symbols = 0`` the shaping filter is the exact root-raised-cosine
spectrum, so transmit and receive filters together are Nyquist to rounding
error.  A positive ``span_symbols`` uses a truncated time-domain RRC instead.

Energy convention: ``sum(|x|**2)`` over one symbol's worth of samples is the
symbol energy (1 by construction), and noise of per-sample variance ``N0``
gives noise variance ``N0`` after the matched filter.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .atmosphere import ChannelResponse, CoverageError

__all__ = [
    "ConfigMismatchError", "Waveform", "LinkConfig", "PRBS_TAPS", "prbs", "bits_per_symbol",
    "map_bits", "slice_symbols", "symbols_to_bits", "rrc_response", "modulate",
    "modulate_symbols", "apply_channel", "apply_filter", "add_awgn", "demodulate",
    "gaussian_pulse", "waveform_energy",
]

# order -> (order, feedback lag); s[n] = s[n - order] xor s[n - lag]
PRBS_TAPS = {7: (7, 6), 9: (9, 5), 15: (15, 14), 23: (23, 18)}
SCHEMES = {"BPSK": 1, "QPSK": 2}


class ConfigMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Waveform:
    """Complex envelope around ``carrier`` (GHz) sampled at ``sample_rate`` (GS/s)."""

    samples: np.ndarray
    sample_rate: float
    carrier: float
    samples_per_symbol: int
    energy_per_symbol: float = 1.0
    bits_per_symbol: int = 1
    occupied_bandwidth: float | None = None  # GHz; None means the whole sampled band

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=complex)
        object.__setattr__(self, "samples", x)
        if x.ndim != 1 or x.size == 0:
            raise ValueError("waveform needs a 1-D, non-empty sample array")
        if not np.all(np.isfinite(x)):
            raise ValueError("waveform has non-finite samples")
        if self.samples_per_symbol < 2:
            raise ValueError("samples_per_symbol must be >= 2")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def symbol_rate(self) -> float:
        return self.sample_rate / self.samples_per_symbol

    @property
    def n_symbols(self) -> int:
        return self.samples.size // self.samples_per_symbol

    @property
    def band(self) -> tuple[float, float]:
        """RF band (GHz) that carries signal energy."""
        half = (self.sample_rate if self.occupied_bandwidth is None else self.occupied_bandwidth) / 2
        return self.carrier - half, self.carrier + half

    def bin_frequencies(self) -> np.ndarray:
        """RF frequency (GHz) of every FFT bin, in numpy FFT order."""
        return self.carrier + np.fft.fftfreq(self.samples.size, d=1.0 / self.sample_rate)

    def with_samples(self, samples: np.ndarray) -> "Waveform":
        return replace(self, samples=samples)


@dataclass(frozen=True)
class LinkConfig:
    scheme: str = "QPSK"
    symbol_rate: float = 10.0  # Gbaud
    carrier: float = 380.0  # GHz
    rolloff: float = 0.35
    span_symbols: int = 0  # 0 = exact RRC spectrum
    frame_bits: int = 4096
    samples_per_symbol: int = 4

    def __post_init__(self):
        object.__setattr__(self, "scheme", self.scheme.upper())
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {sorted(SCHEMES)}, got {self.scheme!r}")
        if self.symbol_rate <= 0 or self.carrier <= 0:
            raise ValueError("symbol_rate and carrier must be positive")
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValueError(f"rolloff {self.rolloff} outside [0, 1]")
        if self.span_symbols < 0:
            raise ValueError("span_symbols must be >= 0")
        if self.samples_per_symbol < 2:
            raise ValueError("samples_per_symbol must be >= 2")
        if self.occupied_bandwidth > self.sample_rate * (1 + 1e-12):
            raise ValueError(f"occupied bandwidth {self.occupied_bandwidth:g} GHz exceeds "
                             f"sample rate {self.sample_rate:g} GS/s")
        if self.frame_bits <= 0 or self.frame_bits % self.bits_per_symbol:
            raise ValueError(f"frame_bits must be a positive multiple of {self.bits_per_symbol}")

    @property
    def bits_per_symbol(self) -> int:
        return SCHEMES[self.scheme]

    @property
    def sample_rate(self) -> float:
        return self.symbol_rate * self.samples_per_symbol

    @property
    def occupied_bandwidth(self) -> float:
        return (1 + self.rolloff) * self.symbol_rate

    @property
    def n_symbols(self) -> int:
        return self.frame_bits // self.bits_per_symbol

    @property
    def band(self) -> tuple[float, float]:
        half = self.occupied_bandwidth / 2
        return self.carrier - half, self.carrier + half


def prbs(order: int, seed: int, n_bits: int) -> np.ndarray:
    """Maximal-length LFSR bits (uint8).

    The first ``order`` bits are the seed's binary digits, least significant
    first (the seed is folded into ``1 .. 2**order - 1``).
    """
    if order not in PRBS_TAPS:
        raise ValueError(f"unsupported PRBS order {order}; choose from {sorted(PRBS_TAPS)}")
    if seed == 0:
        raise ValueError("PRBS seed must be nonzero")
    if n_bits < 0:
        raise ValueError("n_bits must be >= 0")
    k, m = PRBS_TAPS[order]
    state = (abs(int(seed)) - 1) % (2 ** k - 1) + 1
    out = np.zeros(max(n_bits, k), dtype=np.uint8)
    out[:k] = [(state >> i) & 1 for i in range(k)]
    # p(x)**(2**j) has the same trinomial form with lags scaled by 2**j, so the
    # recurrence may skip ahead in chunks that double as the sequence grows
    filled = k
    while filled < out.size:
        scale = 1
        while k * scale * 2 <= filled:
            scale *= 2
        far, near = k * scale, m * scale
        stop = min(filled + near, out.size)
        n = stop - filled
        out[filled:stop] = out[filled - far:filled - far + n] ^ out[filled - near:filled - near + n]
        filled = stop
    return out[:n_bits]


def bits_per_symbol(scheme: str) -> int:
    return SCHEMES[scheme.upper()]


def map_bits(bits: np.ndarray, scheme: str) -> np.ndarray:
    """Gray-map bits to unit-energy symbols (0 -> +1, 1 -> -1 per rail)."""
    bits = np.asarray(bits, dtype=np.uint8)
    scheme = scheme.upper()
    if scheme == "BPSK":
        return (1.0 - 2.0 * bits).astype(complex)
    if bits.size % 2:
        raise ValueError("QPSK needs an even number of bits")
    pairs = 1.0 - 2.0 * bits.reshape(-1, 2)
    return (pairs[:, 0] + 1j * pairs[:, 1]) / np.sqrt(2)


def slice_symbols(soft: np.ndarray, scheme: str) -> np.ndarray:
    """Nearest constellation point."""
    soft = np.asarray(soft)
    if scheme.upper() == "BPSK":
        return np.where(soft.real >= 0, 1.0, -1.0).astype(complex)
    return (np.where(soft.real >= 0, 1.0, -1.0) + 1j * np.where(soft.imag >= 0, 1.0, -1.0)) / np.sqrt(2)


def symbols_to_bits(soft: np.ndarray, scheme: str) -> np.ndarray:
    """Hard decisions back to bits (inverse of :func:`map_bits`)."""
    soft = np.asarray(soft)
    if scheme.upper() == "BPSK":
        return (soft.real < 0).astype(np.uint8)
    out = np.empty((soft.size, 2), dtype=np.uint8)
    out[:, 0] = soft.real < 0
    out[:, 1] = soft.imag < 0
    return out.reshape(-1)


def _raised_cosine_spectrum(nu: np.ndarray, rolloff: float) -> np.ndarray:
    """RC spectrum vs frequency in symbol-rate units, unit area."""
    a = np.abs(nu)
    lo, hi = (1 - rolloff) / 2, (1 + rolloff) / 2
    out = np.where(a <= lo, 1.0, 0.0)
    if rolloff > 0:
        edge = (a > lo) & (a <= hi)
        out[edge] = 0.5 * (1 + np.cos(np.pi / rolloff * (a[edge] - lo)))
    return out


def _rrc_taps(sps: int, rolloff: float, span: int) -> np.ndarray:
    t = np.arange(-span * sps // 2, span * sps // 2 + 1) / sps
    b = rolloff
    h = np.empty_like(t)
    for i, ti in enumerate(t):
        if abs(ti) < 1e-12:
            h[i] = 1 - b + 4 * b / np.pi
        elif b > 0 and abs(abs(ti) - 1 / (4 * b)) < 1e-9:
            h[i] = b / np.sqrt(2) * ((1 + 2 / np.pi) * np.sin(np.pi / (4 * b))
                                      + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b)))
        else:
            h[i] = ((np.sin(np.pi * ti * (1 - b)) + 4 * b * ti * np.cos(np.pi * ti * (1 + b)))
                    / (np.pi * ti * (1 - (4 * b * ti) ** 2)))
    return h / np.sqrt(np.sum(h ** 2))


def rrc_response(n_samples: int, sps: int, rolloff: float, span_symbols: int = 0) -> np.ndarray:
    """Shaping filter on the FFT bins of an ``n_samples`` frame, scaled to ``mean|R|**2 = 1``."""
    if span_symbols == 0:
        nu = np.fft.fftfreq(n_samples) * sps
        return np.sqrt(sps * _raised_cosine_spectrum(nu, rolloff))
    taps = _rrc_taps(sps, rolloff, span_symbols)
    if taps.size > n_samples:
        raise ValueError("RRC span longer than the frame")
    centred = np.zeros(n_samples)
    half = taps.size // 2
    centred[:half + 1] = taps[half:]
    centred[n_samples - half:] = taps[:half]
    return np.fft.fft(centred).real


def modulate_symbols(symbols: np.ndarray, config: LinkConfig) -> Waveform:
    sps = config.samples_per_symbol
    impulses = np.zeros(symbols.size * sps, dtype=complex)
    impulses[::sps] = symbols
    shaped = np.fft.ifft(np.fft.fft(impulses) * rrc_response(impulses.size, sps, config.rolloff,
                                                             config.span_symbols))
    occupied = config.occupied_bandwidth if config.span_symbols == 0 else None
    return Waveform(shaped, config.sample_rate, config.carrier, sps, 1.0,
                    config.bits_per_symbol, occupied)


def modulate(bits: np.ndarray, config: LinkConfig) -> Waveform:
    """Gray-map ``frame_bits`` bits and RRC-shape them into one cyclic frame."""
    bits = np.asarray(bits)
    if bits.size != config.frame_bits:
        raise ValueError(f"expected {config.frame_bits} bits, got {bits.size}")
    return modulate_symbols(map_bits(bits, config.scheme), config)


def apply_filter(wave: Waveform, response: np.ndarray) -> Waveform:
    """Multiply the frame spectrum by ``response`` given on the FFT bins."""
    return wave.with_samples(np.fft.ifft(np.fft.fft(wave.samples) * response))


def channel_on_bins(wave: Waveform, channel: ChannelResponse) -> np.ndarray:
    """``h`` on the waveform's FFT bins; bins outside the occupied band get 0 if uncovered."""
    f = wave.bin_frequencies()
    lo, hi = wave.band
    if not channel.covers(lo, hi):
        missing = []
        if lo < channel.f_lo:
            missing.append(f"{lo:.6g}-{min(hi, channel.f_lo):.6g} GHz")
        if hi > channel.f_hi:
            missing.append(f"{max(lo, channel.f_hi):.6g}-{hi:.6g} GHz")
        raise CoverageError(f"channel '{channel.label}' ({channel.f_lo:.6g}-{channel.f_hi:.6g} GHz) "
                            f"misses {', '.join(missing)} of the occupied band")
    # clip the in-band bins onto the grid to absorb rounding at the edges
    tol = 1e-9 * max(abs(channel.f_hi), 1.0)
    inband = (f >= lo - tol) & (f <= hi + tol)
    f = np.where(inband, np.clip(f, channel.f_lo, channel.f_hi), f)
    return channel.at(f, fill=0.0)


def apply_channel(wave: Waveform, channel: ChannelResponse) -> Waveform:
    """Filter the frame by ``channel`` (cyclic convolution)."""
    return apply_filter(wave, channel_on_bins(wave, channel))


def add_awgn(wave: Waveform, ebn0_db: float, rng_seed) -> Waveform:
    """Add complex white Gaussian noise for the given Eb/N0 (dB); ``inf`` adds nothing."""
    if np.isposinf(ebn0_db):
        return wave
    n0 = wave.energy_per_symbol / (wave.bits_per_symbol * 10 ** (ebn0_db / 10))
    rng = np.random.default_rng(rng_seed)
    noise = rng.standard_normal((2, wave.samples.size))
    return wave.with_samples(wave.samples + np.sqrt(n0 / 2) * (noise[0] + 1j * noise[1]))


def demodulate(wave: Waveform, config: LinkConfig, timing_offset: int = 0) -> np.ndarray:
    """Matched filter and symbol-rate sampling; returns complex soft symbols."""
    if wave.samples_per_symbol != config.samples_per_symbol:
        raise ConfigMismatchError("samples_per_symbol differs between waveform and config")
    if not np.isclose(wave.sample_rate, config.sample_rate, rtol=1e-12):
        raise ConfigMismatchError("sample rate differs between waveform and config")
    if not np.isclose(wave.carrier, config.carrier, rtol=1e-12):
        raise ConfigMismatchError("carrier differs between waveform and config")
    if wave.samples.size % config.samples_per_symbol:
        raise ConfigMismatchError("frame length is not a whole number of symbols")
    sps = config.samples_per_symbol
    matched = np.conj(rrc_response(wave.samples.size, sps, config.rolloff, config.span_symbols))
    y = np.fft.ifft(np.fft.fft(wave.samples) * matched)
    return np.roll(y, -timing_offset)[::sps]


def gaussian_pulse(fwhm_ps: float, carrier: float, sample_rate: float, n_samples: int) -> Waveform:
    """Unit-energy Gaussian envelope centred in the frame."""
    if fwhm_ps <= 0 or n_samples < 2:
        raise ValueError("need a positive width and at least two samples")
    t = (np.arange(n_samples) - n_samples // 2) / sample_rate * 1e3  # ps
    sigma = fwhm_ps / (2 * np.sqrt(2 * np.log(2)))
    x = np.exp(-t ** 2 / (4 * sigma ** 2))  # power FWHM = fwhm_ps
    x = x / np.sqrt(np.sum(x ** 2))
    sps = max(2, int(round(fwhm_ps * 1e-3 * sample_rate)))
    return Waveform(x.astype(complex), sample_rate, carrier, sps)


def waveform_energy(wave: Waveform) -> float:
    return float(np.sum(np.abs(wave.samples) ** 2))
