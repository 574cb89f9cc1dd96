"""Phase, group delay and GDD extraction plus a few scalar link metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants

from .atmosphere import ChannelResponse, GridError, check_uniform_grid

__all__ = [
    "AMPLITUDE_FLOOR", "PhaseProfile", "phase_profile", "integrated_gdd_metric", "required_gdd",
    "coherence_time", "papr", "affine_fit_residual", "band_mask",
]

AMPLITUDE_FLOOR = 1e-6
_MIN_SEGMENT = 4  # one-sided second-order second derivative needs four points


@dataclass(frozen=True)
class PhaseProfile:
    """Unwrapped phase (rad), group delay (ps) and GDD (ps^2) on a GHz grid.

    ``gdd`` follows the group-delay sign convention: it is ``d(group_delay)/d(omega)``,
    i.e. ``-d2(phi)/d(omega)2`` for a transfer function ``exp(j*phi)``.  Entries under
    ``amplitude_floor_mask`` are NaN.
    """

    freq_grid: np.ndarray
    phase_unwrapped: np.ndarray
    group_delay: np.ndarray
    gdd: np.ndarray
    amplitude_floor_mask: np.ndarray
    amplitude: np.ndarray


def _segments(valid: np.ndarray):
    """(start, stop) index pairs of runs of True."""
    edges = np.diff(np.concatenate(([0], valid.astype(np.int8), [0])))
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


def phase_profile(channel: ChannelResponse, floor: float = AMPLITUDE_FLOOR) -> PhaseProfile:
    freq = channel.freq_grid
    if freq.size < 5:
        raise GridError("phase profile needs at least 5 grid points")
    df = check_uniform_grid(freq) * 1e9
    d_omega = 2 * np.pi * df
    amp = np.abs(channel.h)
    masked = amp < floor

    phase = np.full(freq.size, np.nan)
    tau = np.full(freq.size, np.nan)
    gdd = np.full(freq.size, np.nan)
    wrapped = np.angle(channel.h)
    for start, stop in _segments(~masked):
        if stop - start < _MIN_SEGMENT:
            masked[start:stop] = True
            continue
        phi = np.unwrap(wrapped[start:stop])
        phase[start:stop] = phi
        tau[start:stop] = -np.gradient(phi, d_omega, edge_order=2)
        second = np.empty_like(phi)
        second[1:-1] = phi[2:] - 2 * phi[1:-1] + phi[:-2]
        second[0] = 2 * phi[0] - 5 * phi[1] + 4 * phi[2] - phi[3]
        second[-1] = 2 * phi[-1] - 5 * phi[-2] + 4 * phi[-3] - phi[-4]
        gdd[start:stop] = -second / d_omega ** 2
    return PhaseProfile(freq, phase, tau * 1e12, gdd * 1e24, masked, amp)


def band_mask(freq: np.ndarray, band: tuple[float, float]) -> np.ndarray:
    f_lo, f_hi = band
    tol = 1e-9 * max(abs(f_hi), 1.0)
    return (freq >= f_lo - tol) & (freq <= f_hi + tol)


def integrated_gdd_metric(profile: PhaseProfile, band: tuple[float, float]) -> float:
    """Bandwidth-integrated GDD magnitude ``2*pi*B*mean(|gdd|)`` over ``band`` (GHz), in ps.

    Values comparable to or above the symbol duration signal visible pulse distortion.
    """
    f_lo, f_hi = band
    if not f_hi > f_lo:
        raise ValueError(f"empty band {band}")
    if f_lo < profile.freq_grid[0] - 1e-9 or f_hi > profile.freq_grid[-1] + 1e-9:
        raise ValueError(f"band {band} outside grid")
    sel = band_mask(profile.freq_grid, band) & ~profile.amplitude_floor_mask
    if np.count_nonzero(sel) < 2:
        raise ValueError(f"band {band} holds fewer than two usable points")
    mean_gdd_s2 = np.mean(np.abs(profile.gdd[sel])) * 1e-24
    return 2 * np.pi * (f_hi - f_lo) * 1e9 * mean_gdd_s2 * 1e12


def required_gdd(bandwidth_hz: float, symbol_duration_s: float | None = None) -> float:
    """Mean |GDD| (ps^2) at which the integrated metric reaches the symbol duration.

    With the default symbol duration ``1/B`` this falls off as ``1/B**2``.
    """
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    t_s = 1.0 / bandwidth_hz if symbol_duration_s is None else symbol_duration_s
    return t_s / (2 * np.pi * bandwidth_hz) * 1e24


def coherence_time(carrier_ghz: float, speed_kmh: float) -> float:
    """Half-wavelength travel time in seconds."""
    if carrier_ghz <= 0 or speed_kmh <= 0:
        raise ValueError("carrier and speed must be positive")
    wavelength = constants.c / (carrier_ghz * 1e9)
    return wavelength / 2 / (speed_kmh / 3.6)


def papr(wave) -> float:
    """Peak-to-average power ratio in dB of a waveform or sample array."""
    x = np.asarray(getattr(wave, "samples", wave))
    if x.size == 0:
        raise ValueError("empty waveform")
    power = np.abs(x) ** 2
    mean = power.mean()
    if mean == 0:
        raise ValueError("all-zero waveform has no PAPR")
    return float(10 * np.log10(power.max() / mean))


def affine_fit_residual(freq: np.ndarray, phase: np.ndarray) -> np.ndarray:
    """``phase`` minus its least-squares affine fit in frequency."""
    x = (freq - freq.mean()) / max(np.ptp(freq), 1e-300)
    coeffs = np.polyfit(x, phase, 1)
    return phase - np.polyval(coeffs, x)
