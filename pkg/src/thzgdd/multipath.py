"""Discrete multipath, rough-surface scatterer clusters and channel cascades."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import constants, stats

from .atmosphere import ChannelResponse, GridError

__all__ = ["Path", "PathSet", "SurfaceStats", "multipath_transfer", "rough_surface_paths",
           "cascade", "parse_path", "parse_surface", "quadratic_phase_channel"]


@dataclass(frozen=True)
class Path:
    delay: float  # ps
    gain: complex
    label: str = ""


@dataclass(frozen=True)
class PathSet:
    paths: tuple[Path, ...]

    def __post_init__(self):
        if not self.paths:
            raise ValueError("a path set needs at least one path")
        for p in self.paths:
            if not p.delay >= 0:
                raise ValueError(f"negative path delay {p.delay}")
            if not np.isfinite(p.gain):
                raise ValueError(f"non-finite path gain {p.gain}")

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, complex]]) -> "PathSet":
        return cls(tuple(Path(float(d), complex(g), f"path{i}") for i, (d, g) in enumerate(pairs)))

    @property
    def delays(self) -> np.ndarray:
        return np.array([p.delay for p in self.paths])

    @property
    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths], dtype=complex)


@dataclass(frozen=True)
class SurfaceStats:
    """Height statistics (µm) of a rough reflector and the illumination geometry."""

    mean_height: float
    height_range: tuple[float, float]
    incidence_angle: float = 0.0
    n_scatterers: int = 64
    correlation_note: str = ""

    def __post_init__(self):
        lo, hi = self.height_range
        if lo < 0 or self.mean_height < 0:
            raise ValueError("heights must be non-negative")
        if not lo <= self.mean_height <= hi:
            raise ValueError("need min <= mean <= max height")
        if not 0 <= self.incidence_angle < 90:
            raise ValueError("incidence angle must be in [0, 90) degrees")
        if self.n_scatterers < 1:
            raise ValueError("need at least one scatterer")


def multipath_transfer(paths: PathSet, freq_grid: np.ndarray) -> ChannelResponse:
    """``h(f) = sum_k gain_k * exp(-j*2*pi*f*delay_k)`` on ``freq_grid`` (GHz)."""
    if not isinstance(paths, PathSet):
        paths = PathSet(tuple(paths))
    freq = np.asarray(freq_grid, dtype=float)
    # GHz * ps = 1e-3 cycles
    phase = -2j * np.pi * np.outer(freq, paths.delays) * 1e-3
    h = np.exp(phase) @ paths.gains
    return ChannelResponse(freq, h, 0.0, f"multipath:{len(paths.paths)}")


def rough_surface_paths(stats_: SurfaceStats, rng_seed: int) -> PathSet:
    """Draw a micro-multipath cluster for a rough reflector.

    Heights come from a Gaussian centred on the mean height with standard
    deviation a quarter of the height range, truncated to the range.  Each height
    ``h`` becomes an excess delay ``2*h*cos(theta)/c``; every scatterer carries
    gain ``1/n``.  Paths are returned sorted by delay.
    """
    lo, hi = stats_.height_range
    n = stats_.n_scatterers
    sigma = (hi - lo) / 4.0
    if sigma == 0:
        heights = np.full(n, float(stats_.mean_height))
    else:
        a, b = (lo - stats_.mean_height) / sigma, (hi - stats_.mean_height) / sigma
        rng = np.random.default_rng(rng_seed)
        heights = stats.truncnorm.rvs(a, b, loc=stats_.mean_height, scale=sigma, size=n,
                                      random_state=rng)
    delays_ps = np.sort(2 * heights * 1e-6 * np.cos(np.radians(stats_.incidence_angle))
                        / constants.c * 1e12)
    return PathSet(tuple(Path(float(d), complex(1.0 / n), f"scatterer{i}")
                         for i, d in enumerate(delays_ps)))


def quadratic_phase_channel(freq_grid: np.ndarray, gdd_ps2: float, f_ref: float | None = None) -> ChannelResponse:
    """Unit-magnitude channel with constant GDD ``gdd_ps2`` about ``f_ref`` (GHz, default grid centre)."""
    freq = np.asarray(freq_grid, dtype=float)
    f_ref = 0.5 * (freq[0] + freq[-1]) if f_ref is None else f_ref
    omega = 2 * np.pi * (freq - f_ref) * 1e-3  # rad/ps
    return ChannelResponse(freq, np.exp(-0.5j * gdd_ps2 * omega ** 2), 0.0, f"gdd:{gdd_ps2:g}ps2")


def cascade(channels: Sequence[ChannelResponse]) -> ChannelResponse:
    """Pointwise product of channels sharing one frequency grid."""
    channels = list(channels)
    if not channels:
        raise ValueError("nothing to cascade")
    first = channels[0]
    h = first.h.copy()
    for ch in channels[1:]:
        if ch.freq_grid.shape != first.freq_grid.shape or not np.allclose(
                ch.freq_grid, first.freq_grid, rtol=0, atol=1e-9 * max(first.f_hi, 1.0)):
            raise GridError("cascaded channels must share a frequency grid")
        h = h * ch.h
    return ChannelResponse(first.freq_grid, h, 0.0,
                           "*".join(ch.label for ch in channels))


def parse_path(text: str) -> tuple[float, complex]:
    """``delay_ps:gain_re:gain_im`` -> (delay, gain)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"path must be delay_ps:gain_re:gain_im, got {text!r}")
    d, re_, im = (float(p) for p in parts)
    return d, complex(re_, im)


def parse_surface(text: str) -> tuple[SurfaceStats, int]:
    """``mean_um:min_um:max_um:angle_deg:n:seed`` -> (stats, seed)."""
    parts = text.split(":")
    if len(parts) != 6:
        raise ValueError(f"surface must be mean_um:min_um:max_um:angle_deg:n:seed, got {text!r}")
    mean, lo, hi, angle = (float(p) for p in parts[:4])
    return SurfaceStats(mean, (lo, hi), angle, int(parts[4])), int(parts[5])
