"""Complex refractivity of humid air and the line-of-sight channel it implies.

Refractivity is stored as ``n - 1 = n' + j*kappa`` with ``kappa >= 0`` the
absorption index, so a path of length ``d`` transmits
``exp(-j*k*d*n') * exp(-k*d*kappa)`` with ``k = 2*pi*f/c``.  The constant
dry-air refractivity is left out: it only adds bulk delay.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import constants

from .catalog import (AtmosphereState, EmptyCatalogError, LineCatalog, REFERENCE_TEMPERATURE,
                      water_vapor_partial_pressure)

__all__ = [
    "CoverageError", "GridError", "RefractivitySpectrum", "ChannelResponse",
    "frequency_grid", "check_uniform_grid", "vvw_line_shape", "complex_refractivity",
    "los_transfer", "attenuation_db_per_m", "identity_channel",
]

C = constants.c
K_B = constants.k
PA_PER_ATM = constants.atm
C2_CM_K = 100 * constants.h * constants.c / constants.k  # second radiation constant, cm K
O2_FRACTION = 0.20946
# rotational partition function exponent + 1 (stimulated emission)
_STRENGTH_T_EXPONENT = {"H2O": 2.5, "O2": 2.0}

LineShape = Callable[[np.ndarray, float, float], np.ndarray]


class GridError(ValueError):
    pass


class CoverageError(ValueError):
    """A requested frequency range is not covered by the available data."""


def frequency_grid(f_lo: float, f_hi: float, step: float = 0.01) -> np.ndarray:
    """Uniform grid from ``f_lo`` to ``f_hi`` (GHz, inclusive), spacing close to ``step``."""
    if not f_hi > f_lo or step <= 0:
        raise GridError(f"bad grid request ({f_lo}, {f_hi}, {step})")
    n = int(round((f_hi - f_lo) / step)) + 1
    return np.linspace(f_lo, f_hi, max(n, 2))


def check_uniform_grid(freq: np.ndarray, min_points: int = 2) -> float:
    """Return the spacing of ``freq`` or raise :class:`GridError`."""
    freq = np.asarray(freq, dtype=float)
    if freq.ndim != 1 or freq.size < min_points:
        raise GridError(f"grid needs at least {min_points} points")
    d = np.diff(freq)
    if not np.all(d > 0):
        raise GridError("grid must be strictly increasing")
    if not np.allclose(d, d[0], rtol=1e-6, atol=0):
        raise GridError("grid must be uniformly spaced")
    return float((freq[-1] - freq[0]) / (freq.size - 1))


@dataclass(frozen=True)
class RefractivitySpectrum:
    freq_grid: np.ndarray
    refractivity: np.ndarray
    atmos: AtmosphereState

    def __post_init__(self):
        check_uniform_grid(self.freq_grid)
        if self.refractivity.shape != self.freq_grid.shape:
            raise GridError("refractivity and grid differ in length")
        if np.any(self.refractivity.imag < 0):
            raise ValueError("negative absorption index")


@dataclass(frozen=True, eq=False)
class ChannelResponse:
    """Complex transfer function ``h`` sampled on a uniform grid (GHz)."""

    freq_grid: np.ndarray
    h: np.ndarray
    distance: float = 0.0
    label: str = ""
    _unwrapped: np.ndarray = field(default=None, init=False, repr=False)

    def __post_init__(self):
        freq = np.asarray(self.freq_grid, dtype=float)
        h = np.asarray(self.h, dtype=complex)
        object.__setattr__(self, "freq_grid", freq)
        object.__setattr__(self, "h", h)
        check_uniform_grid(freq)
        if h.shape != freq.shape:
            raise GridError("h and grid differ in length")
        if not np.all(np.isfinite(h)):
            raise ValueError("transfer function has non-finite values")

    @property
    def step(self) -> float:
        return float((self.freq_grid[-1] - self.freq_grid[0]) / (self.freq_grid.size - 1))

    @property
    def f_lo(self) -> float:
        return float(self.freq_grid[0])

    @property
    def f_hi(self) -> float:
        return float(self.freq_grid[-1])

    def covers(self, f_lo: float, f_hi: float) -> bool:
        tol = 1e-9 * max(abs(self.f_hi), 1.0)
        return self.f_lo - tol <= f_lo and f_hi <= self.f_hi + tol

    def unwrapped_phase(self) -> np.ndarray:
        if self._unwrapped is None:
            object.__setattr__(self, "_unwrapped", np.unwrap(np.angle(self.h)))
        return self._unwrapped

    def at(self, freq: np.ndarray, fill: complex | None = None) -> np.ndarray:
        """Interpolate onto ``freq`` (GHz).

        Amplitude and unwrapped phase are interpolated separately, which keeps
        linear-phase (pure delay) responses exact.  Points outside the grid get
        ``fill``; with ``fill=None`` they raise :class:`CoverageError`.
        """
        freq = np.asarray(freq, dtype=float)
        outside = (freq < self.f_lo) | (freq > self.f_hi)
        if np.any(outside) and fill is None:
            bad = freq[outside]
            raise CoverageError(f"channel grid {self.f_lo:.6g}-{self.f_hi:.6g} GHz does not cover "
                                f"{bad.min():.6g}-{bad.max():.6g} GHz")
        amp = np.interp(freq, self.freq_grid, np.abs(self.h))
        phase = np.interp(freq, self.freq_grid, self.unwrapped_phase())
        out = amp * np.exp(1j * phase)
        if np.any(outside):
            out[outside] = fill
        return out

    def conjugate(self) -> "ChannelResponse":
        return ChannelResponse(self.freq_grid, np.conj(self.h), self.distance, f"conj({self.label})")


def identity_channel(freq_grid: np.ndarray, label: str = "identity") -> ChannelResponse:
    return ChannelResponse(np.asarray(freq_grid, dtype=float), np.ones(len(freq_grid), complex), 0.0, label)


def vvw_line_shape(f: np.ndarray, f0: float, gamma: float) -> np.ndarray:
    """Complex Van Vleck-Weisskopf shape (units of 1/frequency).

    The imaginary part is ``(f/f0) * (L(f - f0) + L(f + f0))`` with
    ``L(x) = gamma / (x**2 + gamma**2)``; the real part is its Kramers-Kronig
    partner, vanishing as ``f -> inf``.
    """
    return ((f0 - 1j * gamma) / (f0 - f - 1j * gamma) + (f0 + 1j * gamma) / (f0 + f + 1j * gamma)) / f0


def _number_densities(atmos: AtmosphereState) -> tuple[float, float, float, float]:
    p_h2o = water_vapor_partial_pressure(atmos)
    p_dry = atmos.pressure_total - p_h2o
    kt = K_B * atmos.temperature
    return p_dry, p_h2o, p_h2o * PA_PER_ATM / kt, O2_FRACTION * p_dry * PA_PER_ATM / kt


def complex_refractivity(catalog: LineCatalog, atmos: AtmosphereState, freq_grid: np.ndarray,
                         line_shape: LineShape = vvw_line_shape) -> RefractivitySpectrum:
    """Sum collision-broadened resonances into ``n - 1`` on ``freq_grid`` (GHz)."""
    if catalog is None or len(catalog) == 0:
        raise EmptyCatalogError("empty catalog")
    freq = np.asarray(freq_grid, dtype=float)
    check_uniform_grid(freq)
    if freq[0] < catalog.f_min or freq[-1] > catalog.f_max:
        raise CoverageError(f"grid {freq[0]:.6g}-{freq[-1]:.6g} GHz outside catalog coverage "
                            f"{catalog.f_min:.6g}-{catalog.f_max:.6g} GHz")

    t = atmos.temperature
    ratio = REFERENCE_TEMPERATURE / t
    p_dry, p_h2o, n_h2o, n_o2 = _number_densities(atmos)
    f_hz = freq * 1e9
    total = np.zeros(freq.size, dtype=complex)
    for line in catalog.lines:
        density = n_h2o if line.molecule == "H2O" else n_o2
        if density == 0.0:
            continue
        strength = (line.strength * 1e-2 * ratio ** _STRENGTH_T_EXPONENT[line.molecule]
                    * np.exp(-C2_CM_K * line.e_lower * (1.0 / t - 1.0 / REFERENCE_TEMPERATURE)))
        gamma = (line.gamma_air * p_dry + line.gamma_self * p_h2o) * ratio ** line.n_temp * 1e9
        f0 = line.f0 * 1e9
        amplitude = C ** 2 * density * strength / (4 * np.pi ** 2 * f0)
        total += amplitude * line_shape(f_hz, f0, gamma)
    # rounding far from any line can leave tiny negative absorption
    total.imag = np.maximum(total.imag, 0.0)
    return RefractivitySpectrum(freq, total, atmos)


def los_transfer(spec: RefractivitySpectrum, distance: float) -> ChannelResponse:
    """Line-of-sight transfer function over ``distance`` metres."""
    if distance < 0:
        raise ValueError(f"distance must be non-negative, got {distance}")
    k = 2 * np.pi * spec.freq_grid * 1e9 / C
    h = np.exp(-1j * k * distance * np.conj(spec.refractivity))
    return ChannelResponse(spec.freq_grid, h, float(distance), f"atmosphere:{distance:g}m")


def attenuation_db_per_m(spec: RefractivitySpectrum) -> np.ndarray:
    """Power attenuation, dB/m."""
    return 4 * np.pi * spec.freq_grid * 1e9 / C * spec.refractivity.imag * 10 / np.log(10)
