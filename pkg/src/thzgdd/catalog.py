"""Spectroscopic line catalog and atmospheric state.

The catalog is a small CSV file: a units row, a column header row, then one
row per resonance.  Additional ``#`` lines are comments, except
``#coverage,<f_min>,<f_max>`` which sets the frequency span (GHz) the list is
meant to cover.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable

__all__ = [
    "CatalogError", "CatalogParseError", "EmptyCatalogError", "CatalogValidationError",
    "LineRecord", "LineCatalog", "AtmosphereState",
    "parse_catalog", "serialize_catalog", "load_default_catalog",
    "saturation_vapor_pressure", "water_vapor_partial_pressure",
    "UNITS_ROW", "HEADER_ROW", "REFERENCE_TEMPERATURE", "MOLECULES",
]

UNITS_ROW = "#units,GHz,cat296,GHz_per_atm,GHz_per_atm,unitless,cm-1"
HEADER_ROW = "molecule,f0,strength,gamma_air,gamma_self,n_temp,e_lower"
REFERENCE_TEMPERATURE = 296.0
MOLECULES = ("H2O", "O2")
HPA_PER_ATM = 1013.25

_FIELDS = HEADER_ROW.split(",")


class CatalogError(ValueError):
    """Base class for catalog problems."""


class CatalogParseError(CatalogError):
    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class EmptyCatalogError(CatalogError):
    pass


class CatalogValidationError(CatalogError):
    def __init__(self, field: str, value, line_number: int | None = None):
        self.field = field
        self.value = value
        self.line_number = line_number
        where = f"line {line_number}: " if line_number is not None else ""
        super().__init__(f"{where}invalid {field} = {value!r}")


@dataclass(frozen=True)
class LineRecord:
    """One resonance.

    Attributes:
        molecule: ``"H2O"`` or ``"O2"``.
        f0: Line centre (GHz).
        strength: Intensity at 296 K, cm^-1/(molecule cm^-2).
        gamma_air: Half-width per atm of dry air (GHz/atm).
        gamma_self: Half-width per atm of water vapour (GHz/atm).
        n_temp: Temperature exponent of the widths.
        e_lower: Lower-state energy (cm^-1).
    """

    molecule: str
    f0: float
    strength: float
    gamma_air: float
    gamma_self: float
    n_temp: float
    e_lower: float

    def __post_init__(self):
        if self.molecule not in MOLECULES:
            raise CatalogValidationError("molecule", self.molecule)
        for name in ("f0", "strength", "gamma_air", "gamma_self"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise CatalogValidationError(name, value)
        for name in ("n_temp", "e_lower"):
            if not math.isfinite(getattr(self, name)):
                raise CatalogValidationError(name, getattr(self, name))


@dataclass(frozen=True)
class LineCatalog:
    lines: tuple[LineRecord, ...]
    f_min: float
    f_max: float

    def __post_init__(self):
        if not self.lines:
            raise EmptyCatalogError("catalog has no lines")
        if not (0 <= self.f_min < self.f_max):
            raise CatalogValidationError("coverage", (self.f_min, self.f_max))
        f0 = [line.f0 for line in self.lines]
        if any(b < a for a, b in zip(f0, f0[1:])):
            raise CatalogValidationError("order", "lines not sorted by f0")
        if f0[0] < self.f_min or f0[-1] > self.f_max:
            raise CatalogValidationError("coverage", (self.f_min, self.f_max))

    @classmethod
    def from_lines(cls, lines: Iterable[LineRecord], f_min: float | None = None,
                   f_max: float | None = None) -> "LineCatalog":
        ordered = tuple(sorted(lines, key=lambda line: line.f0))
        if not ordered:
            raise EmptyCatalogError("catalog has no lines")
        return cls(ordered,
                   ordered[0].f0 if f_min is None else f_min,
                   ordered[-1].f0 if f_max is None else f_max)

    def select(self, molecule: str) -> "LineCatalog":
        """Sub-catalog holding only one species, same coverage."""
        return LineCatalog(tuple(l for l in self.lines if l.molecule == molecule),
                           self.f_min, self.f_max)

    def __len__(self) -> int:
        return len(self.lines)


@dataclass(frozen=True)
class AtmosphereState:
    """Temperature (K), relative humidity (fraction) and total pressure (atm)."""

    temperature: float
    relative_humidity: float
    pressure_total: float = 1.0

    def __post_init__(self):
        if not 200.0 <= self.temperature <= 350.0:
            raise ValueError(f"temperature {self.temperature} K outside [200, 350]")
        if not 0.0 <= self.relative_humidity <= 1.0:
            raise ValueError(f"relative humidity {self.relative_humidity} outside [0, 1]")
        if not 0.0 < self.pressure_total <= 2.0:
            raise ValueError(f"pressure {self.pressure_total} atm outside (0, 2]")

    @classmethod
    def from_celsius(cls, t_c: float, rh: float, pressure_atm: float = 1.0) -> "AtmosphereState":
        return cls(t_c + 273.15, rh, pressure_atm)


def _parse_float(text: str, field: str, line_number: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise CatalogParseError(f"{field}: cannot parse {text!r} as a number", line_number) from None


def parse_catalog(text: str) -> LineCatalog:
    """Parse catalog CSV text into a sorted :class:`LineCatalog`.

    Raises:
        CatalogParseError: malformed header or data row (message carries the line number).
        EmptyCatalogError: no data rows.
        CatalogValidationError: a value breaks a record invariant.
    """
    raw = text.splitlines()
    if not raw or raw[0].strip() != UNITS_ROW:
        raise CatalogParseError(f"first line must be {UNITS_ROW!r}", 1)
    if len(raw) < 2 or raw[1].strip() != HEADER_ROW:
        raise CatalogParseError(f"second line must be {HEADER_ROW!r}", 2)

    coverage = None
    records = []
    for number, line in enumerate(raw[2:], start=3):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            parts = [p.strip() for p in stripped[1:].split(",")]
            if parts[0] == "coverage":
                if len(parts) != 3:
                    raise CatalogParseError("coverage needs two bounds", number)
                coverage = (_parse_float(parts[1], "coverage", number),
                            _parse_float(parts[2], "coverage", number))
            continue
        cells = [c.strip() for c in stripped.split(",")]
        if len(cells) != len(_FIELDS):
            raise CatalogParseError(f"expected {len(_FIELDS)} columns, got {len(cells)}", number)
        values = [cells[0]] + [_parse_float(c, f, number) for c, f in zip(cells[1:], _FIELDS[1:])]
        try:
            records.append(LineRecord(*values))
        except CatalogValidationError as exc:
            raise CatalogValidationError(exc.field, exc.value, number) from None

    if not records:
        raise EmptyCatalogError("catalog file has no data rows")
    if coverage is None:
        return LineCatalog.from_lines(records)
    try:
        return LineCatalog.from_lines(records, *coverage)
    except CatalogValidationError as exc:
        raise CatalogValidationError(exc.field, exc.value) from None


def serialize_catalog(catalog: LineCatalog) -> str:
    """Inverse of :func:`parse_catalog` (``repr`` floats, so round trips are exact)."""
    out = io.StringIO()
    out.write(UNITS_ROW + "\n" + HEADER_ROW + "\n")
    out.write(f"#coverage,{catalog.f_min!r},{catalog.f_max!r}\n")
    for l in catalog.lines:
        out.write(f"{l.molecule},{l.f0!r},{l.strength!r},{l.gamma_air!r},"
                  f"{l.gamma_self!r},{l.n_temp!r},{l.e_lower!r}\n")
    return out.getvalue()


def load_default_catalog() -> LineCatalog:
    """The shipped H2O/O2 list covering 1-1000 GHz."""
    text = resources.files("thzgdd").joinpath("data/lines.csv").read_text(encoding="utf-8")
    return parse_catalog(text)


def saturation_vapor_pressure(temperature: float) -> float:
    """Saturation vapour pressure over liquid water, hPa (Buck equation)."""
    t_c = temperature - 273.15
    return 6.1121 * math.exp((18.678 - t_c / 234.5) * (t_c / (257.14 + t_c)))


def water_vapor_partial_pressure(atmos: AtmosphereState) -> float:
    """Water vapour partial pressure in atm."""
    return atmos.relative_humidity * (saturation_vapor_pressure(atmos.temperature) / HPA_PER_ATM)

