"""Cs structure constants and Rydberg-Ritz term energies.

Loads a key-value constants file (quantum defects, Rydberg constant, mass,
hyperfine offsets) and computes Rydberg term energies and the nD fine
structure interval versus principal quantum number. Energies are carried as
frequencies throughout: THz for term energies, MHz for intervals.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

from .errors import RangeError, ValidationError

N_MIN = 15

SERIES_LABELS = ("S1/2", "D3/2", "D5/2")

_SERIES_KEY = {"S1/2": "s12", "D3/2": "d32", "D5/2": "d52"}

_REQUIRED_KEYS = (
    "rydberg_constant_thz",
    "s12_delta0",
    "s12_delta2",
    "d32_delta0",
    "d32_delta2",
    "d52_delta0",
    "d52_delta2",
    "cs133_mass_kg",
    "boltzmann_constant_j_per_k",
    "hfs_offset_f5_mhz",
    "hfs_offset_f4_mhz",
    "hfs_offset_f3_mhz",
)


@dataclass(frozen=True)
class RitzSeries:
    """One Rydberg series: label, two-term Ritz defect, Rydberg constant (THz)."""

    series_label: str
    delta0: float
    delta2: float
    rydberg_const: float

    def __post_init__(self):
        if self.series_label not in SERIES_LABELS:
            raise ValidationError(
                f"unknown series label {self.series_label!r}; expected one of {SERIES_LABELS}"
            )
        if self.delta0 <= 0:
            raise ValidationError("delta0 must be positive for Cs series")
        if self.rydberg_const <= 0:
            raise ValidationError("rydberg_const must be positive")


@dataclass(frozen=True)
class HyperfineLadder6P32:
    """6P3/2 hyperfine offsets (MHz) relative to the F'=5 component."""

    offsets: dict = field(
        default_factory=lambda: {5: 0.0, 4: -251.0, 3: -452.2}
    )

    def __post_init__(self):
        if set(self.offsets) != {3, 4, 5}:
            raise ValidationError("hyperfine ladder must map exactly F' in {3, 4, 5}")
        if self.offsets[5] != 0.0:
            raise ValidationError("F'=5 offset must be exactly 0 (reference transition)")
        if not (self.offsets[5] > self.offsets[4] > self.offsets[3]):
            raise ValidationError("offsets must decrease with decreasing F'")

    def offset(self, f_prime: int) -> float:
        try:
            return self.offsets[f_prime]
        except KeyError:
            raise ValidationError(f"no hyperfine component F'={f_prime}") from None

    def interval(self, f_a: int, f_b: int) -> float:
        """Magnitude of the splitting between two components, MHz."""
        return abs(self.offset(f_a) - self.offset(f_b))


class AtomData:
    """Constants container: Ritz series, hyperfine ladder, mass, Boltzmann k."""

    def __init__(self, values: dict):
        missing = [k for k in _REQUIRED_KEYS if k not in values]
        if missing:
            raise ValidationError(f"constants file missing required key(s): {', '.join(missing)}")
        unknown = [k for k in values if k not in _REQUIRED_KEYS]
        if unknown:
            raise ValidationError(f"constants file has unknown key(s): {', '.join(unknown)}")
        ry = values["rydberg_constant_thz"]
        self.series = {
            label: RitzSeries(
                series_label=label,
                delta0=values[f"{_SERIES_KEY[label]}_delta0"],
                delta2=values[f"{_SERIES_KEY[label]}_delta2"],
                rydberg_const=ry,
            )
            for label in SERIES_LABELS
        }
        if self.series["D3/2"].delta0 < self.series["D5/2"].delta0:
            raise ValidationError("expected delta0(D3/2) >= delta0(D5/2): D3/2 lies lower")
        self.hyperfine = HyperfineLadder6P32(
            offsets={
                5: values["hfs_offset_f5_mhz"],
                4: values["hfs_offset_f4_mhz"],
                3: values["hfs_offset_f3_mhz"],
            }
        )
        self.mass_kg = values["cs133_mass_kg"]
        self.boltzmann_j_per_k = values["boltzmann_constant_j_per_k"]
        if self.mass_kg <= 0 or self.boltzmann_j_per_k <= 0:
            raise ValidationError("mass and Boltzmann constant must be positive")

    def ritz(self, series_label: str) -> RitzSeries:
        try:
            return self.series[series_label]
        except KeyError:
            raise ValidationError(
                f"unknown series {series_label!r}; expected one of {SERIES_LABELS}"
            ) from None


def parse_constants_text(text: str) -> dict:
    """Parse 'key = value' lines; '#' comments and blank lines ignored."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"constants line {lineno} is not 'key = value': {raw.strip()!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        try:
            values[key] = float(val.strip())
        except ValueError:
            raise ValidationError(
                f"constants key {key!r} (line {lineno}) has non-numeric value {val.strip()!r}"
            ) from None
    return values


def load_constants(path: str | None = None) -> AtomData:
    """Load the constants file, or the packaged Cs-133 defaults when path is None."""
    if path is None:
        text = (
            importlib.resources.files("rydeit.data")
            .joinpath("cs133_constants.txt")
            .read_text(encoding="utf-8")
        )
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return AtomData(parse_constants_text(text))


def _check_n(n: int) -> None:
    if not isinstance(n, (int,)) or isinstance(n, bool):
        raise ValidationError(f"principal quantum number must be an integer, got {n!r}")
    if n < N_MIN:
        raise RangeError(f"n = {n} below supported minimum {N_MIN}")


def quantum_defect(series: RitzSeries, n: int) -> float:
    """Two-term Ritz defect delta(n) = delta0 + delta2/(n - delta0)^2."""
    _check_n(n)
    return series.delta0 + series.delta2 / (n - series.delta0) ** 2


def term_energy(series: RitzSeries, n: int) -> float:
    """Term energy -Ry/(n - delta(n))^2 in THz, negative below the ionization limit."""
    _check_n(n)
    n_eff = n - quantum_defect(series, n)
    return -series.rydberg_const / n_eff**2


def fine_structure_splitting(atom: AtomData, n: int) -> float:
    """nD5/2 - nD3/2 interval in MHz; positive, decreasing with n."""
    _check_n(n)
    e_hi = term_energy(atom.ritz("D5/2"), n)
    e_lo = term_energy(atom.ritz("D3/2"), n)
    return (e_hi - e_lo) * 1e6
