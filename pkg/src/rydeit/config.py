"""Run configuration: one documented key=value file drives every command.

All keys have defaults, unknown keys are rejected by name, and the resolved
configuration renders to canonical text whose digest stamps every output
file, so a run is reproducible from its outputs alone.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

from .atomdata import AtomData, load_constants
from .doppler import (
    QUADRATURE_METHODS,
    QuadratureSpec,
    ThermalEnsemble,
    WIDTH_CONVENTIONS,
)
from .errors import FileFormatError, ValidationError
from .ladder import GEOMETRIES, LadderSystem
from .spectrum import ScanDistortion, SidebandSpec
from .velocitymap import F_LEVELS

_S_GRID_MHZ = (-400.0, 100.0)
_D_GRID_MHZ = (-450.0, 150.0)


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_int_list(raw: str):
    return tuple(int(part) for part in raw.split(",") if part.strip())


def _parse_str_list(raw: str):
    return tuple(part.strip() for part in raw.split(",") if part.strip())


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run parameters; every field has a documented default."""

    constants_path: str = ""
    lambda_p_nm: float = 852.0
    lambda_c_nm: float = 509.0
    omega_p_rabi: float = 0.026
    omega_c_rabi: float = 10.0
    gamma_21_mhz: float = 2.6
    gamma_31_mhz: float = 0.1
    g_21: float = 1.0
    amplitude_scale: float = 6.0e-4
    geometry: str = "counter_propagating"
    temperature_k: float = 293.15
    velocity_width_convention: str = "sqrt_kT_over_m"
    cell_length_mm: float = 10.0
    n: int = 43
    n_stop: int = 0
    series: tuple = ("S1/2",)
    f_levels: tuple = (3, 4, 5)
    strength_f3: float = 1.0
    strength_f4: float = 1.0
    strength_f5: float = 1.0
    grid_start_mhz: float = float("nan")
    grid_stop_mhz: float = float("nan")
    grid_points: int = 2001
    quadrature_method: str = "fixed_trapezoid"
    quadrature_span: float = 5.0
    quadrature_points: int = 16001
    quadrature_rel_tol: float = 1e-8
    sideband_enabled: bool = False
    sideband_rf_mhz: float = 50.0
    sideband_modulation_index: float = 0.5
    sideband_max_order: int = 1
    distortion_enabled: bool = False
    distortion_c1: float = 1.0
    distortion_c2: float = 0.0
    distortion_c3: float = 0.0
    noise_rms: float = 0.0
    seed: int = 12345
    detect_prominence: float = 2.0e-5
    detect_min_separation_mhz: float = 5.0
    fit_half_window_mhz: float = 30.0
    calibration_degree: int = 3
    calibrate_prominence: float = 1.0e-3
    calibrate_half_window_mhz: float = 20.0
    max_scan_span_mhz: float = 5000.0
    output_dir: str = "runs"

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ValidationError(
                f"config key 'geometry' must be one of {GEOMETRIES}"
            )
        if self.velocity_width_convention not in WIDTH_CONVENTIONS:
            raise ValidationError(
                "config key 'velocity_width_convention' must be one of "
                f"{WIDTH_CONVENTIONS}"
            )
        if self.quadrature_method not in QUADRATURE_METHODS:
            raise ValidationError(
                f"config key 'quadrature_method' must be one of "
                f"{QUADRATURE_METHODS}"
            )
        if not self.series:
            raise ValidationError("config key 'series' must not be empty")
        if not self.f_levels:
            raise ValidationError("config key 'f_levels' must not be empty")
        for f in self.f_levels:
            if f not in F_LEVELS:
                raise ValidationError(
                    f"config key 'f_levels' entries must be among {F_LEVELS}"
                )
        if self.grid_points < 2:
            raise ValidationError("config key 'grid_points' must be >= 2")
        if self.noise_rms < 0:
            raise ValidationError("config key 'noise_rms' must be >= 0")
        if self.detect_prominence <= 0:
            raise ValidationError("config key 'detect_prominence' must be > 0")
        if self.fit_half_window_mhz <= 0:
            raise ValidationError("config key 'fit_half_window_mhz' must be > 0")
        if not 1 <= self.calibration_degree <= 3:
            raise ValidationError(
                "config key 'calibration_degree' must be 1, 2 or 3"
            )
        if self.calibrate_prominence <= 0:
            raise ValidationError(
                "config key 'calibrate_prominence' must be > 0"
            )
        if self.calibrate_half_window_mhz <= 0:
            raise ValidationError(
                "config key 'calibrate_half_window_mhz' must be > 0"
            )
        if self.max_scan_span_mhz <= 0:
            raise ValidationError(
                "config key 'max_scan_span_mhz' must be > 0"
            )

    # -- construction ------------------------------------------------------

    @classmethod
    def field_names(cls):
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_mapping(cls, mapping) -> "RunConfig":
        """Build from a {key: raw string} mapping, rejecting unknown keys."""
        known = set(cls.field_names())
        values = {}
        for key, raw in mapping.items():
            if key not in known:
                raise ValidationError(f"unknown config key {key!r}")
            try:
                values[key] = _convert(cls, key, raw)
            except (ValueError, TypeError) as exc:
                raise ValidationError(
                    f"config key {key!r}: bad value {raw!r} ({exc})"
                ) from exc
        return cls(**values)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls.from_mapping(parse_config_text(text))

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def replace(self, **overrides) -> "RunConfig":
        """Copy with the given fields replaced (command-line flags win)."""
        values = {name: getattr(self, name) for name in self.field_names()}
        for key, value in overrides.items():
            if key not in values:
                raise ValidationError(f"unknown config key {key!r}")
            values[key] = value
        return RunConfig(**values)

    # -- rendering ---------------------------------------------------------

    def to_text(self) -> str:
        """Canonical key=value rendering; sorted keys, full float precision."""
        lines = []
        for name in sorted(self.field_names()):
            value = getattr(self, name)
            if isinstance(value, tuple):
                rendered = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                rendered = "true" if value else "false"
            elif isinstance(value, float):
                rendered = f"{value:.17g}"
            else:
                rendered = str(value)
            lines.append(f"{name} = {rendered}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        """Short stable hash of the resolved configuration."""
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]

    # -- derived objects ---------------------------------------------------

    def ladder_system(self) -> LadderSystem:
        return LadderSystem(
            lambda_p_nm=self.lambda_p_nm,
            lambda_c_nm=self.lambda_c_nm,
            omega_p_rabi=self.omega_p_rabi,
            omega_c_rabi=self.omega_c_rabi,
            gamma_21=self.gamma_21_mhz,
            gamma_31=self.gamma_31_mhz,
            g_21=self.g_21,
            amplitude_scale=self.amplitude_scale,
            geometry=self.geometry,
        )

    def ensemble(self, atom: AtomData | None = None) -> ThermalEnsemble:
        mass = atom.mass_kg if atom is not None else ThermalEnsemble.mass_kg
        return ThermalEnsemble(
            temperature_k=self.temperature_k,
            mass_kg=mass,
            velocity_width_convention=self.velocity_width_convention,
        )

    def quadrature(self) -> QuadratureSpec:
        return QuadratureSpec(
            method=self.quadrature_method,
            span=self.quadrature_span,
            points=self.quadrature_points,
            rel_tol=self.quadrature_rel_tol,
        )

    def sideband(self) -> SidebandSpec:
        return SidebandSpec(
            rf_frequency=self.sideband_rf_mhz,
            modulation_index=self.sideband_modulation_index,
            max_order=self.sideband_max_order,
        )

    def distortion(self) -> ScanDistortion:
        return ScanDistortion(
            c1=self.distortion_c1, c2=self.distortion_c2, c3=self.distortion_c3
        )

    def atom(self) -> AtomData:
        return load_constants(self.constants_path or None)

    def strength_factors(self):
        return {3: self.strength_f3, 4: self.strength_f4, 5: self.strength_f5}

    def base_grid_bounds(self):
        """Configured scan window, or the series-dependent default."""
        import math

        if not (
            math.isnan(self.grid_start_mhz) or math.isnan(self.grid_stop_mhz)
        ):
            if self.grid_start_mhz >= self.grid_stop_mhz:
                raise ValidationError(
                    "config keys 'grid_start_mhz'/'grid_stop_mhz' must satisfy "
                    "start < stop"
                )
            return self.grid_start_mhz, self.grid_stop_mhz
        if any(label.startswith("D") for label in self.series):
            return _D_GRID_MHZ
        return _S_GRID_MHZ


def _convert(cls, key: str, raw):
    """Parse a raw config string into the field's declared type."""
    if not isinstance(raw, str):
        return raw
    hints = {f.name: f.type for f in fields(cls)}
    hint = hints[key]
    raw = raw.strip()
    if hint == "bool":
        return _parse_bool(raw)
    if hint == "int":
        return int(raw)
    if hint == "float":
        return float(raw)
    if hint == "tuple":
        if key == "f_levels":
            return _parse_int_list(raw)
        return _parse_str_list(raw)
    return raw


def parse_config_text(text: str) -> dict:
    """Parse 'key = value' lines into a raw-string mapping.

    '#' starts a comment, blank lines are ignored, duplicate keys are a
    format error (silent override would hide typos).
    """
    mapping = {}
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FileFormatError("expected 'key = value'", line_number=lineno)
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise FileFormatError("empty config key", line_number=lineno)
        if key in mapping:
            raise FileFormatError(
                f"duplicate config key {key!r}", line_number=lineno
            )
        mapping[key] = value.strip()
    return mapping
