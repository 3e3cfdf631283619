"""Forward synthesis of coupling-scan transmission traces.

A trace is the incoherent sum of Doppler-averaged pathway absorptions,
converted to transmission through Beer-Lambert, optionally convolved with RF
modulation sidebands and reparameterized by a polynomial scan distortion.
Traces serialize to a comma-separated text format with `# key=value` header
lines; that format is the bit-exact contract between synthesis, analysis and
the command line.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import jv

from .doppler import QuadratureSpec, ThermalEnsemble, averaged_absorption_profile
from .errors import (
    DistortionError,
    FileFormatError,
    ValidationError,
    WindowError,
)
from .ladder import LadderSystem, optical_depth_factor
from .velocitymap import AXIS_CONVENTION

AXIS_CALIBRATED_MHZ = "calibrated_mhz"
AXIS_RAW_SCAN_UNITS = "raw_scan_units"
AXIS_KINDS = (AXIS_CALIBRATED_MHZ, AXIS_RAW_SCAN_UNITS)

_TRANSMISSION_FLOOR = 1e-12


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class SpectrumTrace:
    """Immutable sampled transmission spectrum plus provenance metadata."""

    scan_coordinate: np.ndarray
    transmission: np.ndarray
    axis_kind: str = AXIS_CALIBRATED_MHZ
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "scan_coordinate", _frozen_array(self.scan_coordinate)
        )
        object.__setattr__(self, "transmission", _frozen_array(self.transmission))
        if self.axis_kind not in AXIS_KINDS:
            raise ValidationError(
                f"axis_kind must be one of {AXIS_KINDS}, got {self.axis_kind!r}"
            )
        if self.scan_coordinate.ndim != 1 or self.transmission.ndim != 1:
            raise ValidationError("trace arrays must be one-dimensional")
        if len(self.scan_coordinate) != len(self.transmission):
            raise ValidationError("trace arrays must have equal length")
        if len(self.scan_coordinate) < 2:
            raise ValidationError("trace needs at least 2 samples")
        if not np.all(np.diff(self.scan_coordinate) > 0):
            raise ValidationError("scan_coordinate must be strictly increasing")
        if np.any(self.transmission <= 0) or np.any(self.transmission > 1):
            raise ValidationError("transmission must lie in (0, 1]")

    def with_metadata(self, **entries) -> "SpectrumTrace":
        """Copy of the trace with additional metadata entries."""
        merged = dict(self.metadata)
        merged.update({k: str(v) for k, v in entries.items()})
        return SpectrumTrace(
            scan_coordinate=self.scan_coordinate,
            transmission=self.transmission,
            axis_kind=self.axis_kind,
            metadata=merged,
        )

    def optical_depth(self) -> np.ndarray:
        """-ln(transmission); the additive representation of the signal."""
        return -np.log(self.transmission)


@dataclass(frozen=True)
class SidebandSpec:
    """RF phase-modulation sidebands: frequency, modulation index, order cap."""

    rf_frequency: float = 50.0
    modulation_index: float = 0.5
    max_order: int = 1

    def __post_init__(self):
        if self.rf_frequency <= 0:
            raise ValidationError("rf_frequency must be positive")
        if self.modulation_index < 0:
            raise ValidationError("modulation_index must be non-negative")
        if not isinstance(self.max_order, (int, np.integer)) or isinstance(
            self.max_order, bool
        ):
            raise ValidationError("max_order must be an integer")
        if self.max_order < 0:
            raise ValidationError("max_order must be >= 0")

    def order_weights(self):
        """(order, squared-Bessel weight) for k = -max_order .. +max_order."""
        ks = np.arange(-self.max_order, self.max_order + 1)
        return ks, jv(ks, self.modulation_index) ** 2


@dataclass(frozen=True)
class ScanDistortion:
    """Polynomial map from true frequency f to scan coordinate s.

    s(f) = c1*f + c2*f^2 + c3*f^3 with c1 > 0; must stay strictly monotone
    over any window it is applied to.
    """

    c1: float = 1.0
    c2: float = 0.0
    c3: float = 0.0

    def __post_init__(self):
        if self.c1 <= 0:
            raise ValidationError("distortion c1 must be positive")

    def scan_coordinate(self, f):
        f = np.asarray(f, dtype=float)
        out = self.c1 * f + self.c2 * f**2 + self.c3 * f**3
        return out[()] if out.ndim == 0 else out

    def derivative(self, f):
        f = np.asarray(f, dtype=float)
        out = self.c1 + 2.0 * self.c2 * f + 3.0 * self.c3 * f**2
        return out[()] if out.ndim == 0 else out

    def check_monotone(self, f_lo: float, f_hi: float) -> None:
        """Monotonicity probe at window endpoints and midpoint."""
        probes = (f_lo, 0.5 * (f_lo + f_hi), f_hi)
        for f in probes:
            if self.derivative(f) <= 0:
                raise DistortionError(
                    f"distortion not monotone over window: derivative "
                    f"{self.derivative(f):.3e} at f = {f:.3f}"
                )


def synthesize_trace(
    grid,
    pathways,
    sys: LadderSystem,
    ens: ThermalEnsemble,
    quad: QuadratureSpec,
    cell_length_mm: float,
    extra_metadata=None,
) -> SpectrumTrace:
    """Coupling-scan transmission trace from a pathway set.

    For each pathway the hyperfine offset enters the velocity integral as a
    probe-detuning shift and the Rydberg offset as a coupling-detuning
    shift; the Doppler average then selects the resonant velocity class and
    applies its thermal suppression by itself, so the line shape and the
    relative pathway intensities both come from the ladder kernel. Only the
    explicit per-pathway strength factor scales each term (the reported
    pathway weight would double-count the thermal factor). Summation is
    incoherent (no interference between velocity classes); transparency
    maxima land within half a grid step of each pathway's predicted position
    when resolved.

    The grid must cover every requested pathway by at least 1.5 two-level
    linewidths on each side, so each peak has at least 3 linewidths of
    usable span around it.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ValidationError("grid must be a 1-D array with >= 2 points")
    if not np.all(np.diff(grid) > 0):
        raise ValidationError("grid must be strictly increasing")
    pathways = tuple(pathways)
    if not pathways:
        raise ValidationError("pathway set must be non-empty")

    linewidth = 2.0 * sys.gamma_21
    margin = 1.5 * linewidth
    for p in pathways:
        if grid[0] > p.peak_position - margin or grid[-1] < p.peak_position + margin:
            raise ValidationError(
                f"grid spans < 3 linewidths around pathway at "
                f"{p.peak_position:.2f} MHz (need [{p.peak_position - margin:.2f}, "
                f"{p.peak_position + margin:.2f}] inside the grid)"
            )

    od = np.zeros(len(grid))
    for p in pathways:
        delta_p = -p.hfs_offset
        dc = grid - p.rydberg_offset + p.hfs_offset
        od += p.strength * averaged_absorption_profile(delta_p, dc, sys, ens, quad)
    od *= optical_depth_factor(cell_length_mm, sys.lambda_p_nm)

    metadata = {
        "axis_convention": AXIS_CONVENTION,
        "lambda_p_nm": str(sys.lambda_p_nm),
        "lambda_c_nm": str(sys.lambda_c_nm),
        "omega_c_rabi_mhz": str(sys.omega_c_rabi),
        "gamma_21_mhz": str(sys.gamma_21),
        "gamma_31_mhz": str(sys.gamma_31),
        "geometry": sys.geometry,
        "temperature_k": str(ens.temperature_k),
        "cell_length_mm": str(cell_length_mm),
        "quadrature_method": quad.method,
        "quadrature_points": str(quad.points),
        "pathway_count": str(len(pathways)),
        "pathway_n": ",".join(sorted({str(p.n) for p in pathways})),
        "pathway_series": ",".join(sorted({p.series for p in pathways})),
    }
    if extra_metadata:
        metadata.update({k: str(v) for k, v in extra_metadata.items()})
    return SpectrumTrace(
        scan_coordinate=grid,
        transmission=np.exp(-od),
        axis_kind=AXIS_CALIBRATED_MHZ,
        metadata=metadata,
    )


def apply_sidebands(trace: SpectrumTrace, sb: SidebandSpec) -> SpectrumTrace:
    """Carrier plus Bessel-weighted replicas of the optical response.

    The optical depth is resampled at +/- k * rf_frequency displacements for
    k up to max_order and summed with J_k(modulation_index)^2 weights;
    truncated high-order power is dropped. Zero modulation index returns the
    input signal unchanged. Works on the frequency-calibrated axis only.
    """
    if trace.axis_kind != AXIS_CALIBRATED_MHZ:
        raise ValidationError("apply_sidebands requires a calibrated_mhz axis")
    span = trace.scan_coordinate[-1] - trace.scan_coordinate[0]
    if sb.max_order * sb.rf_frequency >= span:
        raise WindowError(
            f"sideband displacement {sb.max_order * sb.rf_frequency:.1f} MHz "
            f"exceeds the {span:.1f} MHz grid span"
        )
    meta = {
        "sideband_rf_mhz": str(sb.rf_frequency),
        "sideband_modulation_index": str(sb.modulation_index),
        "sideband_max_order": str(sb.max_order),
    }
    if sb.modulation_index == 0.0 or sb.max_order == 0:
        return trace.with_metadata(**meta)

    x = trace.scan_coordinate
    od = trace.optical_depth()
    out = np.zeros_like(od)
    ks, weights = sb.order_weights()
    for k, w in zip(ks, weights):
        out += w * np.interp(x + k * sb.rf_frequency, x, od)
    return SpectrumTrace(
        scan_coordinate=x,
        transmission=np.exp(-out),
        axis_kind=AXIS_CALIBRATED_MHZ,
        metadata={**trace.metadata, **meta},
    )


def distort_axis(trace: SpectrumTrace, d: ScanDistortion) -> SpectrumTrace:
    """Reparameterize the axis with the scan-nonlinearity polynomial.

    Transmission values are untouched; only the sample positions change, and
    the axis is thereafter in raw scan units.
    """
    if trace.axis_kind != AXIS_CALIBRATED_MHZ:
        raise ValidationError("distort_axis requires a calibrated_mhz axis")
    f = trace.scan_coordinate
    d.check_monotone(float(f[0]), float(f[-1]))
    s = d.scan_coordinate(f)
    if not np.all(np.diff(s) > 0):
        raise DistortionError("distortion not monotone between sample points")
    return SpectrumTrace(
        scan_coordinate=s,
        transmission=trace.transmission,
        axis_kind=AXIS_RAW_SCAN_UNITS,
        metadata={
            **trace.metadata,
            "distortion_c1": str(d.c1),
            "distortion_c2": str(d.c2),
            "distortion_c3": str(d.c3),
        },
    )


def add_measurement_noise(trace: SpectrumTrace, rms: float, seed) -> SpectrumTrace:
    """Additive Gaussian transmission noise, seeded, clipped into (0, 1].

    Emulation hook for analysis robustness tests; deterministic for a fixed
    seed.
    """
    if rms < 0:
        raise ValidationError("noise rms must be non-negative")
    if rms == 0:
        return trace
    rng = np.random.default_rng(seed)
    noisy = trace.transmission + rng.normal(0.0, rms, size=len(trace.transmission))
    noisy = np.clip(noisy, _TRANSMISSION_FLOOR, 1.0)
    return SpectrumTrace(
        scan_coordinate=trace.scan_coordinate,
        transmission=noisy,
        axis_kind=trace.axis_kind,
        metadata={**trace.metadata, "noise_rms": str(rms), "noise_seed": str(seed)},
    )


def format_trace(trace: SpectrumTrace) -> str:
    """Serialize a trace to the documented comma-separated text format.

    Header lines are `# key=value` with axis_kind always present and keys
    sorted, then one `scan_coordinate,transmission` row per sample with
    full-precision floats; output is byte-stable for identical traces.
    """
    header = {"axis_kind": trace.axis_kind, **trace.metadata}
    lines = [f"# {key}={header[key]}" for key in sorted(header)]
    for x, t in zip(trace.scan_coordinate, trace.transmission):
        lines.append(f"{x:.17g},{t:.17g}")
    return "\n".join(lines) + "\n"


def parse_trace(text: str) -> SpectrumTrace:
    """Parse the trace text format; format violations carry line numbers."""
    metadata = {}
    xs, ts = [], []
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" not in body:
                raise FileFormatError(
                    "header line is not key=value", line_number=lineno
                )
            key, value = body.split("=", 1)
            key = key.strip()
            if not key:
                raise FileFormatError("empty header key", line_number=lineno)
            metadata[key] = value.strip()
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise FileFormatError(
                f"expected 2 comma-separated columns, got {len(parts)}",
                line_number=lineno,
            )
        try:
            xs.append(float(parts[0]))
            ts.append(float(parts[1]))
        except ValueError as exc:
            raise FileFormatError(str(exc), line_number=lineno) from exc
    axis_kind = metadata.pop("axis_kind", None)
    if axis_kind is None:
        raise FileFormatError("missing axis_kind header")
    if len(xs) < 2:
        raise FileFormatError("trace needs at least 2 data rows")
    try:
        return SpectrumTrace(
            scan_coordinate=np.asarray(xs),
            transmission=np.asarray(ts),
            axis_kind=axis_kind,
            metadata=metadata,
        )
    except ValidationError as exc:
        raise FileFormatError(str(exc)) from exc


def save_trace(path, trace: SpectrumTrace) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_trace(trace))


def load_trace(path) -> SpectrumTrace:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace(fh.read())
