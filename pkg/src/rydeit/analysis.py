"""Inverse pipeline: detection, fitting, calibration, splitting extraction.

Turns a synthesized (or measured) coupling-scan trace back into physical
intervals: find transparency peaks, fit line shapes, calibrate the scan axis
against RF sideband spacings, match peaks to predicted pathways, and report
hyperfine and fine-structure splittings against theory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks

from .atomdata import AtomData, fine_structure_splitting
from .errors import (
    AssignmentError,
    CalibrationError,
    FitError,
    GeometryError,
    ValidationError,
)
from .ladder import LadderSystem
from .spectrum import SpectrumTrace

MODEL_LORENTZIAN = "lorentzian"
MODEL_GAUSSIAN = "gaussian"
FIT_MODELS = (MODEL_LORENTZIAN, MODEL_GAUSSIAN)

KIND_HYPERFINE = "hyperfine"
KIND_FINE_STRUCTURE = "fine_structure"

_GAUSS_FWHM_PER_SIGMA = 2.3548200450309493

DEFAULT_FIT_HALF_WINDOW = 30.0
DEFAULT_INITIAL_HALF_WIDTH = 5.0


@dataclass(frozen=True)
class PeakFit:
    """Converged line-shape fit of one transparency peak."""

    center: float
    fwhm: float
    amplitude: float
    baseline: float
    model: str
    rms_residual: float
    covariance_diag: tuple
    window: tuple

    def __post_init__(self):
        if self.model not in FIT_MODELS:
            raise ValidationError(f"model must be one of {FIT_MODELS}")
        if self.fwhm <= 0:
            raise ValidationError("fwhm must be positive")
        if self.rms_residual < 0:
            raise ValidationError("rms_residual must be non-negative")
        lo, hi = self.window
        if not lo <= self.center <= hi:
            raise ValidationError("fitted center lies outside the fit window")


@dataclass(frozen=True)
class CalibrationModel:
    """Polynomial map from scan units to MHz, anchored at the scan origin.

    mhz(s) = b1*s + b2*s^2 + b3*s^3 (no constant term: only spacings, never
    absolute frequencies, are physical on this axis). Strictly monotone over
    the validity window.
    """

    coefficients: tuple
    validity_window: tuple
    residual_mhz: float

    def __post_init__(self):
        if not 1 <= len(self.coefficients) <= 3:
            raise ValidationError("calibration needs 1 to 3 coefficients")
        if not np.isfinite(self.residual_mhz):
            raise ValidationError("calibration residual must be finite")

    def map_to_mhz(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for power, b in enumerate(self.coefficients, start=1):
            out += b * s**power
        return out[()] if out.ndim == 0 else out

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for power, b in enumerate(self.coefficients, start=1):
            out += power * b * s ** (power - 1)
        return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class SplittingRecord:
    """One measured-vs-theory interval."""

    n: int
    kind: str
    label: str
    measured_mhz: float
    theory_mhz: float
    percent_bias: float
    flag: str = ""

    def __post_init__(self):
        if self.kind not in (KIND_HYPERFINE, KIND_FINE_STRUCTURE):
            raise ValidationError(f"unknown record kind {self.kind!r}")
        if not np.isfinite(self.percent_bias):
            raise ValidationError("percent_bias must be finite")


@dataclass(frozen=True)
class SplittingReport:
    """Collection of interval records plus run-level notes."""

    records: tuple
    notes: tuple = ()

    def by_kind(self, kind: str):
        return tuple(r for r in self.records if r.kind == kind)


def detect_peaks(
    trace: SpectrumTrace,
    prominence: float,
    min_separation: float,
    background_margin: float = 1.0,
    smoothing_window: float = 40.0,
):
    """Ordered candidate peak centers on the trace axis.

    Local maxima of transmission with topographic prominence >= prominence
    and mutual separation >= min_separation. A flat-background gate rejects
    bumps sitting below the EIT-free absorption floor: the background level
    is taken from the trace edges (the spectrum far from all peaks is flat
    in this model) and maxima whose height falls short of it by more than
    background_margin times their own prominence are discarded. That removes
    saddle maxima formed between overlapping absorption-dip wings, which are
    genuine local maxima but not transparency peaks.

    Prominence is measured within a window of smoothing_window axis units so
    closely spaced structures do not suppress each other. Returns an array
    ordered by axis position; empty output is a valid result.
    """
    if prominence <= 0:
        raise ValidationError("prominence must be positive")
    if min_separation < 0:
        raise ValidationError("min_separation must be non-negative")
    x = trace.scan_coordinate
    y = trace.transmission
    step = float(np.median(np.diff(x)))
    wlen = max(3, int(round(smoothing_window / step)) | 1)
    distance = max(1, int(round(min_separation / step)))
    idx, props = find_peaks(y, prominence=prominence, distance=distance, wlen=wlen)
    if len(idx) == 0:
        return np.asarray([])
    edge = max(5, len(y) // 100)
    background = max(float(np.median(y[:edge])), float(np.median(y[-edge:])))
    keep = y[idx] - background >= -background_margin * props["prominences"]
    return x[idx[keep]]


def peak_heights(trace: SpectrumTrace, centers):
    """Transmission height at each candidate center (linear interpolation)."""
    return np.interp(
        np.asarray(centers, dtype=float), trace.scan_coordinate, trace.transmission
    )


def _lorentzian_residual(params, x, y, x_ref):
    b0, b1, amp, c, hw = params
    return b0 + b1 * (x - x_ref) + amp * hw**2 / ((x - c) ** 2 + hw**2) - y


def _gaussian_residual(params, x, y, x_ref):
    b0, b1, amp, c, sigma = params
    return b0 + b1 * (x - x_ref) + amp * np.exp(-((x - c) ** 2) / (2.0 * sigma**2)) - y


def fit_peak(
    trace: SpectrumTrace,
    window,
    model: str = MODEL_LORENTZIAN,
    initial_half_width: float = DEFAULT_INITIAL_HALF_WIDTH,
) -> PeakFit:
    """Least-squares line-shape fit inside one axis window.

    Model: locally linear baseline plus a Lorentzian (default) or Gaussian
    peak. Initialized at the window median baseline, zero slope, peak height
    max-minus-median at the window center, half width initial_half_width.
    Converges when the relative parameter step drops below 1e-8 (within 200
    iterations); deterministic for identical inputs.
    """
    if model not in FIT_MODELS:
        raise ValidationError(f"model must be one of {FIT_MODELS}")
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ValidationError("fit window must satisfy lo < hi")
    mask = (trace.scan_coordinate >= lo) & (trace.scan_coordinate <= hi)
    x = trace.scan_coordinate[mask]
    y = trace.transmission[mask]
    if len(x) < 9:
        raise ValidationError(
            f"fit window [{lo:.2f}, {hi:.2f}] contains {len(x)} samples; need >= 9"
        )
    imax = int(np.argmax(y))
    if imax in (0, len(y) - 1):
        raise GeometryError(
            f"fit window [{lo:.2f}, {hi:.2f}] has no interior maximum"
        )

    x_ref = 0.5 * (lo + hi)
    baseline0 = float(np.median(y))
    width0 = (
        initial_half_width
        if model == MODEL_LORENTZIAN
        else initial_half_width * 2.0 / _GAUSS_FWHM_PER_SIGMA
    )
    p0 = [baseline0, 0.0, float(y.max() - baseline0), x_ref, width0]
    residual = (
        _lorentzian_residual if model == MODEL_LORENTZIAN else _gaussian_residual
    )
    result = least_squares(
        residual, p0, args=(x, y, x_ref), xtol=1e-10, max_nfev=1200
    )
    if not result.success:
        raise FitError(
            f"peak fit did not converge in window [{lo:.2f}, {hi:.2f}]",
            last_params=tuple(result.x),
        )
    b0, b1, amp, center, width = result.x
    width = abs(width)
    fwhm = 2.0 * width if model == MODEL_LORENTZIAN else _GAUSS_FWHM_PER_SIGMA * width
    if not lo <= center <= hi:
        raise GeometryError(
            f"fitted center {center:.2f} escaped the window [{lo:.2f}, {hi:.2f}]"
        )

    n_pts, n_par = len(x), 5
    rms = float(np.sqrt(np.mean(result.fun**2)))
    jtj = result.jac.T @ result.jac
    scale = 2.0 * result.cost / max(n_pts - n_par, 1)
    try:
        cov_diag = tuple(np.diag(scale * np.linalg.pinv(jtj)))
    except np.linalg.LinAlgError:
        cov_diag = tuple(np.full(n_par, np.nan))
    return PeakFit(
        center=float(center),
        fwhm=float(fwhm),
        amplitude=float(amp),
        baseline=float(b0),
        model=model,
        rms_residual=rms,
        covariance_diag=cov_diag,
        window=(lo, hi),
    )


def pair_sidebands(
    candidates,
    rf_frequency: float,
    nominal_scale: float = 1.0,
    tolerance: float = 0.2,
):
    """Candidate pairs separated by one RF spacing on the scan axis.

    Returns (s_low, s_high) pairs whose separation is within +/- tolerance
    (fractional) of rf_frequency * nominal_scale; nominal_scale is the
    approximate scan-units-per-MHz slope (1 for an undistorted axis). Each
    pair constrains the calibration by mapped spacing = rf_frequency.
    """
    if rf_frequency <= 0:
        raise ValidationError("rf_frequency must be positive")
    if not 0 < tolerance < 1:
        raise ValidationError("tolerance must be in (0, 1)")
    s = np.sort(np.asarray(candidates, dtype=float))
    target = rf_frequency * nominal_scale
    pairs = []
    for i in range(len(s)):
        for j in range(i + 1, len(s)):
            gap = s[j] - s[i]
            if abs(gap - target) <= tolerance * target:
                pairs.append((float(s[i]), float(s[j])))
    return pairs


def calibrate_axis(
    candidates,
    rf_frequency: float,
    degree: int = 3,
    nominal_scale: float = 1.0,
    pairing_tolerance: float = 0.2,
) -> CalibrationModel:
    """Scan-to-MHz polynomial from RF sideband spacings.

    Every candidate pair separated by one sideband spacing contributes one
    linear condition mapped(s_hi) - mapped(s_lo) = rf_frequency; the degree
    coefficients (no constant term) are the least-squares solution. Needs at
    least degree+1 pairs; the result must be strictly monotone over the
    candidate span.
    """
    if not 1 <= degree <= 3:
        raise ValidationError("calibration degree must be 1, 2 or 3")
    pairs = pair_sidebands(candidates, rf_frequency, nominal_scale, pairing_tolerance)
    if len(pairs) < degree + 1:
        raise CalibrationError(
            f"underdetermined calibration: {len(pairs)} sideband pairs found, "
            f"need >= {degree + 1} for degree {degree}"
        )
    rows = np.asarray(
        [
            [s_hi**p - s_lo**p for p in range(1, degree + 1)]
            for (s_lo, s_hi) in pairs
        ]
    )
    rhs = np.full(len(pairs), rf_frequency)
    coeffs, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    residual = float(np.sqrt(np.mean((rows @ coeffs - rhs) ** 2)))

    s_all = np.asarray(candidates, dtype=float)
    window = (float(s_all.min()), float(s_all.max()))
    model = CalibrationModel(
        coefficients=tuple(float(c) for c in coeffs),
        validity_window=window,
        residual_mhz=residual,
    )
    probes = np.concatenate(
        [np.asarray([window[0], 0.5 * (window[0] + window[1]), window[1]]), s_all]
    )
    if np.any(model.derivative(probes) <= 0):
        raise CalibrationError("calibration polynomial is not monotone over window")
    return model


def apply_calibration(trace: SpectrumTrace, model: CalibrationModel) -> SpectrumTrace:
    """Trace with the scan axis mapped to MHz through the calibration."""
    mapped = model.map_to_mhz(trace.scan_coordinate)
    if not np.all(np.diff(mapped) > 0):
        raise CalibrationError("calibrated axis is not strictly increasing")
    return SpectrumTrace(
        scan_coordinate=mapped,
        transmission=trace.transmission,
        axis_kind="calibrated_mhz",
        metadata={
            **trace.metadata,
            "calibration_coefficients": ",".join(
                f"{c:.17g}" for c in model.coefficients
            ),
            "calibration_residual_mhz": f"{model.residual_mhz:.17g}",
        },
    )


def filter_sideband_satellites(
    centers,
    heights,
    rf_frequency: float,
    tolerance: float = 0.2,
):
    """Drop sideband satellites, keeping carriers.

    A candidate is a satellite when another candidate one RF spacing away
    (within fractional tolerance) has greater peak height; first-order
    Bessel weighting guarantees satellites are weaker than their carrier for
    modulation indices below the first Bessel crossing.
    """
    centers = np.asarray(centers, dtype=float)
    heights = np.asarray(heights, dtype=float)
    if len(centers) != len(heights):
        raise ValidationError("centers and heights must have equal length")
    keep = np.ones(len(centers), dtype=bool)
    for i, c in enumerate(centers):
        for j, other in enumerate(centers):
            if i == j:
                continue
            if abs(abs(c - other) - rf_frequency) <= tolerance * rf_frequency:
                if heights[j] > heights[i]:
                    keep[i] = False
                    break
    return centers[keep]


ASSIGNMENT_GATE_LINEWIDTHS = 3.0


def assign_to_pathways(
    centers_mhz,
    pathways,
    linewidth_mhz: float,
    gate_linewidths: float = ASSIGNMENT_GATE_LINEWIDTHS,
):
    """Match measured peak centers to predicted pathways by nearest position.

    Returns (assignments, merged) where assignments is a list of
    (pathway, center) for every pathway whose nearest measured center lies
    within the gate, and merged lists pathway pairs claiming the same
    measured center (unresolved overlap). A measured center with no
    prediction within gate_linewidths * linewidth_mhz is an orphan and
    raises AssignmentError listing it.
    """
    centers = np.asarray(centers_mhz, dtype=float)
    pathways = tuple(pathways)
    if len(centers) == 0:
        raise AssignmentError("no measured centers to assign")
    gate = gate_linewidths * linewidth_mhz
    predicted = np.asarray([p.peak_position for p in pathways])

    orphans = [
        float(c) for c in centers if np.min(np.abs(predicted - c)) > gate
    ]
    if orphans:
        raise AssignmentError(
            f"{len(orphans)} measured peak(s) have no predicted pathway within "
            f"{gate:.1f} MHz",
            orphans=orphans,
        )

    claimed = {}
    assignments = []
    for p, pos in zip(pathways, predicted):
        k = int(np.argmin(np.abs(centers - pos)))
        if abs(centers[k] - pos) > gate:
            continue
        claimed.setdefault(k, []).append(p)
        assignments.append((p, float(centers[k])))

    merged = []
    for k, claimants in sorted(claimed.items()):
        if len(claimants) > 1:
            for a in range(len(claimants)):
                for b in range(a + 1, len(claimants)):
                    merged.append((claimants[a], claimants[b]))
    return assignments, merged


def extract_splittings(
    assignments,
    atom: AtomData,
    sys: LadderSystem,
    merged=(),
) -> SplittingReport:
    """Physical intervals from assigned peak centers, with theory comparison.

    Intermediate-state (hyperfine) intervals are on-axis spacings divided by
    the Doppler-mismatch slope magnitude |1 - lambda_p/lambda_c|;
    fine-structure intervals map with slope 1 and are reported as-is.
    Records involving a merged (unresolved) pathway carry a "merged" flag.
    """
    assignments = tuple(assignments)
    if not assignments:
        raise ValidationError("no assignments to extract splittings from")
    slope = abs(sys.doppler_mismatch_slope)
    if slope == 0:
        raise ValidationError("zero Doppler-mismatch slope; hyperfine unmappable")

    merged_ids = set()
    for a, b in merged:
        merged_ids.add((a.f_intermediate, a.series))
        merged_ids.add((b.f_intermediate, b.series))

    by_key = {(p.f_intermediate, p.series): (p, c) for p, c in assignments}
    records = []
    n_value = assignments[0][0].n

    series_present = sorted({p.series for p, _ in assignments})
    for series in series_present:
        for f_hi, f_lo in ((5, 4), (4, 3)):
            key_hi, key_lo = (f_hi, series), (f_lo, series)
            if key_hi not in by_key or key_lo not in by_key:
                continue
            c_hi, c_lo = by_key[key_hi][1], by_key[key_lo][1]
            measured = (c_hi - c_lo) / slope
            theory = atom.hyperfine.interval(f_hi, f_lo)
            flag = "merged" if key_hi in merged_ids or key_lo in merged_ids else ""
            records.append(
                SplittingRecord(
                    n=n_value,
                    kind=KIND_HYPERFINE,
                    label=f"F{f_hi}-F{f_lo}:{series}",
                    measured_mhz=float(measured),
                    theory_mhz=float(theory),
                    percent_bias=100.0 * (measured - theory) / theory,
                    flag=flag,
                )
            )

    if "D5/2" in series_present and "D3/2" in series_present:
        for f in (5, 4, 3):
            key_hi, key_lo = (f, "D5/2"), (f, "D3/2")
            if key_hi not in by_key or key_lo not in by_key:
                continue
            measured = by_key[key_hi][1] - by_key[key_lo][1]
            theory = fine_structure_splitting(atom, n_value)
            flag = "merged" if key_hi in merged_ids or key_lo in merged_ids else ""
            records.append(
                SplittingRecord(
                    n=n_value,
                    kind=KIND_FINE_STRUCTURE,
                    label=f"D5/2-D3/2:F{f}",
                    measured_mhz=float(measured),
                    theory_mhz=float(theory),
                    percent_bias=100.0 * (measured - theory) / theory,
                    flag=flag,
                )
            )

    notes = []
    if merged:
        labels = "; ".join(
            f"F{a.f_intermediate}:{a.series} with F{b.f_intermediate}:{b.series}"
            for a, b in merged
        )
        notes.append(f"unresolved overlap at n={n_value}: {labels}")
    return SplittingReport(records=tuple(records), notes=tuple(notes))


def fs_scaling_fit(n_values, intervals_mhz, delta0: float):
    """One-parameter fit of intervals to A * (n - delta0)^-3.

    Returns (A, max relative residual). The cube-law scaling of Rydberg
    fine-structure intervals is the cross-n consistency check of the
    extraction pipeline.
    """
    n_values = np.asarray(n_values, dtype=float)
    y = np.asarray(intervals_mhz, dtype=float)
    if len(n_values) != len(y) or len(y) < 2:
        raise ValidationError("need >= 2 (n, interval) samples")
    x = (n_values - delta0) ** -3.0
    a = float(np.dot(x, y) / np.dot(x, x))
    rel = np.abs(a * x - y) / np.abs(y)
    return a, float(rel.max())


def merge_reports(reports) -> SplittingReport:
    """Single report over an n sweep, records sorted by (n, kind, label)."""
    records = []
    notes = []
    for rep in reports:
        records.extend(rep.records)
        notes.extend(rep.notes)
    records.sort(key=lambda r: (r.n, r.kind, r.label))
    return SplittingReport(records=tuple(records), notes=tuple(notes))


def format_splitting_report(report: SplittingReport) -> str:
    """Documented one-record-per-line text rendering of a report."""
    lines = [
        "# columns: n kind label measured_mhz theory_mhz percent_bias flag",
    ]
    for note in report.notes:
        lines.append(f"# note: {note}")
    for r in report.records:
        flag = r.flag if r.flag else "-"
        lines.append(
            f"{r.n} {r.kind} {r.label} "
            f"{r.measured_mhz:.6f} {r.theory_mhz:.6f} {r.percent_bias:+.4f} {flag}"
        )
    return "\n".join(lines) + "\n"


def report_summary_json(report: SplittingReport) -> str:
    """Machine-readable JSON rendering with frozen field names."""
    payload = {
        "records": [
            {
                "n": r.n,
                "kind": r.kind,
                "label": r.label,
                "measured_mhz": r.measured_mhz,
                "theory_mhz": r.theory_mhz,
                "percent_bias": r.percent_bias,
                "flag": r.flag,
            }
            for r in report.records
        ],
        "notes": list(report.notes),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def save_report(path, report: SplittingReport) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_splitting_report(report))


def save_report_json(path, report: SplittingReport) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report_summary_json(report))
