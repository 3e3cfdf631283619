"""Velocity-selection algebra for hyperfine excitation pathways.

A probe locked to the strongest intermediate-state resonance still excites
the other hyperfine components, through velocity classes whose Doppler shift
bridges the hyperfine interval. Each (intermediate F', Rydberg component)
pair is one excitation pathway with a resonant velocity class, a peak
position on the coupling-scan axis, and a thermal-population weight. This
module computes those, builds pathway sets for the synthesizer, and
serializes them to a small tabular text format.

Sign conventions, fixed package-wide and flagged in all outputs:

* velocity is positive along probe propagation;
* the coupling-detuning axis increases with coupling laser frequency;
* with the probe wavelength longer than the coupling wavelength, hyperfine
  satellite peaks land at negative coupling detuning relative to the
  reference peak at 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .atomdata import AtomData, N_MIN, SERIES_LABELS, term_energy
from .doppler import ThermalEnsemble, velocity_weight
from .errors import (
    FileFormatError,
    UnsupportedGeometryError,
    ValidationError,
)
from .ladder import COUNTER_PROPAGATING, LadderSystem

F_LEVELS = (3, 4, 5)

AXIS_CONVENTION = "increasing_coupling_detuning"

_TABLE_COLUMNS = ("f_intermediate", "n", "series", "v_class", "position", "weight")


@dataclass(frozen=True)
class ExcitationPathway:
    """One (intermediate hyperfine state, Rydberg component) excitation route.

    weight is the predicted relative peak intensity (thermal density ratio
    times strength, normalized to the strongest pathway); it is a reporting
    value. The synthesizer must NOT multiply by it: the velocity integral
    applies the thermal suppression of off-center velocity classes by
    itself, so only the explicit strength factor scales the absorption.
    """

    f_intermediate: int
    n: int
    series: str
    hfs_offset: float
    rydberg_offset: float
    v_class: float
    peak_position: float
    weight: float
    strength: float = 1.0

    def __post_init__(self):
        if self.f_intermediate not in F_LEVELS:
            raise ValidationError(
                f"f_intermediate must be one of {F_LEVELS}, got {self.f_intermediate}"
            )
        if self.series not in SERIES_LABELS:
            raise ValidationError(
                f"series must be one of {SERIES_LABELS}, got {self.series!r}"
            )
        if not 0.0 < self.weight <= 1.0:
            raise ValidationError(f"weight must be in (0, 1], got {self.weight}")
        if self.strength <= 0:
            raise ValidationError(f"strength must be positive, got {self.strength}")


def resonant_velocity(hfs_offset_mhz: float, lambda_p_nm: float) -> float:
    """Velocity class (m/s) resonant with the state at hfs_offset.

    A probe locked to the reference (zero-offset) resonance addresses the
    state at hfs_offset through atoms moving with v such that
    v/lambda_p = -hfs_offset; lower-lying states (negative offsets) need
    positive velocity.
    """
    if lambda_p_nm <= 0:
        raise ValidationError("lambda_p_nm must be positive")
    return -hfs_offset_mhz * (lambda_p_nm * 1e-3)


def coupling_axis_position(
    hfs_offset_mhz: float, rydberg_offset_mhz: float, sys: LadderSystem
) -> float:
    """Peak position on the coupling-scan axis, MHz relative to the reference.

    position = rydberg_offset + (1 - lambda_p/lambda_c) * |hfs_offset|.
    With lambda_p > lambda_c the slope is negative, so hyperfine satellites
    sit at negative detuning. Defined only for counter-propagating beams;
    the co-propagating scaling is deliberately not guessed.
    """
    if sys.geometry != COUNTER_PROPAGATING:
        raise UnsupportedGeometryError(
            "coupling_axis_position is defined only for counter_propagating "
            "geometry"
        )
    return rydberg_offset_mhz + sys.doppler_mismatch_slope * abs(hfs_offset_mhz)


def doppler_shift_ratio(probe_shift_mhz: float, sys: LadderSystem) -> float:
    """Coupling-laser Doppler shift of a velocity class, from its probe shift.

    A class Doppler-shifted by delta'_p on the probe is shifted by
    delta'_p * lambda_p/lambda_c on the coupling beam (frequency ratio).
    Distinct from :func:`coupling_axis_position`, which answers where a
    pathway peaks on the scan axis via two-photon closure; conflating the
    two scalings is the likeliest implementation bug in this algebra.
    """
    return probe_shift_mhz * sys.lambda_p_nm / sys.lambda_c_nm


def kernel_resonant_velocity(
    delta_p_mhz: float, delta_c_mhz: float, sys: LadderSystem
) -> float:
    """Integrand velocity minimizing the two-photon denominator magnitude.

    The susceptibility kernel's two-photon factor is smallest where
    delta_p + delta_c + kappa*v = 0 with kappa the residual Doppler slope.
    The kernel's velocity axis is mirrored relative to the lab-frame
    convention of :func:`resonant_velocity`; negate this value to compare
    with lab-frame velocity classes.
    """
    kappa = sys.two_photon_inv_wavelength
    if kappa == 0.0:
        raise ValidationError(
            "two-photon Doppler slope is zero; no finite resonant velocity"
        )
    return -(delta_p_mhz + delta_c_mhz) / kappa


def pathway_weight(
    v_class: float, ens: ThermalEnsemble, strength_factor: float = 1.0
) -> float:
    """Thermal-population weight of a velocity class, 1 at v = 0.

    Pure Gaussian density ratio exp(-v^2/u^2) times an optional per-pathway
    relative strength factor (default 1; line-strength modeling is opt-in).
    """
    if strength_factor <= 0:
        raise ValidationError("strength_factor must be positive")
    return float(
        velocity_weight(v_class, ens) / velocity_weight(0.0, ens) * strength_factor
    )


def overlap_principal_quantum_number(
    atom: AtomData,
    hfs_span_mhz: float,
    sys: LadderSystem,
    n_max: int = 120,
):
    """n at which the D fine-structure splitting matches a hyperfine landmark.

    Finds the n minimizing |fine_structure_splitting(n) - target| with
    target = |1 - lambda_p/lambda_c| * hfs_span: there the F'=5 D3/2 peak
    collides with the largest-interval hyperfine satellite of D5/2. Returns
    None when no interior minimizer exists in [n_min, n_max] (for example a
    degenerate constant set with zero splitting everywhere).
    """
    from .atomdata import fine_structure_splitting

    if hfs_span_mhz <= 0:
        raise ValidationError("hfs_span_mhz must be positive")
    if n_max <= N_MIN + 1:
        raise ValidationError(f"n_max must exceed {N_MIN + 1}")
    target = abs(sys.doppler_mismatch_slope) * hfs_span_mhz
    ns = np.arange(N_MIN, n_max + 1)
    diffs = np.asarray(
        [abs(fine_structure_splitting(atom, int(n)) - target) for n in ns]
    )
    best = int(np.argmin(diffs))
    if best == 0 or best == len(ns) - 1:
        return None
    return int(ns[best])


def build_pathway_set(
    n: int,
    series_labels,
    atom: AtomData,
    sys: LadderSystem,
    ens: ThermalEnsemble,
    f_levels=F_LEVELS,
    strength_factors=None,
):
    """All pathways for one n: every requested F' times every requested series.

    Rydberg offsets are referenced to the least-bound requested series (the
    highest term energy), which therefore peaks at 0 for F'=5. Weights are
    thermal-density ratios times optional per-F' strength factors,
    renormalized so the largest weight is 1. Returns pathways sorted by
    descending peak position (reference peak first).
    """
    series_labels = tuple(series_labels)
    f_levels = tuple(f_levels)
    if not series_labels or not f_levels:
        raise ValidationError("need at least one series and one F' level")
    for label in series_labels:
        if label not in SERIES_LABELS:
            raise ValidationError(
                f"series must be one of {SERIES_LABELS}, got {label!r}"
            )
    for f in f_levels:
        if f not in F_LEVELS:
            raise ValidationError(f"F' levels must be among {F_LEVELS}, got {f}")
    strengths = {f: 1.0 for f in f_levels}
    if strength_factors:
        for f, s in strength_factors.items():
            if f not in F_LEVELS:
                raise ValidationError(f"strength factor for unknown F'={f}")
            strengths[int(f)] = float(s)

    energies = {label: term_energy(atom.ritz(label), n) for label in series_labels}
    e_ref = max(energies.values())

    raw = []
    for label in series_labels:
        rydberg_offset = (energies[label] - e_ref) * 1e6
        for f in f_levels:
            hfs_offset = atom.hyperfine.offset(f)
            v_class = resonant_velocity(hfs_offset, sys.lambda_p_nm)
            position = coupling_axis_position(hfs_offset, rydberg_offset, sys)
            weight = pathway_weight(v_class, ens, strengths.get(f, 1.0))
            raw.append((f, label, hfs_offset, rydberg_offset, v_class, position, weight))

    w_max = max(r[-1] for r in raw)
    pathways = [
        ExcitationPathway(
            f_intermediate=f,
            n=n,
            series=label,
            hfs_offset=hfs_offset,
            rydberg_offset=rydberg_offset,
            v_class=v_class,
            peak_position=position,
            weight=weight / w_max,
            strength=strengths.get(f, 1.0),
        )
        for (f, label, hfs_offset, rydberg_offset, v_class, position, weight) in raw
    ]
    pathways.sort(key=lambda p: (-p.peak_position, p.series, -p.f_intermediate))
    return tuple(pathways)


def group_series_for_scan(
    n: int,
    series_labels,
    atom: AtomData,
    sys: LadderSystem,
    ens: ThermalEnsemble,
    max_span_mhz: float,
    f_levels=F_LEVELS,
):
    """Partition series into groups whose peaks fit in one scan window.

    Series separated by more than max_span_mhz (the S terms sit tens of GHz
    from the D terms at the same n) cannot be covered by one coupling sweep;
    each returned group gets its own trace with its own axis reference.
    Groups are ordered, and filled, from the least-bound series downward.
    """
    if max_span_mhz <= 0:
        raise ValidationError("max_span_mhz must be > 0")
    probe = build_pathway_set(n, series_labels, atom, sys, ens, f_levels)
    span = {}
    for p in probe:
        lo, hi = span.get(p.series, (p.peak_position, p.peak_position))
        span[p.series] = (min(lo, p.peak_position), max(hi, p.peak_position))

    ordered = sorted(span, key=lambda s: -span[s][1])
    groups = []
    current = [ordered[0]]
    top = span[ordered[0]][1]
    for label in ordered[1:]:
        if top - span[label][0] <= max_span_mhz:
            current.append(label)
        else:
            groups.append(tuple(current))
            current = [label]
            top = span[label][1]
    groups.append(tuple(current))
    return tuple(groups)


def format_pathway_table(pathways) -> str:
    """Serialize a pathway set to the documented tabular text format.

    '#' header lines record the column names and the axis sign convention;
    each data row holds F', n, series, v_class (m/s), position (MHz), weight.
    """
    lines = [
        f"# axis_convention = {AXIS_CONVENTION}",
        "# hyperfine satellites at negative coupling detuning",
        "# columns: " + " ".join(_TABLE_COLUMNS),
    ]
    for p in pathways:
        lines.append(
            f"{p.f_intermediate} {p.n} {p.series} "
            f"{p.v_class:.17g} {p.peak_position:.17g} {p.weight:.17g}"
        )
    return "\n".join(lines) + "\n"


def parse_pathway_table(text: str, sys: LadderSystem):
    """Parse the tabular pathway format back into ExcitationPathway objects.

    The hyperfine and Rydberg offsets are reconstructed from the stored
    velocity class and peak position using the system wavelengths, so a
    round trip through the format is exact. The format does not carry
    strength factors; parsed pathways get the default strength 1. Raises
    FileFormatError with the 1-based line number on malformed rows.
    """
    pathways = []
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != len(_TABLE_COLUMNS):
            raise FileFormatError(
                f"expected {len(_TABLE_COLUMNS)} columns, got {len(parts)}",
                line_number=lineno,
            )
        try:
            f = int(parts[0])
            n = int(parts[1])
            series = parts[2]
            v_class = float(parts[3])
            position = float(parts[4])
            weight = float(parts[5])
        except ValueError as exc:
            raise FileFormatError(str(exc), line_number=lineno) from exc
        hfs_offset = -v_class / (sys.lambda_p_nm * 1e-3)
        rydberg_offset = position - sys.doppler_mismatch_slope * abs(hfs_offset)
        try:
            pathways.append(
                ExcitationPathway(
                    f_intermediate=f,
                    n=n,
                    series=series,
                    hfs_offset=hfs_offset,
                    rydberg_offset=rydberg_offset,
                    v_class=v_class,
                    peak_position=position,
                    weight=weight,
                )
            )
        except ValidationError as exc:
            raise FileFormatError(str(exc), line_number=lineno) from exc
    if not pathways:
        raise FileFormatError("no pathway rows found")
    return tuple(pathways)


def save_pathway_table(path, pathways) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_pathway_table(pathways))


def load_pathway_table(path, sys: LadderSystem):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_pathway_table(fh.read(), sys)
