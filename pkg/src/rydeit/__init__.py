"""Velocity-selective Rydberg EIT spectroscopy in thermal Cs vapor.

Forward synthesis of coupling-laser-scan transmission spectra from a
three-level ladder susceptibility model with Doppler averaging, and the
inverse pipeline recovering hyperfine and fine-structure splittings from
such spectra via peak fitting and RF-sideband axis calibration.
"""

from .atomdata import (
    AtomData,
    HyperfineLadder6P32,
    RitzSeries,
    fine_structure_splitting,
    load_constants,
    quantum_defect,
    term_energy,
)
from .backend import BACKEND_NAME, available_backends
from .config import RunConfig
from .doppler import (
    QuadratureSpec,
    ThermalEnsemble,
    doppler_averaged_susceptibility,
    velocity_weight,
)
from .errors import (
    AssignmentError,
    CalibrationError,
    ComputationError,
    DegenerateModelError,
    DistortionError,
    FileFormatError,
    FitError,
    GeometryError,
    QuadratureError,
    RangeError,
    RydeitError,
    UnsupportedGeometryError,
    ValidationError,
    WindowError,
)
from .ladder import (
    ComplexSusceptibility,
    LadderSystem,
    obe_steady_state_oracle,
    susceptibility_kernel,
    transmission,
    velocity_to_frequency_shift,
)
from .analysis import (
    CalibrationModel,
    PeakFit,
    SplittingRecord,
    SplittingReport,
    calibrate_axis,
    detect_peaks,
    extract_splittings,
    fit_peak,
)
from .spectrum import (
    ScanDistortion,
    SidebandSpec,
    SpectrumTrace,
    apply_sidebands,
    distort_axis,
    load_trace,
    save_trace,
    synthesize_trace,
)
from .velocitymap import (
    ExcitationPathway,
    build_pathway_set,
    coupling_axis_position,
    overlap_principal_quantum_number,
    pathway_weight,
    resonant_velocity,
)

__version__ = "0.1.0"

__all__ = [
    "AssignmentError",
    "AtomData",
    "BACKEND_NAME",
    "CalibrationError",
    "CalibrationModel",
    "ComplexSusceptibility",
    "ComputationError",
    "DegenerateModelError",
    "DistortionError",
    "ExcitationPathway",
    "FileFormatError",
    "FitError",
    "GeometryError",
    "HyperfineLadder6P32",
    "LadderSystem",
    "PeakFit",
    "QuadratureError",
    "QuadratureSpec",
    "RangeError",
    "RitzSeries",
    "RunConfig",
    "RydeitError",
    "ScanDistortion",
    "SidebandSpec",
    "SpectrumTrace",
    "SplittingRecord",
    "SplittingReport",
    "ThermalEnsemble",
    "UnsupportedGeometryError",
    "ValidationError",
    "WindowError",
    "apply_sidebands",
    "available_backends",
    "build_pathway_set",
    "calibrate_axis",
    "coupling_axis_position",
    "detect_peaks",
    "distort_axis",
    "doppler_averaged_susceptibility",
    "extract_splittings",
    "fine_structure_splitting",
    "fit_peak",
    "load_constants",
    "load_trace",
    "obe_steady_state_oracle",
    "overlap_principal_quantum_number",
    "pathway_weight",
    "quantum_defect",
    "resonant_velocity",
    "save_trace",
    "susceptibility_kernel",
    "synthesize_trace",
    "term_energy",
    "transmission",
    "velocity_to_frequency_shift",
    "velocity_weight",
]
