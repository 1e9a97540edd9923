"""Recovery and resolution limits for moving point sources."""

from .adversarial import (
    SearchSpec,
    WorstCasePair,
    sparsest_solution_bruteforce,
    worst_case_number_1d,
    worst_case_number_tilted,
    worst_case_support,
    worst_case_support_tilted,
)
from .bounds import BoundReport, compute_bounds
from .errors import DynsrError
from .experiments import ExperimentConfig, PhaseDiagram, builtin_scenario, emit_csv, phase_diagram, run_scenario
from .model import (
    FrequencyGrid,
    MeasurementSet,
    ParameterSet,
    TimeSeries,
    cartesian_grid,
    is_sigma_admissible,
    ray_grid,
    sample_along_direction,
    synthesize,
)
from .music import music_recover_1d, music_spectrum
from .numdetect import build_hankel, detect_number_2d, detect_number_svt, detect_number_sweep
from .velocity import RecoveryResult, VelocityConfig, recover_velocities_1d, recover_velocities_2d

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "DynsrError",
    "ExperimentConfig",
    "FrequencyGrid",
    "MeasurementSet",
    "ParameterSet",
    "PhaseDiagram",
    "RecoveryResult",
    "SearchSpec",
    "TimeSeries",
    "VelocityConfig",
    "WorstCasePair",
    "build_hankel",
    "builtin_scenario",
    "cartesian_grid",
    "compute_bounds",
    "detect_number_2d",
    "detect_number_svt",
    "detect_number_sweep",
    "emit_csv",
    "is_sigma_admissible",
    "music_recover_1d",
    "music_spectrum",
    "phase_diagram",
    "ray_grid",
    "recover_velocities_1d",
    "recover_velocities_2d",
    "run_scenario",
    "sample_along_direction",
    "sparsest_solution_bruteforce",
    "synthesize",
    "worst_case_number_1d",
    "worst_case_number_tilted",
    "worst_case_support",
    "worst_case_support_tilted",
]
