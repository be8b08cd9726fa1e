"""Ensemble controllability analysis and minimum-energy control synthesis.

Systems have the form ``dX/dt = beta A0 X + (B0 + beta B1) U`` with a scalar
parameter ``beta`` in an interval ``K``.
"""

from .controllability import (
    CanonicalSystem,
    SpectrumAtom,
    Verdict,
    build_atoms,
    canonicalize,
    check_diagonal_case,
    check_jordan_block,
    check_jordan_case,
    check_origin_case,
    classify,
    muntz_check,
    reduce_columns,
    spectra,
)
from .errors import (
    EnsembleError,
    IllConditionedError,
    InputError,
    NumericRangeError,
    PreconditionError,
    RoutingError,
    UnknownExampleError,
    UnreachableTargetError,
    UnsupportedError,
)
from .linalg import SpectralForm, matrix_exponential, numeric_rank, spectral_decompose, zoh_discretize
from .model import (
    AffineState,
    EnsembleSystem,
    EnsembleTarget,
    Interval,
    ParameterGrid,
    Scenario,
    builtin_example,
    compute_xi,
    make_grid,
)
from .reachability import (
    GeneratorBasis,
    PiecewiseFunction,
    build_generators,
    construct_auxiliary_functions,
    fit_polynomial,
    numeric_reachability_test,
)
from .simulate import EnsembleTrajectory, ensemble_error, propagate, run_scenario
from .synthesis import (
    ControlSignal,
    DiscretizedOperator,
    SynthesisResult,
    TimeMesh,
    assemble_operator,
    min_energy_control,
    picard_diagnostic,
)

__all__ = [
    "AffineState",
    "CanonicalSystem",
    "ControlSignal",
    "DiscretizedOperator",
    "EnsembleError",
    "EnsembleSystem",
    "EnsembleTarget",
    "EnsembleTrajectory",
    "GeneratorBasis",
    "IllConditionedError",
    "InputError",
    "Interval",
    "NumericRangeError",
    "ParameterGrid",
    "PiecewiseFunction",
    "PreconditionError",
    "RoutingError",
    "Scenario",
    "SpectralForm",
    "SpectrumAtom",
    "SynthesisResult",
    "TimeMesh",
    "UnknownExampleError",
    "UnreachableTargetError",
    "UnsupportedError",
    "Verdict",
    "assemble_operator",
    "build_atoms",
    "build_generators",
    "builtin_example",
    "canonicalize",
    "check_diagonal_case",
    "check_jordan_block",
    "check_jordan_case",
    "check_origin_case",
    "classify",
    "compute_xi",
    "construct_auxiliary_functions",
    "ensemble_error",
    "fit_polynomial",
    "make_grid",
    "matrix_exponential",
    "min_energy_control",
    "muntz_check",
    "numeric_rank",
    "numeric_reachability_test",
    "picard_diagnostic",
    "propagate",
    "reduce_columns",
    "run_scenario",
    "spectra",
    "spectral_decompose",
    "zoh_discretize",
]

__version__ = "0.1.0"
