"""Adaptive estimation of linear functionals by penalized model selection."""
from .comparators import p2_select_level, p3_threshold_estimate, p4_empirical
from .config import ExperimentConfig, load_config
from .functionals import FunctionalKind, FunctionalRep, FunctionalSpec, build_functional_rep, estimate_T
from .harness import rate_slope, run_benchmark
from .kernels import BACKEND
from .observation import NoiseKind, NoiseModel, ObservationRecord, simulate_regression, truth_functional
from .selector import (
    SelectionResult,
    WeightSchedule,
    default_weights_corollary1,
    default_weights_corollary2,
    default_weights_corollary3,
    default_weights_sim41,
    select,
    select_multibasis,
)
from .signals import BUILTIN_SIGNALS, Signal, get_signal
from .wavelets import D20, HAAR, BasisFamily, BasisKind, ModelChain

__version__ = "0.1.0"
