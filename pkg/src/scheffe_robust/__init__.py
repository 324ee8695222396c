"""Robust two-point testing and tournament estimation under Huber contamination."""

from .errors import (
    ConfigurationError,
    ContractError,
    DegenerateSetError,
    DomainError,
    EmptyNetError,
    ScheffeRobustError,
)
from .harness import ExperimentConfig, ExperimentResult, report, run_experiment
from .measures import (
    Cauchy,
    ContaminatedSource,
    EmpiricalMeasure,
    GaussianLocation,
    HaarDensity,
    LinearRegression,
    PointMass,
    SampleList,
    ShiftedGaussian,
    TraceRegression,
    WhiteNoiseSequence,
    hellinger_distance,
    lecam_birge_bound,
    make_model,
    sample,
    tv_distance,
)
from .models import (
    LowRankParam,
    SparseRegressionParam,
    WhiteNoiseSample,
    gaussian_location_modulus,
    losses,
    median_wavelet_estimator,
    modulus_of_continuity,
    truncation_level,
    white_noise_sup_modulus,
)
from .nets import CoveringNet, build_greedy_packing, local_entropy, space_from_spec
from .scheffe import (
    ScheffeSet,
    TestDecision,
    build_scheffe_set,
    estimate_error_exponent,
    huber_clipped_test,
    lrt_test,
    scheffe_error_bound,
    scheffe_test,
)
from .tournament import (
    ScheffeTournament,
    TournamentResult,
    failure_bound,
    global_failure_bound,
    local_failure_bound,
    run_tournament,
    yatracos_minimum_distance,
)

__version__ = "0.1.0"
