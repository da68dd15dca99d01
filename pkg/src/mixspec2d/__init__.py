"""mixspec2d: 2-D sinusoids in colored moving-average noise.

Synthesis of mixed-spectrum random fields, least-squares estimation of
sinusoid parameters at any assumed order, and penalized selection of the
number of components, with a Monte Carlo harness for consistency
experiments.
"""

__version__ = "0.1.0"

from .estimator import (
    FitOptions,
    FitResult,
    SinusoidLSE,
    estimate_path,
    linear_amplitudes,
    loss,
    loss_gradient,
    lse_estimate,
)
from .exceptions import (
    ConditioningError,
    ConfigError,
    CoverageError,
    InvalidModelError,
    MixSpec2DError,
    RankDeficiencyError,
)
from .experiments import (
    ExperimentConfig,
    TrialResult,
    default_experiment_config,
    run_experiment,
    run_trial,
)
from .model import (
    Field2D,
    InnovationLaw,
    InnovationSpec,
    MaCoefficients,
    ParamVector,
    SinusoidParams,
    SupportKind,
    freq_distance,
    min_freq_sep_for_grid,
    noise_penalty_constant,
    spectral_density,
)
from .selector import (
    SelectionResult,
    SinusoidCountSelector,
    select_order,
    selection_statistic,
    xi_threshold,
)
from .spectrum import (
    Peak,
    Periodogram,
    direct_dft_periodogram,
    periodogram,
    sup_statistic,
    top_peaks,
)
from .synth import (
    compose,
    generate_innovations,
    ma_filter,
    sinusoid_field,
    synthesize_noise,
    synthesize_observation,
)
from .validation import as_field

__all__ = [
    "__version__",
    "ConditioningError",
    "ConfigError",
    "CoverageError",
    "InvalidModelError",
    "MixSpec2DError",
    "RankDeficiencyError",
    "Field2D",
    "InnovationLaw",
    "InnovationSpec",
    "MaCoefficients",
    "ParamVector",
    "SinusoidParams",
    "SupportKind",
    "freq_distance",
    "min_freq_sep_for_grid",
    "noise_penalty_constant",
    "spectral_density",
    "compose",
    "generate_innovations",
    "ma_filter",
    "sinusoid_field",
    "synthesize_noise",
    "synthesize_observation",
    "Peak",
    "Periodogram",
    "direct_dft_periodogram",
    "periodogram",
    "sup_statistic",
    "top_peaks",
    "FitOptions",
    "FitResult",
    "SinusoidLSE",
    "estimate_path",
    "linear_amplitudes",
    "loss",
    "loss_gradient",
    "lse_estimate",
    "SelectionResult",
    "SinusoidCountSelector",
    "select_order",
    "selection_statistic",
    "xi_threshold",
    "ExperimentConfig",
    "TrialResult",
    "default_experiment_config",
    "run_experiment",
    "run_trial",
    "as_field",
]
