"""Single-site MIMO localization toolkit.

Synthesizes geo-tagged CSI over a user grid, transforms it to angle-delay
profiles, compresses the profiles with a fully-connected autoencoder, and
regresses user positions with kernel-selected Gaussian process regression.
"""

from ._version import __version__
from .adp import bin_to_angle_delay, compute_adp, dft_f, dft_v, similarity, to_unit_vector, vec
from .autoencoder import (
    AutoencoderConfig,
    AutoencoderModel,
    decode,
    encode,
    reconstruction_similarity,
)
from .autoencoder import train as train_autoencoder
from .channel import (
    GeoTaggedSample,
    PathComponent,
    ScenarioConfig,
    array_response,
    csi_from_paths,
    generate_dataset,
    synthesize_paths,
    synthetic_scenario,
)
from .errors import (
    ConditioningError,
    ConfigurationError,
    CsilocError,
    DomainError,
    TrainingError,
)
from .gpr import (
    KERNEL_KINDS,
    GprModel,
    KernelSpec,
    fit,
    gram,
    kernel_eval,
    nlml,
    nlml_gradient,
    pair_distance,
    predict,
)
from .pipeline import (
    EvalReport,
    LocalizationOutcome,
    SplitSpec,
    evaluate,
    offline_phase1,
    offline_phase2,
    online_localize,
    timing_study,
)
from .training import (
    KernelSelectionReport,
    OptimizationBudget,
    cv_loss,
    objective,
    optimize_hyperparams,
    select_kernel,
    train_position_models,
)

__all__ = [name for name in dir() if not name.startswith("_")]
