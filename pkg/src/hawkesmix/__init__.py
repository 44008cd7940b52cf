"""Mixture models of multivariate Hawkes processes learned by adversarial self-paced learning."""

__version__ = "0.1.0"

from .augment import make_candidates, stitch, superpose  # noqa: E402
from .errors import (  # noqa: E402
    DataFormatError,
    DomainError,
    FitError,
    HawkesError,
    SingularLikelihoodError,
    TruncationError,
    TypeIndexError,
    UndefinedEasinessError,
)
from .evaluation import assign_clusters, benchmark, complexity_probe, purity, test_loglike  # noqa: E402
from .learning import (  # noqa: E402
    AsplConfig,
    FitReport,
    SelectionState,
    aspl_fit,
    aspl_objective,
    mle_fit,
    select_easy,
    spl_fit,
    update_model,
)
from .model import (  # noqa: E402
    EventSequence,
    HawkesParams,
    MixtureModel,
    component_loglik,
    easiness_hard,
    easiness_smooth,
    intensity,
    mixture_loglik,
)
from .simulate import LabeledDataset, SimConfig, simulate_hp, simulate_mixture  # noqa: E402

__all__ = [
    "AsplConfig", "DataFormatError", "DomainError", "EventSequence", "FitError", "FitReport",
    "HawkesError", "HawkesParams", "LabeledDataset", "MixtureModel", "SelectionState", "SimConfig",
    "SingularLikelihoodError", "TruncationError", "TypeIndexError", "UndefinedEasinessError",
    "aspl_fit", "aspl_objective", "assign_clusters", "benchmark", "complexity_probe",
    "component_loglik", "easiness_hard", "easiness_smooth", "intensity", "make_candidates",
    "mixture_loglik", "mle_fit", "purity", "select_easy", "simulate_hp", "simulate_mixture",
    "spl_fit", "stitch", "superpose", "test_loglike", "update_model",
]
