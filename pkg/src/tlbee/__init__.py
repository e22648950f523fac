"""Transfer-learning Bayesian MMSE error estimation for Gaussian classifiers."""

__version__ = "0.1.0"

from .classifiers import (
    ConstantClassifier,
    LinearClassifier,
    ObtlClassifier,
    QuadraticClassifier,
    lda_from_params,
    lda_from_sample,
    obtl_from_data,
    qda_from_params,
    qda_from_sample,
    true_error,
)
from .errors import (
    CalibrationError,
    ConfigError,
    ConvergenceWarning,
    DataFormatError,
    DegenerateClassifierError,
    DomainError,
    InsufficientDataError,
    NumericalFailure,
    TlbeeError,
)
from .estimators import (
    BeeConfig,
    BeeResult,
    bootstrap632,
    cross_validation,
    loo,
    resubstitution,
    target_bee,
    tl_bee,
)
from .model import DomainClassParams, JointHyper, LabeledDataset, synthetic_hyper
from .posterior import lemma1_params, log_weight, theorem1_params
