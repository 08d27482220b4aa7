"""textcausal: treatment effect estimation from tabular data with text."""

from .tabular import (
    ColumnKind,
    Column,
    Table,
    FeatureMatrix,
    DesignRecipe,
    load_csv,
    build_design_matrix,
)
from .vectorizer import VectorizerConfig, Vocabulary, fit_vocabulary, transform, transform_corpus
from .autocoder import (
    Lexicon,
    Scorer,
    binarize,
    code_callable,
    code_custom_topics,
    code_emotion,
    code_sentiment,
)
from .learners import (
    FittedLearner,
    GbdtParams,
    LearnerSpec,
    LogisticParams,
    fit_gbdt,
    fit_linear,
    fit_logistic,
    predict,
)
from .metalearners import (
    CausalModel,
    CausalSpec,
    EffectEstimate,
    PositivityError,
    estimate_ate,
    fit,
    naive_ate,
    predict_ite,
)
from .simulator import OracleTruth, SimulationSpec, inject_corpus, oracle_ate, reference_spec, simulate
from .textnet import TextNetParams, TextNetSpec

__version__ = "0.1.0"

__all__ = [
    "ColumnKind", "Column", "Table", "FeatureMatrix", "DesignRecipe",
    "load_csv", "build_design_matrix",
    "VectorizerConfig", "Vocabulary", "fit_vocabulary", "transform", "transform_corpus",
    "Lexicon", "Scorer", "binarize", "code_callable", "code_custom_topics",
    "code_emotion", "code_sentiment",
    "FittedLearner", "GbdtParams", "LearnerSpec", "LogisticParams",
    "fit_gbdt", "fit_linear", "fit_logistic", "predict",
    "CausalModel", "CausalSpec", "EffectEstimate", "PositivityError",
    "estimate_ate", "fit", "naive_ate", "predict_ite",
    "OracleTruth", "SimulationSpec", "inject_corpus", "oracle_ate",
    "reference_spec", "simulate",
    "TextNetParams", "TextNetSpec",
    "__version__",
]
