"""Block l0 variable selection with externally supplied variable groupings."""

__version__ = "0.1.0"

from ._kernels import BACKEND  # noqa: E402
from .core import (  # noqa: E402
    BlockPartition,
    RegressionData,
    fit_mle,
    normalized_scores,
    score,
    softmax_scores,
)
from .ebayes import EBResult, algorithm1, algorithm1_all, ebic_select  # noqa: E402
from .search import ModelLedger, SearchConfig, enumerate_select, inclusion_probabilities, mcmc_search  # noqa: E402
from .seqmodel import BlockConfig, SequenceData, example_config, threshold_select  # noqa: E402

__all__ = [
    "BACKEND",
    "BlockConfig",
    "BlockPartition",
    "EBResult",
    "ModelLedger",
    "RegressionData",
    "SearchConfig",
    "SequenceData",
    "algorithm1",
    "algorithm1_all",
    "ebic_select",
    "enumerate_select",
    "example_config",
    "fit_mle",
    "inclusion_probabilities",
    "mcmc_search",
    "normalized_scores",
    "score",
    "softmax_scores",
    "threshold_select",
]
