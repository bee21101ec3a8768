"""Gradient boosted decision trees from scratch, plus the tuning and
statistical benchmarking harness used to compare the engine's variants.

Subpackages and modules:

- ``data``     ingestion, encoders, stratified fold planning
- ``tree``     regression tree base learner (exact/histogram splits,
               depth-wise / leaf-wise / oblivious growth)
- ``boost``    the boosting loop, sampling schemes, prediction
- ``tune``     randomized search and TPE
- ``metrics``  accuracy / F1 / AUC / log loss
- ``stats``    Wilcoxon, Friedman, Nemenyi critical difference
- ``bench``    experiment orchestration and report emission
- ``kernels``  numba-accelerated hot loops with a pure-numpy fallback
               (select with BOOSTBENCH_BACKEND=numba|numpy)
"""

__version__ = "0.1.0"

from .errors import (
    BoostBenchError,
    DegenerateError,
    IngestionError,
    MetricError,
    ParameterError,
    PredictionError,
    ReportError,
    SchemaError,
    VectorizationError,
)

__all__ = [
    "BoostBenchError",
    "DegenerateError",
    "IngestionError",
    "MetricError",
    "ParameterError",
    "PredictionError",
    "ReportError",
    "SchemaError",
    "VectorizationError",
    "__version__",
]
