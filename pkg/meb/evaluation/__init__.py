from meb.evaluation.retrieval import (
    DEFAULT_MAX_RANK,
    RetrievalMeta,
    average_precision,
    evaluate,
    evaluate_ensemble,
    evaluate_expert,
    extract_features,
    write_per_query_ap,
)

__all__ = [
    "DEFAULT_MAX_RANK",
    "RetrievalMeta",
    "average_precision",
    "evaluate",
    "evaluate_ensemble",
    "evaluate_expert",
    "extract_features",
    "write_per_query_ap",
]
