"""Exact kNN classification over a mutable, persistent embedding store."""

from ._knnmem import (
    DEFAULT_K,
    Collection,
    KnnmemError,
    classify,
    classify_batch,
    evaluate_accuracy,
    load,
    neighbor_attribution,
    run_protocol,
    save,
    top_k,
)

__all__ = [
    "DEFAULT_K",
    "Collection",
    "KnnmemError",
    "classify",
    "classify_batch",
    "evaluate_accuracy",
    "load",
    "neighbor_attribution",
    "run_protocol",
    "save",
    "top_k",
]
