from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from app.domain.exceptions import LabelError, ShapeMismatchError


def confusion_counts_matrix(truth: Sequence[int], predicted: Sequence[int], k: int) -> np.ndarray:
    """K x K integer matrix; entry (i, j) counts true class i predicted as j."""
    if len(truth) != len(predicted):
        raise ShapeMismatchError("confusion_matrix", (len(truth),), (len(predicted),))
    t = np.asarray(truth, dtype=np.int64).reshape(-1)
    p = np.asarray(predicted, dtype=np.int64).reshape(-1)
    for arr in (t, p):
        if arr.size and (arr.min() < 0 or arr.max() >= k):
            raise LabelError(f"class index out of range for {k} classes")
    matrix = np.zeros((k, k), dtype=np.int64)
    np.add.at(matrix, (t, p), 1)
    return matrix


def confusion_matrix(truth: Sequence[int], predicted: Sequence[int], k: int) -> np.ndarray:
    """Row-normalized confusion matrix; rows of absent classes stay all-zero."""
    counts = confusion_counts_matrix(truth, predicted, k).astype(np.float64)
    support = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, support, out=np.zeros_like(counts), where=support > 0)
