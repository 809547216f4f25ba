"""Multi-attention multi-class constraint as an n-pair softmax contrast.

Per branch, features are L2-normalized and compared by dot product. For anchor i the
positives are the other same-class samples; the denominator runs over every other
sample. The loss is the mean of -ln(sum_pos exp(sim) / sum_all exp(sim)) over anchors
and branches.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from app.domain.exceptions import DatasetError, ShapeMismatchError
from app.finegrain.osme import AttentionFeatures
from app.nn import functional as F
from app.nn.tensor import Tensor


def _pair_masks(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    same = labels[:, None] == labels[None, :]
    others = ~np.eye(len(labels), dtype=bool)
    return (same & others).astype(np.float64), others.astype(np.float64)


def mamc_loss(features: AttentionFeatures, labels: Sequence[int] | np.ndarray) -> Tensor:
    y = np.asarray(labels).reshape(-1)
    _, counts = np.unique(y, return_counts=True)
    if np.any(counts < 2):
        raise DatasetError("mamc_loss needs at least two samples of every class in the batch")
    positives, everyone = _pair_masks(y)

    per_branch: list[Tensor] = []
    for f in features.features:
        if f.ndim != 2 or f.shape[0] != len(y):
            raise ShapeMismatchError("mamc_loss", f"({len(y)}, D)", f.shape)
        fn = F.l2_normalize(f)
        sims = (fn @ fn.T).exp()
        pos = (sims * Tensor(positives.astype(f.dtype))).sum(axis=1)
        total = (sims * Tensor(everyone.astype(f.dtype))).sum(axis=1)
        per_branch.append((total.log() - pos.log()).mean())

    loss = per_branch[0]
    for term in per_branch[1:]:
        loss = loss + term
    return loss * (1.0 / len(per_branch))
