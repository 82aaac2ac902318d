"""Greedy post-hoc removal of redundant rule conditions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .softrule import SoftRuleParams, harden, membership

ACTIVITY_THRESHOLD = 0.1


@dataclass(frozen=True)
class PruneConfig:
    threshold: float = 0.95

    def __post_init__(self):
        if not 0 < self.threshold <= 1:
            raise ConfigError("prune threshold must lie in (0, 1]")


def jaccard(mask_a, mask_b) -> float:
    """Intersection over union of two boolean masks; 1 when both are empty."""
    a = np.asarray(mask_a, dtype=bool)
    b = np.asarray(mask_b, dtype=bool)
    if a.shape != b.shape:
        raise ShapeError("masks differ in length")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def _members(params, dataset):
    return membership(harden(params, dataset, ACTIVITY_THRESHOLD), dataset.features)


def active_conditions(params: SoftRuleParams) -> np.ndarray:
    return np.flatnonzero(params.effective_weights() > ACTIVITY_THRESHOLD)


def prune_rule(dataset, params: SoftRuleParams, config: PruneConfig = PruneConfig()) -> SoftRuleParams:
    """Zero condition weights one at a time while membership stays close to the original.

    Each sweep tries removing every active condition and keeps the removal whose
    crisp membership has the highest Jaccard similarity to the *original* rule's
    membership; ties go to the lowest feature index. Stops when the best
    candidate falls below ``config.threshold``.
    """
    reference = _members(params, dataset)
    current = params
    while jaccard(reference, _members(current, dataset)) >= config.threshold:
        best_score, best_j = 0.0, None
        for j in active_conditions(current):
            w = current.weights.copy()
            w[j] = 0.0
            score = jaccard(reference, _members(current.replace(weights=w), dataset))
            if score > best_score:
                best_score, best_j = score, j
        if best_j is None or best_score < config.threshold:
            break
        w = current.weights.copy()
        w[best_j] = 0.0
        current = current.replace(weights=w)
    return current
