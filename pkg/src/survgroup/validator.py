"""Permutation null of false-discovery exceptionalities and Z-test p-values."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .dataset import SurvivalDataset
from .learner import LearnerConfig, discover
from .rsf import ForestConfig

log = logging.getLogger(__name__)

FAST_NULL_TREES = 25


@dataclass
class NullModel:
    """Gaussian summary of the max exceptionality found on outcome-permuted data."""

    mu: float
    eta: float
    runs: int
    scores: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")

    def to_dict(self, with_scores: bool = True) -> dict:
        d = {"mu": self.mu, "eta": self.eta, "runs": self.runs}
        if with_scores and self.scores.size:
            d["scores"] = self.scores.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NullModel":
        return cls(float(d["mu"]), float(d["eta"]), int(d["runs"]),
                   np.asarray(d.get("scores", []), dtype=float))


def _null_run(args):
    dataset, forest_config, learner_config, m, seq = args
    rng = np.random.default_rng(seq)
    perm = rng.permutation(dataset.n)
    shuffled = dataset.with_outcomes(dataset.times[perm], dataset.events[perm])
    fseed, lseed = (int(s.generate_state(1)[0]) for s in seq.spawn(2))
    results = discover(
        shuffled,
        replace(learner_config, n_subgroups=m, seed=lseed),
        replace(forest_config, seed=fseed, n_jobs=1),
    )
    return max(r.exceptionality for r in results)


def build_dfd(
    dataset: SurvivalDataset,
    forest_config: ForestConfig = ForestConfig(),
    learner_config: LearnerConfig = LearnerConfig(),
    runs: int = 1000,
    m: int = 1,
    seed: int = 0,
    n_jobs: int = 1,
    fast: bool = False,
) -> NullModel:
    """Distribution of false discoveries by jointly permuting ``(time, event)`` pairs.

    Every run refits the forest on its permuted copy, discovers ``m`` subgroups
    and keeps the largest hard exceptionality. Run ``r`` draws from its own
    stream derived from ``(seed, r)``, so the result does not depend on
    ``n_jobs``. ``fast`` caps the forest at 25 trees.
    """
    if runs < 1 or m < 1:
        raise ValueError("runs and m must be >= 1")
    if runs < 1000:
        log.warning("building a null from %d runs; at least 1000 are recommended", runs)
    if fast:
        forest_config = replace(forest_config, n_trees=min(forest_config.n_trees, FAST_NULL_TREES))
    seqs = np.random.SeedSequence(seed).spawn(runs)
    jobs = [(dataset, forest_config, learner_config, m, s) for s in seqs]
    if n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as pool:
            scores = list(pool.map(_null_run, jobs, chunksize=max(1, runs // (4 * n_jobs))))
    else:
        scores = [_null_run(j) for j in jobs]
    scores = np.asarray(scores, dtype=float)
    eta = float(scores.std(ddof=1)) if runs > 1 else 0.0
    return NullModel(float(scores.mean()), eta, runs, scores)


def p_value(score: float, null: NullModel) -> float:
    """One-tailed upper p-value of ``score`` under the Gaussian null."""
    if not math.isfinite(score):
        raise ValueError("score must be finite")
    if null.eta <= 0:
        warnings.warn("degenerate null (eta = 0)", RuntimeWarning)
        return 0.0 if score > null.mu else 1.0
    return float(stats.norm.sf((score - null.mu) / null.eta))


def empirical_p_value(score: float, null: NullModel) -> float:
    """Tail-count p-value ``(1 + #{null >= score}) / (1 + runs)``, for cross-checking."""
    if null.scores.size == 0:
        raise ValueError("null model carries no raw scores")
    return float((1 + np.sum(null.scores >= score)) / (1 + null.scores.size))


def bonferroni(p_values, alpha: float = 0.05):
    """Bonferroni-adjusted p-values and significance flags (``adjusted < alpha``)."""
    p = np.asarray(p_values, dtype=float)
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise ValueError("p-values must lie in [0, 1]")
    adjusted = np.minimum(1.0, p * p.size)
    return [(float(a), bool(a < alpha)) for a in adjusted]
