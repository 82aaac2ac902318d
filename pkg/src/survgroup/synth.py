"""Synthetic survival data with a planted hyper-box subgroup, plus recovery scoring."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import SurvivalDataset
from .errors import ConfigError, GenerationError, ShapeError
from .softrule import Condition, HardRule

log = logging.getLogger(__name__)

_PSI_FLOOR = 1e-6


@dataclass(frozen=True)
class SynthConfig:
    n: int = 10000
    p: int = 10
    k: int = 2
    scale_nsg: float = 5.0
    shape_nsg: float = 1.5
    scale_sg: float = 1.0
    shape_sg: float = 1.5
    ratio_target: float = 0.2
    ratio_cens: float = 0.1
    seed: int = 0
    # When False, equal/overlapping outcome scales drop the covariate influence
    # instead of failing; used by hazard-ratio sweeps that reach ratio 1.
    require_separation: bool = True

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ConfigError("n and p must be positive")
        if not 1 <= self.k <= self.p:
            raise ConfigError(f"need 1 <= k <= p, got k={self.k}, p={self.p}")
        if not 0 < self.ratio_target < 1:
            raise ConfigError("ratio_target must lie in (0, 1)")
        if not 0 <= self.ratio_cens < 1:
            raise ConfigError("ratio_cens must lie in [0, 1)")
        if min(self.scale_nsg, self.shape_nsg, self.scale_sg, self.shape_sg) <= 0:
            raise ConfigError("Weibull scales and shapes must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PlantedTruth:
    rule: HardRule
    mask: np.ndarray
    psi: float


def _weibull(rng, shape, size):
    # inverse CDF of Weibull(shape, scale=1)
    return (-np.log1p(-rng.random(size))) ** (1.0 / shape)


def _supports_overlap(a, b):
    return not (a.max() < b.min() or b.max() < a.min())


def make_survival_data(config: SynthConfig = SynthConfig()):
    """Generate ``(dataset, truth)`` following the planted-subgroup recipe.

    ``k`` of the ``p`` uniform features carry an interval of width
    ``ratio_target ** (1/k)``. Subgroup subjects fall inside every interval and
    non-subgroup subjects outside every interval. Outcomes are Weibull with
    group-specific scale shifted by a shared linear covariate term, and a
    ``ratio_cens`` fraction is censored uniformly before the true time.
    """
    rng = np.random.default_rng(config.seed)
    n, p, k = config.n, config.p, config.k
    chosen = rng.choice(p, size=k, replace=False)
    eps = config.ratio_target ** (1.0 / k)
    lows = rng.uniform(0.0, 1.0 - eps, size=k)

    X = rng.uniform(0.0, 1.0, size=(n, p))
    X_sg = np.empty((n, k))
    X_nsg = np.empty((n, k))
    for j in range(k):
        X_sg[:, j] = rng.uniform(lows[j], lows[j] + eps, size=n)
        col = rng.uniform(0.0, 1.0, size=n)
        inside = (col >= lows[j]) & (col <= lows[j] + eps)
        while inside.any():
            col[inside] = rng.uniform(0.0, 1.0, size=int(inside.sum()))
            inside = (col >= lows[j]) & (col <= lows[j] + eps)
        X_nsg[:, j] = col

    for _ in range(1000):
        flags = rng.random(n) < config.ratio_target
        if flags.any():
            break
    else:
        raise GenerationError("could not draw a non-empty subgroup")
    for j, v in enumerate(chosen):
        X[flags, v] = X_sg[flags, j]
        X[~flags, v] = X_nsg[~flags, j]

    influence = X[:, chosen].sum(axis=1) - k / 2.0
    psi = 1.0
    while True:
        scale_sg = config.scale_sg + influence * psi
        scale_nsg = config.scale_nsg + influence * psi
        if (scale_sg.min() >= 0 and scale_nsg.min() >= 0
                and not _supports_overlap(scale_sg, scale_nsg)):
            break
        psi *= 0.9
        if psi < _PSI_FLOOR:
            if config.require_separation:
                raise GenerationError(
                    "outcome scales of subgroup and population cannot be separated "
                    f"(scale_sg={config.scale_sg}, scale_nsg={config.scale_nsg})"
                )
            log.warning("scales not separable; dropping covariate influence")
            psi = 0.0
            scale_sg = np.full(n, config.scale_sg)
            scale_nsg = np.full(n, config.scale_nsg)
            break

    y_sg = scale_sg * _weibull(rng, config.shape_sg, n)
    y_nsg = scale_nsg * _weibull(rng, config.shape_nsg, n)
    Y = np.where(flags, y_sg, y_nsg)
    events = (rng.random(n) >= config.ratio_cens).astype(np.int8)
    T = Y.copy()
    cens = events == 0
    T[cens] = rng.uniform(0.0, Y[cens])

    rule = HardRule(tuple(
        Condition(int(v), float(lows[j]), float(lows[j] + eps))
        for j, v in sorted(enumerate(chosen), key=lambda item: item[1])
    ))
    if not events.any():
        raise GenerationError("all subjects censored")
    dataset = SurvivalDataset(X, T, events)
    return dataset, PlantedTruth(rule, flags, psi)


def recovery_f1(predicted, truth) -> float:
    """Membership-level F1 of a predicted subgroup mask against the planted one."""
    pred = np.asarray(predicted, dtype=bool)
    true = np.asarray(truth, dtype=bool)
    if pred.shape != true.shape:
        raise ShapeError("predicted and truth masks differ in length")
    tp = np.sum(pred & true)
    denom = pred.sum() + true.sum()
    if denom == 0:
        return 1.0
    return float(2 * tp / denom)
