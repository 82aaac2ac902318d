"""Gradient-based learning of exceptional survival subgroups.

Each subject's exceptionality is the trapezoidal integral of the absolute gap
between its model survival curve and a reference curve. A soft rule is trained
with Adam to maximise the size-penalised mean exceptionality of the subjects it
selects, plus a diversity term against previously found rules; the temperature
is halved at one half and three quarters of the epochs.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .dataset import SurvivalDataset
from .errors import ConfigError, ShapeError
from .rsf import ForestConfig, SurvivalMatrix, fit_forest, population_curve, predict_matrix
from .softrule import PI_FLOOR, HardRule, SoftRuleParams, harden, membership, soft_rule
from .survival import StepCurve, kaplan_meier, trapezoid_weights

log = logging.getLogger(__name__)

SIZE_FLOOR = 1e-9


@dataclass(frozen=True)
class LearnerConfig:
    gamma: float = 0.1
    initial_temperature: float = 0.2
    epochs: int = 1000
    learning_rate: float = 0.01
    n_subgroups: int = 1
    seed: int = 0
    gamma_decay: float = 1.0  # multiplicative gamma factor per further subgroup; 1 disables

    def __post_init__(self):
        if not 0 <= self.gamma <= 1:
            raise ConfigError("gamma must lie in [0, 1]")
        if not self.initial_temperature > 0:
            raise ConfigError("initial_temperature must be positive")
        if self.epochs < 4:
            raise ConfigError("epochs must be >= 4")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.n_subgroups < 1:
            raise ConfigError("n_subgroups must be >= 1")
        if not 0 < self.gamma_decay <= 1:
            raise ConfigError("gamma_decay must lie in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SubgroupResult:
    soft_params: SoftRuleParams
    rule: HardRule
    mask: np.ndarray
    exceptionality: float
    km_curve: Optional[StepCurve]
    p_value: Optional[float] = None

    @property
    def size(self) -> int:
        return int(self.mask.sum())


class Adam:
    """Adam over a dict of arrays, updated in place."""

    def __init__(self, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m, self.v, self.t = {}, {}, 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


def exceptionality_vector(matrix: SurvivalMatrix, reference, grid=None) -> np.ndarray:
    """Per-subject integrated absolute deviation of matrix rows from ``reference``.

    ``reference`` is a :class:`StepCurve` on the matrix grid or a plain vector of
    values at the matrix grid points.
    """
    grid = matrix.grid if grid is None else np.asarray(grid, dtype=float)
    if isinstance(reference, StepCurve):
        if reference.grid.shape != grid.shape or not np.array_equal(reference.grid, grid):
            raise ShapeError("reference curve is not on the matrix grid")
        ref = reference.values
    else:
        ref = np.asarray(reference, dtype=float)
    if ref.shape != (matrix.values.shape[1],) or grid.shape != ref.shape:
        raise ShapeError("reference and grid must match the matrix columns")
    out = np.empty(matrix.n)
    _kernels.abs_diff_weighted_rows(matrix.values, ref, trapezoid_weights(grid), out)
    return out


def _size(memberships):
    return float(np.mean(np.maximum(memberships, SIZE_FLOOR)))


def soft_objective(memberships, exceptionality, gamma: float) -> float:
    """``|s|^gamma * phi`` with ``|s| = mean(s)`` and ``phi`` the s-weighted mean exceptionality."""
    s = np.asarray(memberships, dtype=float)
    ex = np.asarray(exceptionality, dtype=float)
    if s.shape != ex.shape:
        raise ShapeError("memberships and exceptionality differ in length")
    if not np.any(s > 0):
        raise ValueError("all memberships are zero; subgroup is degenerate")
    return float(np.mean(s * ex) * _size(s) ** (gamma - 1.0))


def full_objective(memberships, exceptionality_pop, predecessors: Sequence = (), gamma: float = 0.1) -> float:
    """Population term plus ``sum_g |s|^(gamma/g) * phi_g`` over predecessor exceptionalities.

    ``predecessors`` holds exceptionality vectors measured against each earlier
    subgroup's curve, or ``(curve, vector)`` pairs; ``g`` counts from 1.
    """
    total = soft_objective(memberships, exceptionality_pop, gamma)
    s = np.asarray(memberships, dtype=float)
    for g, pred in enumerate(predecessors, start=1):
        ex = pred[1] if isinstance(pred, tuple) else pred
        total += float(np.mean(s * np.asarray(ex)) * _size(s) ** (gamma / g - 1.0))
    return total


def _objective_terms(exc_pop, exc_preds, gamma):
    terms = [(np.asarray(exc_pop, dtype=float), gamma)]
    terms += [(np.asarray(ex, dtype=float), gamma / g) for g, ex in enumerate(exc_preds, start=1)]
    return terms


def loss_and_grad(theta: dict, X, temperature, terms, active=None):
    """Negated full objective and its gradient w.r.t. ``alpha``, ``beta``, ``weights``.

    ``X`` and ``theta`` live in the same coordinates. ``terms`` is a list of
    ``(exceptionality_vector, exponent)`` pairs. Features outside ``active``
    are held at zero weight.
    """
    alpha, beta, a = theta["alpha"], theta["beta"], theta["weights"]
    X = np.ascontiguousarray(X, dtype=float)
    n, p = X.shape
    w = np.maximum(a, 0.0)
    if active is not None:
        w = np.where(active, w, 0.0)
    total_w = float(w.sum())
    if total_w == 0:
        s = np.ones(n)
    else:
        e_lo = np.empty((n, p))
        e_hi = np.empty((n, p))
        H = _kernels.soft_rule_forward(X, alpha, beta, w, temperature, PI_FLOOR, e_lo, e_hi)
        s = total_w / H

    size = _size(s)
    loss = 0.0
    g_s = np.zeros(n)
    above = (s > SIZE_FLOOR).astype(float)
    for ex, e in terms:
        mean_se = float(np.mean(s * ex))
        loss -= mean_se * size ** (e - 1.0)
        g_s -= ex / n * size ** (e - 1.0) + mean_se * (e - 1.0) * size ** (e - 2.0) * above / n

    grads = {k: np.zeros(p) for k in ("alpha", "beta", "weights")}
    if total_w == 0:
        return loss, grads, s
    _kernels.soft_rule_backward(e_lo, e_hi, w, s, g_s, H, total_w, temperature, PI_FLOOR,
                                grads["alpha"], grads["beta"], grads["weights"])
    # ReLU: no weight gradient at or below zero
    grads["weights"][w <= 0] = 0.0
    return loss, grads, s
    # d s / d pi_ij = s^2 w_j / (W pi_ij^2), zero where pi is floored
    dpi = np.where(pi > PI_FLOOR, (s * s / total_w)[:, None] * w[None, :] * inv * inv, 0.0)
    gp = g_s[:, None] * dpi
    # d pi / d alpha = -pi^2 e^lo / tau ; d pi / d beta = pi^2 e^hi / tau
    grads["alpha"] = -(gp * np.exp(lo - 2 * log_d)).sum(axis=0) / temperature
    grads["beta"] = (gp * np.exp(hi - 2 * log_d)).sum(axis=0) / temperature
    # d s / d w_j = (1 - s q_ij) / H_i
    ds_dw = (1.0 - s[:, None] * inv) / H[:, None]
    gw = g_s @ ds_dw
    on = a > 0
    if active is not None:
        on &= active
    grads["weights"] = np.where(on, gw, 0.0)
    return loss, grads, s


def _normaliser(dataset: SurvivalDataset):
    lo = dataset.feature_ranges[:, 0]
    width = dataset.feature_ranges[:, 1] - lo
    constant = width <= 0
    return lo, np.where(constant, 1.0, width), ~constant


def predecessor_exceptionality(dataset, matrix, population, params: SoftRuleParams) -> np.ndarray:
    """Exceptionality against the soft-membership-weighted mean curve of a predecessor rule."""
    s = soft_rule(dataset.features, params)
    if s.sum() <= SIZE_FLOOR * dataset.n:
        ref = population
    else:
        ref = population_curve(matrix, weights=s)
    return exceptionality_vector(matrix, ref)


def learn_subgroup(
    dataset: SurvivalDataset,
    matrix: SurvivalMatrix,
    predecessors: Sequence[SoftRuleParams] = (),
    config: LearnerConfig = LearnerConfig(),
    gamma: Optional[float] = None,
    exceptionality: Optional[np.ndarray] = None,
    callback: Optional[Callable[[int, float, float], None]] = None,
) -> SoftRuleParams:
    """Train one soft rule from the all-covering initial box.

    Optimisation runs on features rescaled to [0, 1] by the dataset ranges; the
    returned parameters are in original units with ``scale`` set to the ranges.
    ``callback(epoch, loss, size)`` is called after every epoch.
    """
    if matrix.n != dataset.n:
        raise ShapeError("survival matrix rows differ from dataset size")
    gamma = config.gamma if gamma is None else gamma
    lo, width, active = _normaliser(dataset)
    p = dataset.p
    if not active.any():
        warnings.warn("all features are constant; returning the all-pass rule", RuntimeWarning)
        return SoftRuleParams(dataset.feature_ranges[:, 0], dataset.feature_ranges[:, 1],
                              np.zeros(p), config.initial_temperature / 4, width)

    Xn = (dataset.features - lo) / width
    population = population_curve(matrix)
    exc_pop = exceptionality if exceptionality is not None else exceptionality_vector(matrix, population)
    exc_preds = [predecessor_exceptionality(dataset, matrix, population, q) for q in predecessors]
    terms = _objective_terms(exc_pop, exc_preds, gamma)

    theta = {"alpha": np.zeros(p), "beta": np.ones(p), "weights": np.where(active, 1.0, 0.0)}
    opt = Adam(config.learning_rate)
    tau = config.initial_temperature
    half, three_q = config.epochs // 2, (3 * config.epochs) // 4
    for epoch in range(1, config.epochs + 1):
        loss, grads, s = loss_and_grad(theta, Xn, tau, terms, active)
        opt.step(theta, grads)
        if callback is not None:
            callback(epoch, loss, float(s.mean()))
        if epoch == half or epoch == three_q:
            tau /= 2
    return SoftRuleParams(
        alpha=lo + theta["alpha"] * width,
        beta=lo + theta["beta"] * width,
        weights=theta["weights"],
        temperature=tau,
        scale=width,
    )


def hard_exceptionality(mask, exceptionality) -> float:
    """Mean exceptionality over the members of a crisp subgroup (0 if empty)."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return 0.0
    return float(np.mean(np.asarray(exceptionality)[mask]))


def summarize(dataset, params: SoftRuleParams, exceptionality) -> SubgroupResult:
    rule = harden(params, dataset)
    mask = membership(rule, dataset.features)
    km = None
    if mask.any() and dataset.events[mask].any():
        km = kaplan_meier(dataset.times, dataset.events, mask)
    return SubgroupResult(params, rule, mask, hard_exceptionality(mask, exceptionality), km)


def model_matrix(dataset: SurvivalDataset, forest_config: ForestConfig) -> SurvivalMatrix:
    return predict_matrix(fit_forest(dataset, forest_config), dataset)


def discover(
    dataset: SurvivalDataset,
    config: LearnerConfig = LearnerConfig(),
    forest_config: ForestConfig = ForestConfig(),
    matrix: Optional[SurvivalMatrix] = None,
    callback=None,
) -> list:
    """Fit the population model (unless ``matrix`` is given) and learn ``n_subgroups`` rules."""
    if matrix is None:
        matrix = model_matrix(dataset, forest_config)
    exc = exceptionality_vector(matrix, population_curve(matrix))
    results, found = [], []
    gamma = config.gamma
    for k in range(config.n_subgroups):
        cb = None if callback is None else (lambda e, l, s, k=k: callback(k, e, l, s))
        params = learn_subgroup(dataset, matrix, found, config, gamma=gamma,
                                exceptionality=exc, callback=cb)
        found.append(params)
        results.append(summarize(dataset, params, exc))
        log.info("subgroup %d: size %d, exceptionality %.4f", k, results[-1].size,
                 results[-1].exceptionality)
        gamma *= config.gamma_decay
    return results
