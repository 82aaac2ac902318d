"""Soft interval conditions, their harmonic-mean conjunction, and crisp rules.

A soft condition is a smooth box indicator

    pi(x; alpha, beta, tau) = 1 / (1 + exp((alpha - x) / tau) + exp((x - beta) / tau))

evaluated through log-sum-exp so that no exponential overflows. Conditions are
combined by a weighted harmonic mean whose weights pass through a ReLU, and a
trained soft rule is hardened into closed intervals on the active features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ShapeError

PI_FLOOR = 1e-12


@dataclass(frozen=True)
class SoftRuleParams:
    """Learnable bounds, weights and temperature of a soft conjunctive rule.

    ``scale`` is a per-feature width that divides the temperature, so a rule
    learned in min-max normalised coordinates evaluates identically on raw
    features. It defaults to ones.
    """

    alpha: np.ndarray
    beta: np.ndarray
    weights: np.ndarray
    temperature: float
    scale: Optional[np.ndarray] = None

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float).ravel()
        b = np.asarray(self.beta, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        s = np.ones_like(a) if self.scale is None else np.asarray(self.scale, dtype=float).ravel()
        if not (a.shape == b.shape == w.shape == s.shape):
            raise ShapeError("alpha, beta, weights and scale must share length p")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if np.any(s <= 0):
            raise ValueError("scale entries must be positive")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "scale", s)
        object.__setattr__(self, "temperature", float(self.temperature))

    @property
    def p(self) -> int:
        return self.alpha.size

    def effective_weights(self) -> np.ndarray:
        return np.maximum(self.weights, 0.0)

    def replace(self, **changes) -> "SoftRuleParams":
        fields = dict(alpha=self.alpha, beta=self.beta, weights=self.weights,
                      temperature=self.temperature, scale=self.scale)
        fields.update(changes)
        return SoftRuleParams(**fields)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "weights": self.weights.tolist(),
            "temperature": self.temperature,
            "scale": self.scale.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SoftRuleParams":
        return cls(d["alpha"], d["beta"], d["weights"], d["temperature"], d.get("scale"))


@dataclass(frozen=True)
class Condition:
    """``low <= x[feature] <= high``; ``None`` leaves that side unbounded."""

    feature: int
    low: Optional[float] = None
    high: Optional[float] = None
    empty: bool = False  # learned bounds crossed; selects nobody

    def __post_init__(self):
        if self.low is not None and self.high is not None and self.low > self.high:
            raise ValueError(f"condition on feature {self.feature}: low > high")

    def holds(self, column: np.ndarray) -> np.ndarray:
        if self.empty:
            return np.zeros(column.shape, dtype=bool)
        ok = np.ones(column.shape, dtype=bool)
        if self.low is not None:
            ok &= column >= self.low
        if self.high is not None:
            ok &= column <= self.high
        return ok


@dataclass(frozen=True)
class HardRule:
    """Conjunction of interval conditions over distinct features."""

    conditions: tuple = field(default_factory=tuple)

    def __post_init__(self):
        conds = tuple(self.conditions)
        feats = [c.feature for c in conds]
        if len(set(feats)) != len(feats):
            raise ValueError("conditions must be on distinct features")
        object.__setattr__(self, "conditions", conds)

    @property
    def is_population(self) -> bool:
        return not self.conditions

    @property
    def has_empty(self) -> bool:
        return any(c.empty for c in self.conditions)

    def render(self, names: Sequence[str], digits: int = 2) -> str:
        """Human-readable text such as ``age ≥ 47.43 ∧ wage ∈ [4.20, 7.36]``."""
        if not self.conditions:
            return "population"
        parts = []
        for c in self.conditions:
            name = names[c.feature]
            if c.empty:
                parts.append(f"{name} ∈ ∅")
            elif c.low is not None and c.high is not None:
                parts.append(f"{name} ∈ [{c.low:.{digits}f}, {c.high:.{digits}f}]")
            elif c.low is not None:
                parts.append(f"{name} ≥ {c.low:.{digits}f}")
            else:
                parts.append(f"{name} ≤ {c.high:.{digits}f}")
        return " ∧ ".join(parts)

    def to_dict(self, names: Sequence[str]) -> dict:
        return {
            "conditions": [
                {"feature": names[c.feature], "index": c.feature, "low": c.low,
                 "high": c.high, **({"empty": True} if c.empty else {})}
                for c in self.conditions
            ]
        }

    @classmethod
    def from_dict(cls, d: dict, names: Sequence[str]) -> "HardRule":
        lookup = {name: j for j, name in enumerate(names)}
        conds = []
        for c in d["conditions"]:
            j = lookup[c["feature"]] if c.get("feature") in lookup else int(c["index"])
            conds.append(Condition(j, c.get("low"), c.get("high"), bool(c.get("empty", False))))
        return cls(tuple(conds))


def _log_denominator(x, alpha, beta, tau):
    lo = (alpha - x) / tau
    hi = (x - beta) / tau
    return lo, hi, np.logaddexp(0.0, np.logaddexp(lo, hi))


def soft_condition(x, alpha, beta, temperature):
    """Smooth membership of ``x`` in ``[alpha, beta]``, strictly inside (0, 1)."""
    args = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, alpha, beta)))
    if not all(np.all(np.isfinite(a)) for a in args) or not math.isfinite(temperature):
        raise ValueError("soft_condition arguments must be finite")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    _, _, log_d = _log_denominator(*args, temperature)
    out = np.exp(-log_d)
    return out if out.ndim else float(out)


def condition_matrix(X, params: SoftRuleParams):
    """Soft condition values of every subject and feature, shape (n, p)."""
    X = np.asarray(X, dtype=float)
    _, _, log_d = _log_denominator(X, params.alpha, params.beta, params.temperature * params.scale)
    return np.exp(-log_d)


def harmonic_conjunction(pi, weights):
    """Weighted harmonic mean of rows of ``pi`` under ReLU weights; 1 if no weight is active."""
    w = np.maximum(np.asarray(weights, dtype=float), 0.0)
    total = w.sum()
    pi = np.asarray(pi, dtype=float)
    if total == 0:
        return np.ones(pi.shape[:-1]) if pi.ndim > 1 else 1.0
    inv = 1.0 / np.maximum(pi, PI_FLOOR)
    return total / (inv @ w)


def soft_rule(x, params: SoftRuleParams):
    """Soft membership in [0, 1] for one subject (1-D ``x``) or many (2-D ``x``)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.p:
        raise ShapeError(f"expected {params.p} features, got {x.shape[-1]}")
    return harmonic_conjunction(condition_matrix(x, params), params.weights)


def harden(params: SoftRuleParams, feature_ranges, activity_threshold: float = 0.1) -> HardRule:
    """Crisp rule from the conditions whose ReLU weight exceeds ``activity_threshold``.

    Bounds at or beyond the observed feature range are dropped (``None``); a
    condition spanning the whole range disappears. Crossed bounds yield an
    empty condition.

    ``feature_ranges`` may also be a :class:`SurvivalDataset`.
    """
    ranges = getattr(feature_ranges, "feature_ranges", feature_ranges)
    ranges = np.asarray(ranges, dtype=float).reshape(params.p, 2)
    conds = []
    for j in np.flatnonzero(params.effective_weights() > activity_threshold):
        lo_j, hi_j = ranges[j]
        a, b = float(params.alpha[j]), float(params.beta[j])
        if a > b:
            mid = (a + b) / 2
            conds.append(Condition(int(j), mid, mid, empty=True))
            continue
        low = None if a <= lo_j else a
        high = None if b >= hi_j else b
        if low is None and high is None:
            continue
        conds.append(Condition(int(j), low, high))
    return HardRule(tuple(conds))


def membership(rule: HardRule, features) -> np.ndarray:
    """Boolean mask of the rows satisfying every condition of ``rule``."""
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ShapeError("features must be a 2-D matrix")
    mask = np.ones(X.shape[0], dtype=bool)
    for c in rule.conditions:
        if not 0 <= c.feature < X.shape[1]:
            raise ShapeError(f"condition feature {c.feature} out of range for p={X.shape[1]}")
        mask &= c.holds(X[:, c.feature])
    return mask
