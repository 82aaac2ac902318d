"""Marginal survival estimation and curve comparison.

Kaplan-Meier curves with log-log Greenwood bands, the two-sample logrank
statistic, trapezoidal integration of absolute curve differences and the
restricted mean survival time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import EstimationError, GridError, ShapeError


@dataclass(frozen=True)
class StepCurve:
    """Right-continuous, non-increasing survival curve on an ascending grid.

    ``values[k]`` holds on ``[grid[k], grid[k+1])``; the curve is 1 before
    ``grid[0]``. ``lower``/``upper`` are optional pointwise confidence bounds.
    """

    grid: np.ndarray
    values: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape:
            raise ShapeError("grid and values must be 1-D vectors of equal length")
        if g.size and np.any(np.diff(g) <= 0):
            raise GridError("curve grid must be strictly ascending")
        if np.any(v < -1e-12) or np.any(v > 1 + 1e-12):
            raise EstimationError("survival values must lie in [0, 1]")
        if np.any(np.diff(v) > 1e-12):
            raise EstimationError("survival values must be non-increasing")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", np.clip(v, 0.0, 1.0))
        for name in ("lower", "upper"):
            b = getattr(self, name)
            if b is not None:
                b = np.asarray(b, dtype=float)
                if b.shape != g.shape:
                    raise ShapeError(f"{name} band length differs from grid")
                object.__setattr__(self, name, b)

    def __call__(self, t):
        """Evaluate the step function at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.grid, t, side="right") - 1
        out = np.where(idx >= 0, self.values[np.clip(idx, 0, None)], 1.0)
        return out if out.ndim else float(out)

    def to_tsv(self, path: str | Path) -> None:
        """Write columns ``x y y_c0 y_c1`` (time, survival, lower, upper)."""
        lo = self.values if self.lower is None else self.lower
        hi = self.values if self.upper is None else self.upper
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(["x", "y", "y_c0", "y_c1"])
            for row in zip(self.grid, self.values, lo, hi):
                w.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_tsv(cls, path: str | Path) -> "StepCurve":
        data = np.loadtxt(path, delimiter="\t", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3])


def product_limit(times, events, weights=None):
    """Product-limit estimate at the distinct event times.

    Subjects censored at an event time are still at risk at that time.
    ``weights`` act as integer-like frequency weights (bootstrap copies).

    Returns
    -------
    event_times, survival, greenwood : ndarray
        ``greenwood`` is the running sum of ``d / (r (r - d))``; it is ``inf``
        from the first time the risk set is exhausted.
    """
    t = np.asarray(times, dtype=float)
    d = np.asarray(events, dtype=float)
    w = np.ones_like(t) if weights is None else np.asarray(weights, dtype=float)
    order = np.argsort(t, kind="stable")
    t, d, w = t[order], d[order], w[order]
    uniq, start = np.unique(t, return_index=True)
    at_risk = np.cumsum(w[::-1])[::-1][start]
    deaths = np.add.reduceat(d * w, start)
    keep = deaths > 0
    uniq, at_risk, deaths = uniq[keep], at_risk[keep], deaths[keep]
    surv = np.cumprod(1.0 - deaths / at_risk)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(at_risk > deaths, deaths / (at_risk * (at_risk - deaths)), np.inf)
    return uniq, surv, np.cumsum(term)


def kaplan_meier(times, events, mask=None, conf_level: float = 0.95) -> StepCurve:
    """Kaplan-Meier curve of the (optionally masked) subjects with 95% bands.

    Bands use Greenwood's variance on the log(-log S) scale, which keeps them
    inside [0, 1].
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(events)
    if t.shape != e.shape:
        raise ShapeError("times and events must have equal length")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != t.shape:
            raise ShapeError("mask length differs from times")
        t, e = t[mask], e[mask]
    if t.size == 0:
        raise EstimationError("cannot estimate a survival curve for an empty selection")
    if not np.any(e == 1):
        raise EstimationError("selection contains no events; survival curve is degenerate")

    grid, surv, gw = product_limit(t, e == 1)
    z = stats.norm.ppf(0.5 + conf_level / 2.0)
    lower = np.zeros_like(surv)
    upper = np.zeros_like(surv)
    ok = (surv > 0) & (surv < 1) & np.isfinite(gw)
    log_s = np.log(surv[ok])
    se = np.sqrt(gw[ok]) / np.abs(log_s)
    lower[ok] = surv[ok] ** np.exp(z * se)
    upper[ok] = surv[ok] ** np.exp(-z * se)
    return StepCurve(grid, surv, lower, upper)


def logrank_statistic(mask, times, events) -> float:
    """Chi-square logrank statistic of the masked group against its complement."""
    mask = np.asarray(mask, dtype=bool)
    t = np.asarray(times, dtype=float)
    e = np.asarray(events) == 1
    if not (mask.shape == t.shape == e.shape):
        raise ShapeError("mask, times and events must have equal length")
    if mask.all() or not mask.any():
        raise EstimationError("logrank needs a non-empty proper subset")

    order = np.argsort(t, kind="stable")
    t, e, g = t[order], e[order], mask[order]
    uniq, start = np.unique(t, return_index=True)
    r = (t.size - start).astype(float)
    r1 = np.cumsum(g[::-1])[::-1][start].astype(float)
    d = np.add.reduceat(e.astype(float), start)
    d1 = np.add.reduceat((e & g).astype(float), start)
    use = d > 0
    r, r1, d, d1 = r[use], r1[use], d[use], d1[use]
    expected = d * r1 / r
    with np.errstate(divide="ignore", invalid="ignore"):
        var = np.where(r > 1, d * (r1 / r) * (1 - r1 / r) * (r - d) / (r - 1), 0.0)
    v = var.sum()
    if v <= 0:
        return 0.0
    return float((d1.sum() - expected.sum()) ** 2 / v)


def trapezoid_weights(grid) -> np.ndarray:
    """Weights ``w`` with ``sum(w * f) == trapezoid rule of f`` on ``grid``."""
    g = np.asarray(grid, dtype=float)
    w = np.zeros_like(g)
    if g.size < 2:
        return w
    dt = np.diff(g)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


def trapezoid_abs_diff(values_a, values_b, grid) -> float:
    """Trapezoidal integral of ``|a - b|`` over ``grid``."""
    a = np.asarray(values_a, dtype=float)
    b = np.asarray(values_b, dtype=float)
    g = np.asarray(grid, dtype=float)
    if not (a.shape == b.shape == g.shape) or a.ndim != 1:
        raise ShapeError("values_a, values_b and grid must be 1-D vectors of equal length")
    if g.size < 2:
        return 0.0
    dt = np.diff(g)
    if np.any(dt <= 0):
        raise GridError("integration grid must be strictly ascending")
    diff = np.abs(a - b)
    return float(np.sum(dt / 2 * (diff[:-1] + diff[1:])))


def restricted_mean(curve: StepCurve, horizon: float) -> float:
    """Area under the step curve on ``[0, horizon]`` (RMST)."""
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    knots = np.concatenate([[0.0], curve.grid[curve.grid < horizon], [horizon]])
    heights = np.concatenate([[1.0], curve.values[curve.grid < horizon]])
    return float(np.sum(np.diff(knots) * heights))


def mean_shift(times, events, mask) -> float:
    """``|RMST(masked) - RMST(all)|`` with the horizon at the largest observed time."""
    t = np.asarray(times, dtype=float)
    horizon = float(t.max())
    if horizon <= 0:
        return 0.0
    sub = kaplan_meier(t, events, mask)
    pop = kaplan_meier(t, events)
    return abs(restricted_mean(sub, horizon) - restricted_mean(pop, horizon))
