"""Tabular time-to-event data: loading, validation and the canonical container."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import DataValidationError, ParseError

_TRUE = {"1", "true", "1.0"}
_FALSE = {"0", "false", "0.0"}


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SurvivalDataset:
    """Covariates plus right-censored outcomes for ``n`` subjects.

    Parameters
    ----------
    features : array-like, shape (n, p)
        Real-valued covariates in their original units.
    times : array-like, shape (n,)
        Non-negative observed times.
    events : array-like, shape (n,)
        1 if the event was observed at ``times[i]``, 0 if censored there.
    feature_names : sequence of str, optional
        Defaults to ``x0 .. x{p-1}``.
    feature_ranges : array-like, shape (p, 2), optional
        Per-feature ``(min, max)``; computed from ``features`` when omitted.
    """

    features: np.ndarray
    times: np.ndarray
    events: np.ndarray
    feature_names: tuple = ()
    feature_ranges: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise DataValidationError("features must be a 2-D matrix")
        n, p = X.shape
        if n < 1 or p < 1:
            raise DataValidationError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
        t = np.asarray(self.times, dtype=float).ravel()
        e_raw = np.asarray(self.events).ravel()
        if t.shape[0] != n or e_raw.shape[0] != n:
            raise DataValidationError(
                f"length mismatch: features {n}, times {t.shape[0]}, events {e_raw.shape[0]}"
            )
        if not np.all(np.isfinite(X)):
            raise DataValidationError("features contain missing or non-finite values")
        if not np.all(np.isfinite(t)):
            raise DataValidationError("times contain missing or non-finite values")
        if np.any(t < 0):
            raise DataValidationError("times must be non-negative")
        if not np.all(np.isin(e_raw, (0, 1))):
            bad = e_raw[~np.isin(e_raw, (0, 1))][0]
            raise DataValidationError(f"event indicators must be 0 or 1, found {bad!r}")
        e = e_raw.astype(np.int8)
        if not e.any():
            raise DataValidationError("dataset has no observed events")

        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(p))
        if len(names) != p:
            raise DataValidationError(f"{len(names)} feature names for {p} features")
        if self.feature_ranges is None:
            ranges = np.column_stack([X.min(axis=0), X.max(axis=0)])
        else:
            ranges = np.asarray(self.feature_ranges, dtype=float).reshape(p, 2)
            if np.any(ranges[:, 0] > ranges[:, 1]):
                raise DataValidationError("feature range with min > max")

        object.__setattr__(self, "features", _frozen(X, float))
        object.__setattr__(self, "times", _frozen(t, float))
        object.__setattr__(self, "events", _frozen(e, np.int8))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "feature_ranges", _frozen(ranges, float))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def with_outcomes(self, times, events) -> "SurvivalDataset":
        """Same covariates and ranges, new outcome vectors."""
        return SurvivalDataset(self.features, times, events, self.feature_names, self.feature_ranges)

    def content_hash(self) -> str:
        """SHA-256 over covariates, outcomes and names; stable across processes."""
        h = hashlib.sha256()
        for a in (self.features, self.times, self.events.astype(np.int64)):
            h.update(str(a.shape).encode())
            h.update(np.ascontiguousarray(a).tobytes())
        h.update("\x1f".join(self.feature_names).encode())
        return h.hexdigest()


def unique_event_times(dataset: SurvivalDataset) -> np.ndarray:
    """Sorted distinct times at which at least one event was observed."""
    return np.unique(dataset.times[dataset.events == 1])


def _to_float(cells: pd.Series) -> pd.Series:
    """Exact decimal-to-double conversion; unparseable cells become NaN."""
    # pd.to_numeric's fast parser is not correctly rounded, so it only flags bad cells
    ok = pd.to_numeric(cells, errors="coerce").notna()
    out = pd.Series(np.nan, index=cells.index)
    out[ok] = cells[ok].astype(float)
    return out


def _parse_events(col: pd.Series, name: str) -> np.ndarray:
    out = np.empty(len(col), dtype=np.int8)
    for i, raw in enumerate(col):
        v = raw.strip().lower()
        if v in _TRUE:
            out[i] = 1
        elif v in _FALSE:
            out[i] = 0
        elif v == "":
            raise DataValidationError(f"missing event indicator at row {i + 2}, column {name!r}")
        else:
            raise DataValidationError(
                f"event indicator must be one of 0/1/true/false, got {raw!r} "
                f"at row {i + 2}, column {name!r}"
            )
    return out


def load_csv(
    path: str | Path,
    time_col: str,
    event_col: str,
    one_hot: bool = False,
    drop: Sequence[str] = (),
) -> SurvivalDataset:
    """Read a UTF-8 comma-separated file with a header row.

    Every column other than ``time_col``, ``event_col`` and ``drop`` becomes a
    feature. Non-numeric columns are expanded into ``col=value`` indicator
    columns when ``one_hot`` is set and rejected otherwise. Missing cells are
    rejected. Row numbers in error messages count the header as row 1.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    for col in (time_col, event_col, *drop):
        if col not in raw.columns:
            raise DataValidationError(f"column {col!r} not found in {path.name}")

    times = _to_float(raw[time_col].str.strip())
    if times.isna().any():
        i = int(np.flatnonzero(times.isna().to_numpy())[0])
        raise ParseError(
            f"cannot parse time {raw[time_col].iloc[i]!r} at row {i + 2}, column {time_col!r}",
            row=i + 2,
            column=time_col,
        )
    events = _parse_events(raw[event_col], event_col)

    columns, names = [], []
    skip = {time_col, event_col, *drop}
    for col in raw.columns:
        if col in skip:
            continue
        cells = raw[col].str.strip()
        empty = (cells == "").to_numpy()
        if empty.any():
            i = int(np.flatnonzero(empty)[0])
            raise DataValidationError(f"missing value at row {i + 2}, column {col!r}")
        values = _to_float(cells)
        bad = values.isna().to_numpy()
        if not bad.any():
            columns.append(values.to_numpy(dtype=float))
            names.append(col)
        elif one_hot:
            for level in sorted(cells.unique()):
                columns.append((cells == level).to_numpy(dtype=float))
                names.append(f"{col}={level}")
        else:
            i = int(np.flatnonzero(bad)[0])
            raise ParseError(
                f"non-numeric value {cells.iloc[i]!r} at row {i + 2}, column {col!r} "
                "(enable one-hot encoding for categorical columns)",
                row=i + 2,
                column=col,
            )
    if not columns:
        raise DataValidationError("no feature columns left after removing time/event columns")
    return SurvivalDataset(np.column_stack(columns), times.to_numpy(dtype=float), events, names)


def save_csv(dataset: SurvivalDataset, path: str | Path, time_col: str = "time",
             event_col: str = "event") -> None:
    """Write ``dataset`` in the layout :func:`load_csv` reads, with exact float text."""
    frame = pd.DataFrame(dataset.features, columns=list(dataset.feature_names))
    frame[time_col] = dataset.times
    frame[event_col] = dataset.events.astype(int)
    frame.to_csv(path, index=False, float_format="%.17g")
