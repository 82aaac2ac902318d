"""On-disk cache of fitted forests, survival matrices and null models.

Entries are keyed by the dataset content hash plus the configuration that
produced them. ``SURVGROUP_CACHE_DIR`` overrides the default location.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import pickle
from pathlib import Path

import numpy as np

from .rsf import ForestConfig, SurvivalMatrix, fit_forest, predict_matrix

log = logging.getLogger(__name__)

CACHE_VERSION = 1
# matrices above this many entries are recomputed from the cached forest instead
MAX_MATRIX_ENTRIES = 20_000_000


def cache_dir() -> Path:
    return Path(os.environ.get("SURVGROUP_CACHE_DIR", "~/.cache/survgroup")).expanduser()


def cache_key(dataset, *parts) -> str:
    h = hashlib.sha256()
    h.update(f"v{CACHE_VERSION}".encode())
    h.update(dataset.content_hash().encode())
    for part in parts:
        h.update(json.dumps(part, sort_keys=True).encode())
    return h.hexdigest()[:32]


def _load_pickle(path):
    try:
        with open(path, "rb") as fh:
            payload = pickle.load(fh)
    except (OSError, pickle.UnpicklingError, EOFError):
        return None
    if payload.get("version") != CACHE_VERSION:
        return None
    return payload["data"]


def _dump_pickle(path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        pickle.dump({"version": CACHE_VERSION, "data": data}, fh, protocol=pickle.HIGHEST_PROTOCOL)
    os.replace(tmp, path)


def load_or_fit_matrix(dataset, config: ForestConfig, use_cache: bool = True):
    """Survival matrix for ``dataset``; returns ``(matrix, fitted)`` where ``fitted``
    is False when the forest came from the cache."""
    if not use_cache:
        return predict_matrix(fit_forest(dataset, config), dataset), True
    key = cache_key(dataset, config.to_dict())
    root = cache_dir()
    mpath = root / f"matrix-{key}.npz"
    if mpath.exists():
        try:
            with np.load(mpath) as z:
                return SurvivalMatrix(z["values"], z["grid"]), False
        except (OSError, ValueError, KeyError):
            log.warning("ignoring unreadable cache entry %s", mpath)
    fpath = root / f"forest-{key}.pkl"
    forest = _load_pickle(fpath) if fpath.exists() else None
    fitted = forest is None
    if fitted:
        forest = fit_forest(dataset, config)
        _dump_pickle(fpath, forest)
    matrix = predict_matrix(forest, dataset)
    if matrix.values.size <= MAX_MATRIX_ENTRIES:
        tmp = root / f"matrix-{key}.tmp.npz"
        np.savez(tmp, values=matrix.values, grid=matrix.grid)
        os.replace(tmp, mpath)
    return matrix, fitted


def load_json(name: str):
    path = cache_dir() / name
    if not path.exists():
        return None
    with open(path) as fh:
        return json.load(fh)


def save_json(name: str, data) -> None:
    path = cache_dir() / name
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(data, fh)
