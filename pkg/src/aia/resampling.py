"""Imbalance handling: SMOTE oversampling and edited-nearest-neighbor cleaning.

Both operate on already-encoded numeric arrays. The conventional combination
is ENN first (drop rows contradicting their neighborhood) then SMOTE
(balance every class up to the majority count); protocols apply them to
training folds only.
"""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np


def _neighbor_order(X: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Indices of X sorted by (distance to query, index)."""
    d2 = ((X - query) ** 2).sum(axis=1)
    return np.lexsort((np.arange(len(X)), d2))


def smote_oversample(X: np.ndarray, y: Sequence, k: int = 5, seed: int = 0,
                     classes: Sequence | None = None):
    """Balance all classes up to the majority count with synthetic rows.

    Each synthetic row lies on the segment between a minority row and one of
    its k nearest same-class neighbors (uniform interpolation coefficient).
    The original rows come back unchanged as a prefix. A class with a single
    member cannot interpolate and falls back to duplication with a warning.
    """
    X = np.asarray(X, dtype=float)
    y_arr = np.asarray(list(y), dtype=object)
    if len(y_arr) == 0:
        from .errors import EmptyInput

        raise EmptyInput("smote_oversample needs at least one row")
    class_list = list(classes) if classes is not None else sorted(set(y_arr), key=str)
    counts = {c: int((y_arr == c).sum()) for c in class_list}
    observed = [c for c in class_list if counts[c] > 0]
    majority = max(counts[c] for c in observed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2654435]))
    new_rows: list[np.ndarray] = []
    new_labels: list = []
    for cls in observed:
        need = majority - counts[cls]
        if need <= 0:
            continue
        members = X[y_arr == cls]
        n_cls = len(members)
        if n_cls < 2:
            warnings.warn(
                f"class {cls!r} has {n_cls} member(s); duplicating instead of "
                "interpolating", RuntimeWarning, stacklevel=2)
            for j in range(need):
                new_rows.append(members[j % n_cls].copy())
                new_labels.append(cls)
            continue
        kk = min(k, n_cls - 1)
        neighbor_ids = np.empty((n_cls, kk), dtype=int)
        for i in range(n_cls):
            order = _neighbor_order(members, members[i])
            neighbor_ids[i] = order[order != i][:kk]
        for j in range(need):
            base = j % n_cls
            nbr = neighbor_ids[base][rng.integers(0, kk)]
            u = rng.random()
            new_rows.append(members[base] + u * (members[nbr] - members[base]))
            new_labels.append(cls)
    if not new_rows:
        return X.copy(), y_arr.copy()
    X_out = np.vstack([X, np.vstack(new_rows)])
    y_out = np.concatenate([y_arr, np.asarray(new_labels, dtype=object)])
    return X_out, y_out


def enn_undersample(X: np.ndarray, y: Sequence, k: int = 3,
                    classes: Sequence | None = None):
    """Wilson editing: drop rows whose k nearest neighbors outvote their label.

    All removal decisions are made against the original set. Neighbor ties
    resolve by index; majority-vote ties resolve toward the earlier class in
    `classes` order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    X = np.asarray(X, dtype=float)
    y_arr = np.asarray(list(y), dtype=object)
    n = len(y_arr)
    class_list = list(classes) if classes is not None else sorted(set(y_arr), key=str)
    if n <= k:
        return X.copy(), y_arr.copy()
    code = {c: i for i, c in enumerate(class_list)}
    y_codes = np.array([code[v] for v in y_arr])
    keep = np.ones(n, dtype=bool)
    block = 256
    for start in range(0, n, block):
        stop = min(start + block, n)
        chunk = X[start:stop]
        d2 = ((chunk[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
        for local, i in enumerate(range(start, stop)):
            order = np.lexsort((np.arange(n), d2[local]))
            neighbors = [j for j in order if j != i][:k]
            votes = np.bincount(y_codes[neighbors], minlength=len(class_list))
            majority = int(np.argmax(votes))  # tie -> earliest class
            if majority != y_codes[i]:
                keep[i] = False
    return X[keep].copy(), y_arr[keep].copy()
