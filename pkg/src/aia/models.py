"""Classifier suite, feature selection, and hyperparameter search.

Five algorithms (logistic regression, decision tree, random forest, a
one-hidden-layer MLP, and a stratified dummy baseline), all trained through
one preprocessing recipe: one-hot encoding of categoricals, min-max scaling
of numerics, and an optional univariate feature-selection step, always
fitted on training rows only. Everything is deterministic given
(data, hyperparams, seed).
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import stats
from .errors import DegenerateInput, SchemaMismatch
from .matrix import FeatureMatrix
from .metrics import metrics

ALGORITHMS = ("logistic_regression", "decision_tree", "random_forest",
              "mlp", "dummy_stratified")

# Paper gives no grids; these defaults are recorded in every report.
DEFAULT_GRIDS: dict[str, dict[str, list]] = {
    "logistic_regression": {"l2": [0.01, 0.1, 1.0, 10.0]},
    "decision_tree": {"max_depth": [3, 5, 10, None], "min_leaf": [1, 5, 20]},
    "random_forest": {"n_trees": [100, 300], "max_depth": [3, 5, 10, None],
                      "min_leaf": [1]},
    "mlp": {"hidden": [32, 128], "lr": [1e-2, 1e-3]},
    "dummy_stratified": {},
}

DEFAULT_HYPERPARAMS: dict[str, dict] = {
    "logistic_regression": {"l2": 1.0},
    "decision_tree": {"max_depth": None, "min_leaf": 1},
    "random_forest": {"n_trees": 100, "max_depth": None, "min_leaf": 1},
    "mlp": {"hidden": 32, "lr": 1e-2, "epochs": 200},
    "dummy_stratified": {},
}


# ---------------------------------------------------------------------------
# Preprocessing recipe
# ---------------------------------------------------------------------------


@dataclass
class Recipe:
    selected: list[str]
    numeric_ranges: dict[str, tuple[float, float]]
    categories: dict[str, list[str]]
    dropped_constant: list[str]

    def encoded_names(self) -> list[str]:
        names: list[str] = []
        for col in self.selected:
            if col in self.categories:
                names.extend(f"{col}={c}" for c in self.categories[col])
            else:
                names.append(col)
        return names


def fit_recipe(matrix: FeatureMatrix, row_idx: Sequence[int],
               selected: Sequence[str] | None = None) -> Recipe:
    """Fit encoding/scaling state on the given training rows only."""
    names = list(selected) if selected is not None else [c.name for c in matrix.columns]
    numeric_ranges: dict[str, tuple[float, float]] = {}
    categories: dict[str, list[str]] = {}
    kept: list[str] = []
    dropped: list[str] = []
    for name in names:
        col = matrix.columns[matrix.column_index(name)]
        values = [matrix.rows[i][matrix.column_index(name)] for i in row_idx]
        if col.kind == "categorical":
            cats = sorted(set(values), key=str)
            if len(cats) < 2:
                dropped.append(name)
                continue
            categories[name] = cats
        else:
            lo = min(float(v) for v in values)
            hi = max(float(v) for v in values)
            if hi <= lo:
                dropped.append(name)
                continue
            numeric_ranges[name] = (lo, hi)
        kept.append(name)
    if dropped:
        warnings.warn(f"dropped constant features: {dropped}", RuntimeWarning,
                      stacklevel=2)
    return Recipe(selected=kept, numeric_ranges=numeric_ranges,
                  categories=categories, dropped_constant=dropped)


def transform(matrix: FeatureMatrix, row_idx: Sequence[int], recipe: Recipe) -> np.ndarray:
    """Encode rows through a fitted recipe; unseen categories encode to zeros."""
    n = len(row_idx)
    blocks: list[np.ndarray] = []
    for name in recipe.selected:
        idx = matrix.column_index(name)
        values = [matrix.rows[i][idx] for i in row_idx]
        if name in recipe.categories:
            cats = recipe.categories[name]
            block = np.zeros((n, len(cats)))
            pos = {c: j for j, c in enumerate(cats)}
            for r, v in enumerate(values):
                j = pos.get(v)
                if j is not None:
                    block[r, j] = 1.0
        else:
            lo, hi = recipe.numeric_ranges[name]
            block = (np.array([float(v) for v in values]) - lo) / (hi - lo)
            block = block.reshape(n, 1)
        blocks.append(block)
    if not blocks:
        return np.zeros((n, 0))
    return np.hstack(blocks)


# ---------------------------------------------------------------------------
# Algorithm internals (numpy arrays in, class-probability matrices out)
# ---------------------------------------------------------------------------


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _fit_logistic(X: np.ndarray, y_codes: np.ndarray, K: int, l2: float,
                  tol: float = 1e-6, max_iter: int = 5000):
    """Full-batch gradient descent with Armijo backtracking line search."""
    n, d = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    W = np.zeros((d + 1, K))
    Y = np.zeros((n, K))
    Y[np.arange(n), y_codes] = 1.0

    def loss_grad(W):
        P = _softmax(Xb @ W)
        ll = -np.log(np.clip(P[np.arange(n), y_codes], 1e-300, None)).mean()
        reg = 0.5 * l2 * float((W[:-1] ** 2).sum()) / n
        G = Xb.T @ (P - Y) / n
        G[:-1] += l2 * W[:-1] / n
        return ll + reg, G

    converged = False
    value, grad = loss_grad(W)
    for _ in range(max_iter):
        gnorm = float(np.abs(grad).max())
        if gnorm < tol:
            converged = True
            break
        step = 1.0
        g2 = float((grad ** 2).sum())
        for _ in range(60):
            W_new = W - step * grad
            value_new, grad_new = loss_grad(W_new)
            if value_new <= value - 1e-4 * step * g2:
                break
            step *= 0.5
        if value - value_new < 1e-12 and gnorm < 1e-4:
            W, value, grad = W_new, value_new, grad_new
            converged = True
            break
        W, value, grad = W_new, value_new, grad_new
    return W, converged


def _predict_logistic(params: dict, X: np.ndarray) -> np.ndarray:
    W = np.asarray(params["weights"])
    Xb = np.hstack([X, np.ones((X.shape[0], 1))])
    return _softmax(Xb @ W)


def _gini_children(left: np.ndarray, right: np.ndarray,
                   nl: np.ndarray, nr: np.ndarray) -> np.ndarray:
    gl = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
    gr = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
    return (nl * gl + nr * gr) / (nl + nr)


def _best_split(X: np.ndarray, y_codes: np.ndarray, idx: np.ndarray,
                features: np.ndarray, K: int, min_leaf: int):
    n = len(idx)
    counts = np.bincount(y_codes[idx], minlength=K).astype(float)
    parent_gini = 1.0 - ((counts / n) ** 2).sum()
    best = None
    for f in features:
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sy = y_codes[idx][order]
        onehot = np.zeros((n, K))
        onehot[np.arange(n), sy] = 1.0
        prefix = np.cumsum(onehot, axis=0)
        cut = np.arange(min_leaf - 1, n - min_leaf)
        if len(cut) == 0:
            continue
        movable = sv[cut] < sv[cut + 1]
        cut = cut[movable]
        if len(cut) == 0:
            continue
        left = prefix[cut]
        right = counts - left
        nl = (cut + 1).astype(float)
        nr = n - nl
        weighted = _gini_children(left, right, nl, nr)
        j = int(np.argmin(weighted))
        if weighted[j] < parent_gini - 1e-12:
            if best is None or weighted[j] < best[0] - 1e-15:
                threshold = (sv[cut[j]] + sv[cut[j] + 1]) / 2.0
                if threshold >= sv[cut[j] + 1]:
                    # Adjacent doubles: the midpoint rounds up to the right
                    # value and would leave that child empty under "<=".
                    threshold = sv[cut[j]]
                best = (float(weighted[j]), int(f), threshold)
    return best


def _grow_tree(X: np.ndarray, y_codes: np.ndarray, K: int,
               max_depth: Optional[int], min_leaf: int,
               feature_sampler: Optional[Callable[[], np.ndarray]] = None,
               root_idx: Optional[np.ndarray] = None) -> dict:
    """Iterative CART growth; nodes are JSON-able dicts."""
    all_features = np.arange(X.shape[1])
    root_idx = np.arange(len(y_codes)) if root_idx is None else root_idx

    def leaf(idx):
        counts = np.bincount(y_codes[idx], minlength=K).astype(float)
        return {"leaf": True, "probs": (counts / counts.sum()).tolist()}

    root: dict = {}
    stack = [(root, root_idx, 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = np.bincount(y_codes[idx], minlength=K)
        pure = (counts > 0).sum() <= 1
        depth_stop = max_depth is not None and depth >= max_depth
        if pure or depth_stop or len(idx) < 2 * min_leaf:
            node.update(leaf(idx))
            continue
        features = feature_sampler() if feature_sampler is not None else all_features
        split = _best_split(X, y_codes, idx, features, K, min_leaf)
        if split is None:
            node.update(leaf(idx))
            continue
        _, f, threshold = split
        mask = X[idx, f] <= threshold
        left_node: dict = {}
        right_node: dict = {}
        node.update({"leaf": False, "feature": f, "threshold": threshold,
                     "left": left_node, "right": right_node})
        stack.append((right_node, idx[~mask], depth + 1))
        stack.append((left_node, idx[mask], depth + 1))
    return root


def _tree_proba(node: dict, x: np.ndarray) -> np.ndarray:
    while not node["leaf"]:
        node = node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]
    return np.asarray(node["probs"])


def _predict_tree(params: dict, X: np.ndarray) -> np.ndarray:
    return np.vstack([_tree_proba(params["tree"], x) for x in X])


def _fit_forest(X: np.ndarray, y_codes: np.ndarray, K: int, n_trees: int,
                max_depth: Optional[int], min_leaf: int, seed: int) -> dict:
    d = X.shape[1]
    m = max(1, int(np.sqrt(d)))
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng(np.random.SeedSequence([seed, t]))
        boot = rng.integers(0, len(y_codes), len(y_codes))

        def sampler(rng=rng):
            return np.sort(rng.choice(d, size=m, replace=False))

        trees.append(_grow_tree(X, y_codes, K, max_depth, min_leaf,
                                feature_sampler=sampler, root_idx=boot))
    return {"trees": trees}


def _predict_forest(params: dict, X: np.ndarray) -> np.ndarray:
    probs = [
        np.vstack([_tree_proba(tree, x) for x in X]) for tree in params["trees"]
    ]
    acc = np.mean(probs, axis=0)
    return acc / acc.sum(axis=1, keepdims=True)


def _fit_mlp(X: np.ndarray, y_codes: np.ndarray, K: int, hidden: int, lr: float,
             epochs: int, seed: int) -> dict:
    n, d = X.shape
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    W1 = rng.normal(0.0, np.sqrt(2.0 / max(d, 1)), size=(d, hidden))
    b1 = np.zeros(hidden)
    W2 = rng.normal(0.0, np.sqrt(2.0 / hidden), size=(hidden, K))
    b2 = np.zeros(K)
    Y = np.zeros((n, K))
    Y[np.arange(n), y_codes] = 1.0

    m = [np.zeros_like(p) for p in (W1, b1, W2, b2)]
    v = [np.zeros_like(p) for p in (W1, b1, W2, b2)]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    for step in range(1, epochs + 1):
        H = np.maximum(X @ W1 + b1, 0.0)
        P = _softmax(H @ W2 + b2)
        dZ2 = (P - Y) / n
        gW2 = H.T @ dZ2
        gb2 = dZ2.sum(axis=0)
        dH = dZ2 @ W2.T
        dH[H <= 0.0] = 0.0
        gW1 = X.T @ dH
        gb1 = dH.sum(axis=0)
        grads = (gW1, gb1, gW2, gb2)
        params = [W1, b1, W2, b2]
        for i, (p, g) in enumerate(zip(params, grads)):
            m[i] = beta1 * m[i] + (1 - beta1) * g
            v[i] = beta2 * v[i] + (1 - beta2) * g * g
            m_hat = m[i] / (1 - beta1 ** step)
            v_hat = v[i] / (1 - beta2 ** step)
            p -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return {"w1": W1, "b1": b1, "w2": W2, "b2": b2}


def _predict_mlp(params: dict, X: np.ndarray) -> np.ndarray:
    H = np.maximum(X @ np.asarray(params["w1"]) + np.asarray(params["b1"]), 0.0)
    return _softmax(H @ np.asarray(params["w2"]) + np.asarray(params["b2"]))


# ---------------------------------------------------------------------------
# Public model API
# ---------------------------------------------------------------------------


@dataclass
class TrainedModel:
    algorithm: str
    class_list: list[str]
    recipe: Recipe
    params: dict
    hyperparams: dict
    seed: int
    schema_hash: str
    flags: list[str] = field(default_factory=list)


def fit(algorithm: str, matrix: FeatureMatrix, row_idx: Sequence[int],
        y: Sequence[str], hyperparams: dict | None = None, seed: int = 0,
        classes: Sequence[str] | None = None,
        selected: Sequence[str] | None = None) -> TrainedModel:
    """Train one classifier on the given rows.

    The preprocessing recipe (encoding, scaling, selected features) is
    fitted on these rows only; resampling, when wanted, happens upstream on
    the encoded arrays via `fit_resampled`.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    hp = dict(DEFAULT_HYPERPARAMS[algorithm])
    hp.update(hyperparams or {})
    class_list = list(classes) if classes is not None else sorted(set(y), key=str)
    recipe = fit_recipe(matrix, row_idx, selected)
    X = transform(matrix, row_idx, recipe)
    y_codes = np.array([class_list.index(v) for v in y])
    return _fit_encoded(algorithm, X, y_codes, class_list, recipe, hp, seed,
                        matrix.column_hash())


def fit_resampled(algorithm: str, matrix: FeatureMatrix, row_idx: Sequence[int],
                  y: Sequence[str], hyperparams: dict | None = None, seed: int = 0,
                  classes: Sequence[str] | None = None,
                  selected: Sequence[str] | None = None,
                  enn_k: int = 3, smote_k: int = 5) -> TrainedModel:
    """fit() with ENN cleaning then SMOTE balancing on the encoded rows."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    hp = dict(DEFAULT_HYPERPARAMS[algorithm])
    hp.update(hyperparams or {})
    class_list = list(classes) if classes is not None else sorted(set(y), key=str)
    recipe = fit_recipe(matrix, row_idx, selected)
    X = transform(matrix, row_idx, recipe)
    y_arr = np.array(y, dtype=object)
    if algorithm != "dummy_stratified":
        from .resampling import enn_undersample, smote_oversample

        X_clean, y_clean = enn_undersample(X, y_arr, k=enn_k, classes=class_list)
        if len(set(y_clean)) >= 2:
            X, y_arr = X_clean, y_clean
        else:
            warnings.warn("ENN would leave fewer than two classes; "
                          "skipping the cleaning step", RuntimeWarning,
                          stacklevel=2)
        X, y_arr = smote_oversample(X, y_arr, k=smote_k, seed=seed,
                                    classes=class_list)
    y_codes = np.array([class_list.index(v) for v in y_arr])
    return _fit_encoded(algorithm, X, y_codes, class_list, recipe, hp, seed,
                        matrix.column_hash())


def _fit_encoded(algorithm: str, X: np.ndarray, y_codes: np.ndarray,
                 class_list: list[str], recipe: Recipe, hp: dict, seed: int,
                 schema_hash: str) -> TrainedModel:
    K = len(class_list)
    flags: list[str] = []
    if algorithm == "dummy_stratified":
        priors = np.bincount(y_codes, minlength=K) / len(y_codes)
        params = {"priors": priors.tolist()}
    elif algorithm == "logistic_regression":
        W, converged = _fit_logistic(X, y_codes, K, float(hp["l2"]))
        params = {"weights": W}
        if not converged:
            flags.append("not_converged")
            warnings.warn("logistic regression hit the iteration cap",
                          RuntimeWarning, stacklevel=3)
    elif algorithm == "decision_tree":
        params = {"tree": _grow_tree(X, y_codes, K, hp["max_depth"],
                                     int(hp["min_leaf"]))}
    elif algorithm == "random_forest":
        params = _fit_forest(X, y_codes, K, int(hp["n_trees"]), hp["max_depth"],
                             int(hp["min_leaf"]), seed)
    else:  # mlp
        params = _fit_mlp(X, y_codes, K, int(hp["hidden"]), float(hp["lr"]),
                          int(hp.get("epochs", 200)), seed)
    return TrainedModel(algorithm=algorithm, class_list=class_list, recipe=recipe,
                        params=params, hyperparams=hp, seed=seed,
                        schema_hash=schema_hash, flags=flags)


def predict_proba(model: TrainedModel, matrix: FeatureMatrix,
                  row_idx: Sequence[int] | None = None) -> np.ndarray:
    """Class-probability matrix (rows on the simplex) for the given rows."""
    if matrix.column_hash() != model.schema_hash:
        raise SchemaMismatch("matrix columns differ from the training schema")
    if row_idx is None:
        row_idx = range(matrix.n_rows)
    X = transform(matrix, list(row_idx), model.recipe)
    if model.algorithm == "dummy_stratified":
        priors = np.asarray(model.params["priors"])
        return np.tile(priors, (X.shape[0], 1))
    if model.algorithm == "logistic_regression":
        return _predict_logistic(model.params, X)
    if model.algorithm == "decision_tree":
        return _predict_tree(model.params, X)
    if model.algorithm == "random_forest":
        return _predict_forest(model.params, X)
    return _predict_mlp(model.params, X)


def predict(model: TrainedModel, matrix: FeatureMatrix,
            row_idx: Sequence[int] | None = None) -> list[str]:
    """Hard labels; dummy draws stratified labels from its training priors."""
    if row_idx is None:
        row_idx = list(range(matrix.n_rows))
    if model.algorithm == "dummy_stratified":
        rng = np.random.default_rng(np.random.SeedSequence([model.seed, 104729]))
        priors = np.asarray(model.params["priors"])
        draws = rng.choice(len(model.class_list), size=len(list(row_idx)), p=priors)
        return [model.class_list[i] for i in draws]
    probs = predict_proba(model, matrix, row_idx)
    return [model.class_list[i] for i in probs.argmax(axis=1)]


# ---------------------------------------------------------------------------
# Persistence (versioned JSON)
# ---------------------------------------------------------------------------

_FORMAT_VERSION = 1


def _jsonable_params(params: dict) -> dict:
    out = {}
    for key, value in params.items():
        out[key] = value.tolist() if isinstance(value, np.ndarray) else value
    return out


def save_model(model: TrainedModel, path: str | Path) -> None:
    doc = {
        "format_version": _FORMAT_VERSION,
        "algorithm": model.algorithm,
        "class_list": model.class_list,
        "hyperparams": model.hyperparams,
        "seed": model.seed,
        "schema_hash": model.schema_hash,
        "flags": model.flags,
        "recipe": {
            "selected": model.recipe.selected,
            "numeric_ranges": {k: list(v) for k, v in model.recipe.numeric_ranges.items()},
            "categories": model.recipe.categories,
            "dropped_constant": model.recipe.dropped_constant,
        },
        "params": _jsonable_params(model.params),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path, expect_schema_hash: str | None = None) -> TrainedModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != _FORMAT_VERSION:
        raise SchemaMismatch(f"unsupported model format {doc.get('format_version')}")
    if expect_schema_hash is not None and doc["schema_hash"] != expect_schema_hash:
        raise SchemaMismatch("persisted model was trained on a different schema")
    recipe = Recipe(
        selected=doc["recipe"]["selected"],
        numeric_ranges={k: tuple(v) for k, v in doc["recipe"]["numeric_ranges"].items()},
        categories=doc["recipe"]["categories"],
        dropped_constant=doc["recipe"]["dropped_constant"],
    )
    return TrainedModel(
        algorithm=doc["algorithm"], class_list=doc["class_list"], recipe=recipe,
        params=doc["params"], hyperparams=doc["hyperparams"], seed=doc["seed"],
        schema_hash=doc["schema_hash"], flags=doc["flags"],
    )


# ---------------------------------------------------------------------------
# Feature selection and grid search
# ---------------------------------------------------------------------------


def select_features(matrix: FeatureMatrix, row_idx: Sequence[int],
                    y: Sequence[str], max_features: int,
                    classes: Sequence[str] | None = None) -> list[str]:
    """Univariate association filter, computed on the given rows only.

    Numeric and boolean columns score |Spearman rho| against class codes;
    categorical columns score Cramer's V. Degenerate (constant) columns are
    never selected.
    """
    if max_features < 1:
        raise ValueError("max_features must be >= 1")
    class_list = list(classes) if classes is not None else sorted(set(y), key=str)
    codes = [class_list.index(v) for v in y]
    scored: list[tuple[float, int, str]] = []
    for order, col in enumerate(matrix.columns):
        values = [matrix.rows[i][matrix.column_index(col.name)] for i in row_idx]
        try:
            if col.kind == "categorical":
                score, _ = stats.cramers_v(values, list(y))
            else:
                score, _ = stats.spearman([float(v) for v in values], codes)
                score = abs(score)
        except DegenerateInput:
            continue
        scored.append((score, order, col.name))
    scored.sort(key=lambda item: (-item[0], item[1]))
    return [name for _, _, name in scored[:max_features]]


def _expand_grid(grid: dict[str, list] | list[dict]) -> list[dict]:
    if isinstance(grid, list):
        return [dict(g) for g in grid]
    if not grid:
        return [{}]
    keys = list(grid)
    combos = itertools.product(*(grid[k] for k in keys))
    return [dict(zip(keys, combo)) for combo in combos]


def stratified_folds(y: Sequence[str], n_folds: int, rng: np.random.Generator,
                     classes: Sequence[str] | None = None) -> list[list[int]]:
    """Positions 0..len(y)-1 dealt round-robin per class after a shuffle."""
    class_list = list(classes) if classes is not None else sorted(set(y), key=str)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    cursor = 0
    for cls in class_list:
        members = [i for i, v in enumerate(y) if v == cls]
        members = [members[i] for i in rng.permutation(len(members))]
        for member in members:
            folds[cursor % n_folds].append(member)
            cursor += 1
    return [sorted(f) for f in folds]


def grid_search(algorithm: str, grid: dict[str, list] | list[dict],
                matrix: FeatureMatrix, row_idx: Sequence[int], y: Sequence[str],
                inner_folds: int = 3,
                metric: str | Callable[[Sequence, Sequence], float] = "macro_f1",
                seed: int = 0,
                classes: Sequence[str] | None = None,
                selected: Sequence[str] | None = None,
                resample: bool = True) -> dict:
    """Exhaustive grid evaluation by stratified inner CV.

    Ties break toward the earlier grid point. The metric is a key produced
    by `metrics` or a callable (y_true, y_pred) -> float.
    """
    if inner_folds < 2:
        raise ValueError("inner_folds must be >= 2")
    candidates = _expand_grid(grid)
    if len(candidates) == 1:
        return candidates[0]
    row_idx = list(row_idx)
    class_list = list(classes) if classes is not None else sorted(set(y), key=str)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 15485863]))
    n_folds = min(inner_folds, max(2, min(
        sum(1 for v in y if v == c) for c in class_list if c in set(y))))
    folds = stratified_folds(y, n_folds, rng, class_list)
    best_score = -np.inf
    best = candidates[0]
    for candidate in candidates:
        scores = []
        for k, fold in enumerate(folds):
            if not fold:
                continue
            val_pos = set(fold)
            train_pos = [i for i in range(len(row_idx)) if i not in val_pos]
            if not train_pos or len({y[i] for i in train_pos}) < 2:
                continue
            train_rows = [row_idx[i] for i in train_pos]
            val_rows = [row_idx[i] for i in fold]
            fitter = fit_resampled if resample else fit
            model = fitter(algorithm, matrix, train_rows,
                           [y[i] for i in train_pos], hyperparams=candidate,
                           seed=seed, classes=class_list, selected=selected)
            y_pred = predict(model, matrix, val_rows)
            y_val = [y[i] for i in fold]
            if callable(metric):
                scores.append(metric(y_val, y_pred))
            else:
                scores.append(metrics(y_val, y_pred, class_list)[metric])
        mean_score = float(np.mean(scores)) if scores else -np.inf
        if mean_score > best_score + 1e-12:
            best_score = mean_score
            best = candidate
    return best
