"""The attack protocols and their reports.

Five protocols share one discipline: players never straddle the
train/test boundary (checked at runtime on every split), all randomness
descends from (master seed, unit index) so parallel and serial schedules
produce identical reports, and a stratified dummy baseline rides along
wherever models are compared.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import models as m
from .attributes import ATTRIBUTE_SCHEMA, AttributeLabels
from .errors import AttributeArity, NoPositives, PlayerOverlap
from .matrix import FeatureMatrix
from .metrics import binary_precision_recall, metrics

DEFAULT_ALGORITHMS = ("logistic_regression", "decision_tree", "random_forest",
                      "mlp", "dummy_stratified")

# Compact grids keep desk-scale runs inside their time budgets; the full
# defaults in `models.DEFAULT_GRIDS` remain available via the `grids` knob.
DESK_GRIDS: dict[str, dict[str, list]] = {
    "logistic_regression": {"l2": [0.1, 1.0]},
    "decision_tree": {"max_depth": [3, 10], "min_leaf": [1, 5]},
    "random_forest": {"n_trees": [60], "max_depth": [None], "min_leaf": [1]},
    "mlp": {"hidden": [32], "lr": [1e-2]},
    "dummy_stratified": {},
}


# ---------------------------------------------------------------------------
# Report container
# ---------------------------------------------------------------------------


@dataclass
class AttackReport:
    protocol: str
    metric_tables: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "metric_tables": self.metric_tables,
            "curves": self.curves,
            "config": self.config,
            "flags": sorted(self.flags),
        }


def save_report(report: AttackReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def _mean_std(values: Sequence[float]) -> dict:
    arr = np.asarray(list(values), dtype=float)
    return {"mean": float(arr.mean()), "std": float(arr.std()),
            "n_runs": int(arr.size)}


def _map_units(fn: Callable, args_list: list[tuple], jobs: int = 1) -> list:
    """Apply fn over units; results come back in unit order regardless of jobs."""
    if jobs <= 1:
        return [fn(*args) for args in args_list]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda args: fn(*args), args_list))


def _check_disjoint(train_players: Sequence[int], test_players: Sequence[int],
                    context: str) -> None:
    overlap = set(train_players) & set(test_players)
    if overlap:
        raise PlayerOverlap(f"{context}: players straddle the split: "
                            f"{sorted(overlap)[:5]}")


def _rng(*entropy: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(entropy)))


def _unit_seed(*entropy: int) -> int:
    """Process-stable integer seed derived from unit coordinates."""
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


_ATTR_INDEX = {name: i for i, name in enumerate(ATTRIBUTE_SCHEMA)}


def _attr_labels(labels: dict[int, AttributeLabels], owners: Sequence[int],
                 attribute: str) -> list[str]:
    return [getattr(labels[o], attribute) for o in owners]


def _stratified_player_split(players: Sequence[int], y_by_player: dict[int, str],
                             test_fraction: float, val_fraction: float,
                             rng: np.random.Generator):
    """Split players (not rows) into train/val/test, stratified by label.

    val_fraction is taken from the post-test remainder, mirroring a
    "reserve 10% of the training set for validation" convention.
    """
    by_class: dict[str, list[int]] = {}
    for player in players:
        by_class.setdefault(y_by_player[player], []).append(player)
    train: list[int] = []
    val: list[int] = []
    test: list[int] = []
    for cls in sorted(by_class):
        members = sorted(by_class[cls])
        members = [members[i] for i in rng.permutation(len(members))]
        n = len(members)
        n_test = int(round(test_fraction * n)) if n >= 2 else 0
        if test_fraction > 0 and n_test == 0 and n >= 3:
            n_test = 1  # keep small classes represented in every split
        n_test = min(n_test, n - 1)
        remainder = members[n_test:]
        test.extend(members[:n_test])
        n_val = int(round(val_fraction * len(remainder))) if len(remainder) >= 2 else 0
        if val_fraction > 0 and n_val == 0 and len(remainder) >= 3:
            n_val = 1
        n_val = min(n_val, len(remainder) - 1)
        val.extend(remainder[:n_val])
        train.extend(remainder[n_val:])
    _check_disjoint(train, test, "player split")
    _check_disjoint(train, val, "player split")
    _check_disjoint(val, test, "player split")
    return sorted(train), sorted(val), sorted(test)


# ---------------------------------------------------------------------------
# Simple protocol: per-player aggregates under nested stratified CV
# ---------------------------------------------------------------------------


def simple_aia(P: FeatureMatrix, labels: dict[int, AttributeLabels],
               algorithms: Sequence[str] = DEFAULT_ALGORITHMS, seed: int = 0,
               outer_folds: int = 10, inner_folds: int = 3,
               grids: dict | None = None, max_features: int = 12,
               resample: bool = True, jobs: int = 1,
               attributes: Sequence[str] | None = None) -> AttackReport:
    """Nested stratified cross-validation over the per-player table.

    Outer folds score macro F1; the inner loop does feature selection, grid
    search, and resampling on training rows only.
    """
    if P.variant != "P":
        raise ValueError(f"simple_aia expects variant P, got {P.variant}")
    grids = grids or DESK_GRIDS
    attrs = list(attributes) if attributes is not None else list(ATTRIBUTE_SCHEMA)
    report = AttackReport(protocol="simple", config={
        "seed": seed, "outer_folds": outer_folds, "inner_folds": inner_folds,
        "grids": grids, "max_features": max_features, "resample": resample,
        "algorithms": list(algorithms), "column_hash": P.column_hash(),
    })

    for ai, attribute in enumerate(attrs):
        classes = list(ATTRIBUTE_SCHEMA[attribute])
        y = _attr_labels(labels, P.row_owner, attribute)
        counts = {c: y.count(c) for c in classes if y.count(c) > 0}
        if len(counts) < 2:
            report.flags.append(f"skipped:{attribute}:single_class")
            continue
        min_count = min(counts.values())
        k = max(2, min(outer_folds, min_count))
        if k < outer_folds:
            report.flags.append(f"reduced_folds:{attribute}:{k}")
        folds = m.stratified_folds(y, k, _rng(seed, ai, 0), classes)
        report.metric_tables[attribute] = {}

        for gi, algorithm in enumerate(algorithms):
            def run_fold(fi: int, fold: list[int], algorithm=algorithm,
                         gi=gi, ai=ai) -> float:
                test_rows = fold
                train_rows = [i for i in range(P.n_rows) if i not in set(fold)]
                _check_disjoint([P.row_owner[i] for i in train_rows],
                                [P.row_owner[i] for i in test_rows],
                                f"simple:{attribute}")
                y_train = [y[i] for i in train_rows]
                unit_seed = _unit_seed(seed, ai, gi, fi)
                if algorithm == "dummy_stratified":
                    model = m.fit(algorithm, P, train_rows, y_train,
                                  classes=classes, seed=unit_seed)
                else:
                    selected = m.select_features(P, train_rows, y_train,
                                                 max_features, classes)
                    best = m.grid_search(algorithm, grids.get(algorithm, {}),
                                         P, train_rows, y_train,
                                         inner_folds=inner_folds, seed=unit_seed,
                                         classes=classes, selected=selected,
                                         resample=resample)
                    fitter = m.fit_resampled if resample else m.fit
                    model = fitter(algorithm, P, train_rows, y_train,
                                   hyperparams=best, seed=unit_seed,
                                   classes=classes, selected=selected)
                y_pred = m.predict(model, P, test_rows)
                return metrics([y[i] for i in test_rows], y_pred,
                               classes)["macro_f1"]

            scores = _map_units(run_fold, [(fi, fold) for fi, fold
                                           in enumerate(folds)], jobs)
            report.metric_tables[attribute][algorithm] = _mean_std(scores)
    return report


# ---------------------------------------------------------------------------
# One-match protocol: per-match rows, split by unique player
# ---------------------------------------------------------------------------


@dataclass
class OneMatchRun:
    """Artifacts of one variant run, reused by the post-processing attacks.

    Splits are per attribute (each attribute stratifies its own player
    split), so downstream consumers must pair a model with its own split.
    """

    variant_index: int
    matrix: FeatureMatrix
    models: dict[str, m.TrainedModel]
    splits: dict[str, tuple[list[int], list[int], list[int]]]
    seed: int

    def test_players(self, attribute: str) -> list[int]:
        return self.splits[attribute][2]

    def train_players(self, attribute: str) -> list[int]:
        return self.splits[attribute][0]


def one_match_aia(variants: Sequence[FeatureMatrix] | FeatureMatrix,
                  labels: dict[int, AttributeLabels],
                  algorithms: Sequence[str] = DEFAULT_ALGORITHMS, seed: int = 0,
                  n_repeats: int | None = None, test_fraction: float = 0.20,
                  val_fraction: float = 0.10, grids: dict | None = None,
                  max_features: int = 12, resample: bool = True,
                  keep_models: str | None = None, jobs: int = 1,
                  attributes: Sequence[str] | None = None
                  ) -> tuple[AttackReport, list[OneMatchRun]]:
    """80:20 split on unique players, 10% of the remainder for validation.

    Pass the distilled variants as a list (one run each) or a single
    per-match matrix with `n_repeats` reseeded splits. `keep_models` names
    the algorithm whose per-attribute models are kept for the
    post-processing protocols.
    """
    if isinstance(variants, FeatureMatrix):
        variants = [variants]
    runs_spec: list[tuple[int, FeatureMatrix]] = []
    if len(variants) == 1 and (n_repeats or 1) > 1:
        runs_spec = [(r, variants[0]) for r in range(n_repeats)]
    else:
        runs_spec = list(enumerate(variants))
    grids = grids or DESK_GRIDS
    attrs = list(attributes) if attributes is not None else list(ATTRIBUTE_SCHEMA)

    report = AttackReport(protocol="one_match", config={
        "seed": seed, "test_fraction": test_fraction,
        "val_fraction": val_fraction, "grids": grids,
        "max_features": max_features, "resample": resample,
        "algorithms": list(algorithms), "n_runs": len(runs_spec),
        "variant_seeds": [v.variant_seed for _, v in runs_spec],
    })
    scores: dict[str, dict[str, list[float]]] = {
        a: {alg: [] for alg in algorithms} for a in attrs}
    artifacts: list[OneMatchRun] = []

    def run_one(ri: int, matrix: FeatureMatrix) -> tuple[dict, Optional[OneMatchRun]]:
        run_scores: dict[str, dict[str, float]] = {}
        kept_models: dict[str, m.TrainedModel] = {}
        kept_splits: dict[str, tuple[list[int], list[int], list[int]]] = {}
        players = matrix.owners()
        run_seed = _unit_seed(seed, ri)
        for attribute in attrs:
            ai = _ATTR_INDEX[attribute]
            classes = list(ATTRIBUTE_SCHEMA[attribute])
            y_by_player = {p: getattr(labels[p], attribute) for p in players}
            train_p, val_p, test_p = _stratified_player_split(
                players, y_by_player, test_fraction, val_fraction,
                _rng(seed, ri, 1, ai))
            _check_disjoint(train_p, test_p, f"one_match:{attribute}")
            kept_splits[attribute] = (train_p, val_p, test_p)
            train_rows = [i for i, o in enumerate(matrix.row_owner) if o in set(train_p)]
            val_rows = [i for i, o in enumerate(matrix.row_owner) if o in set(val_p)]
            test_rows = [i for i, o in enumerate(matrix.row_owner) if o in set(test_p)]
            y_rows = _attr_labels(labels, matrix.row_owner, attribute)
            y_train = [y_rows[i] for i in train_rows]
            y_val = [y_rows[i] for i in val_rows]
            y_test = [y_rows[i] for i in test_rows]
            run_scores[attribute] = {}
            for gi, algorithm in enumerate(algorithms):
                unit_seed = _unit_seed(run_seed, ai, gi)
                if algorithm == "dummy_stratified":
                    model = m.fit(algorithm, matrix, train_rows, y_train,
                                  classes=classes, seed=unit_seed)
                else:
                    selected = m.select_features(matrix, train_rows, y_train,
                                                 max_features, classes)
                    candidates = m._expand_grid(grids.get(algorithm, {}))
                    fitter = m.fit_resampled if resample else m.fit
                    best_model = None
                    best_score = -np.inf
                    for candidate in candidates:
                        trial = fitter(algorithm, matrix, train_rows, y_train,
                                       hyperparams=candidate, seed=unit_seed,
                                       classes=classes, selected=selected)
                        if len(candidates) == 1 or not val_rows:
                            best_model = trial
                            break
                        val_pred = m.predict(trial, matrix, val_rows)
                        score = metrics(y_val, val_pred, classes)["macro_f1"]
                        if score > best_score + 1e-12:
                            best_score = score
                            best_model = trial
                    model = best_model
                y_pred = m.predict(model, matrix, test_rows)
                run_scores[attribute][algorithm] = metrics(
                    y_test, y_pred, classes)["macro_f1"]
                if keep_models == algorithm:
                    kept_models[attribute] = model
        artifact = None
        if keep_models is not None:
            artifact = OneMatchRun(variant_index=ri, matrix=matrix,
                                   models=kept_models, splits=kept_splits,
                                   seed=run_seed)
        return run_scores, artifact

    results = _map_units(run_one, runs_spec, jobs)
    for run_scores, artifact in results:
        for attribute, by_alg in run_scores.items():
            for algorithm, score in by_alg.items():
                scores[attribute][algorithm].append(score)
        if artifact is not None:
            artifacts.append(artifact)
    for attribute in attrs:
        report.metric_tables[attribute] = {
            alg: _mean_std(vals) for alg, vals in scores[attribute].items()}
    return report, artifacts


# ---------------------------------------------------------------------------
# Post-processing protocols over per-player match sets
# ---------------------------------------------------------------------------


def average_probabilities(vectors: Sequence[Sequence[float]]) -> np.ndarray:
    """Componentwise mean of class-probability vectors."""
    arr = np.asarray(vectors, dtype=float)
    return arr.mean(axis=0)


def sophisticated_predict(model: m.TrainedModel, matrix: FeatureMatrix,
                          row_idx: Sequence[int], n: int | None = None,
                          rng: np.random.Generator | None = None
                          ) -> tuple[str, np.ndarray]:
    """Average per-match probabilities for one player, then take the argmax.

    When n is smaller than the available match count, n rows are sampled
    without replacement; n beyond the available count uses everything.
    """
    row_idx = list(row_idx)
    if n is not None and n < len(row_idx):
        if rng is None:
            rng = np.random.default_rng(0)
        chosen = rng.choice(len(row_idx), size=n, replace=False)
        row_idx = [row_idx[i] for i in sorted(chosen)]
    probs = m.predict_proba(model, matrix, row_idx)
    avg = average_probabilities(probs)
    return model.class_list[int(np.argmax(avg))], avg


def _player_prob_blocks(run: OneMatchRun, attribute: str
                        ) -> dict[int, np.ndarray]:
    """predict_proba for each test player's rows, computed once per run."""
    matrix = run.matrix
    model = run.models[attribute]
    test_set = set(run.test_players(attribute))
    rows_by_player: dict[int, list[int]] = {}
    for i, owner in enumerate(matrix.row_owner):
        if owner in test_set:
            rows_by_player.setdefault(owner, []).append(i)
    all_rows = [i for rows in rows_by_player.values() for i in rows]
    probs = m.predict_proba(model, matrix, all_rows)
    blocks: dict[int, np.ndarray] = {}
    cursor = 0
    for player, rows in rows_by_player.items():
        blocks[player] = probs[cursor:cursor + len(rows)]
        cursor += len(rows)
    return blocks


def sophisticated_aia(runs: Sequence[OneMatchRun],
                      labels: dict[int, AttributeLabels],
                      n_sweep: Sequence[int] = tuple(range(1, 31)),
                      draws: int = 100, seed: int = 0, jobs: int = 1,
                      attributes: Sequence[str] | None = None,
                      headline_excludes: Sequence[str] = ("gender",)
                      ) -> AttackReport:
    """Accuracy as a function of how many matches are averaged per player."""
    attrs = [a for a in (attributes or ATTRIBUTE_SCHEMA)
             if a in runs[0].models]
    report = AttackReport(protocol="sophisticated", config={
        "seed": seed, "n_sweep": list(n_sweep), "draws": draws,
        "n_runs": len(runs),
    })
    for excluded in headline_excludes:
        if excluded in attrs:
            report.flags.append(f"headline_excludes:{excluded}")

    for attribute in attrs:
        classes = list(ATTRIBUTE_SCHEMA[attribute])
        per_n: dict[int, list[float]] = {n: [] for n in n_sweep}

        def run_unit(ri: int, run: OneMatchRun, attribute=attribute,
                     classes=classes) -> dict[int, list[float]]:
            _check_disjoint(run.train_players(attribute),
                            run.test_players(attribute),
                            f"sophisticated:{attribute}")
            blocks = _player_prob_blocks(run, attribute)
            truth = {p: getattr(labels[p], attribute) for p in blocks}
            out: dict[int, list[float]] = {n: [] for n in n_sweep}
            for n in n_sweep:
                for d in range(draws):
                    rng = _rng(seed, ri, _ATTR_INDEX[attribute], n, d)
                    correct = 0
                    for player, block in blocks.items():
                        take = min(n, len(block))
                        if take < len(block):
                            rows = rng.choice(len(block), size=take,
                                              replace=False)
                            avg = block[rows].mean(axis=0)
                        else:
                            avg = block.mean(axis=0)
                        if classes[int(np.argmax(avg))] == truth[player]:
                            correct += 1
                    out[n].append(correct / len(blocks))
            return out

        results = _map_units(run_unit, list(enumerate(runs)), jobs)
        for result in results:
            for n in n_sweep:
                per_n[n].extend(result[n])
        report.curves[attribute] = [
            {"n": n, **_mean_std(per_n[n])} for n in n_sweep]
    return report


def indiscriminate_aia(runs: Sequence[OneMatchRun],
                       labels: dict[int, AttributeLabels], n: int = 30,
                       draws: int = 100, seed: int = 0,
                       attributes: Sequence[str] | None = None) -> AttackReport:
    """Top-2 protocol: success when the true class ranks first or second.

    Only attributes with three or more classes are eligible; asking for a
    binary attribute is an arity error.
    """
    if attributes is None:
        attrs = [a for a in ATTRIBUTE_SCHEMA
                 if len(ATTRIBUTE_SCHEMA[a]) >= 3 and a in runs[0].models]
    else:
        for a in attributes:
            if len(ATTRIBUTE_SCHEMA[a]) < 3:
                raise AttributeArity(f"{a} has only {len(ATTRIBUTE_SCHEMA[a])}"
                                     " classes; top-2 needs at least 3")
        attrs = list(attributes)
    report = AttackReport(protocol="indiscriminate", config={
        "seed": seed, "n": n, "draws": draws, "n_runs": len(runs),
    })
    for attribute in attrs:
        classes = list(ATTRIBUTE_SCHEMA[attribute])
        top1_scores: list[float] = []
        top2_scores: list[float] = []
        for ri, run in enumerate(runs):
            _check_disjoint(run.train_players(attribute),
                            run.test_players(attribute),
                            f"indiscriminate:{attribute}")
            blocks = _player_prob_blocks(run, attribute)
            truth = {p: getattr(labels[p], attribute) for p in blocks}
            for d in range(draws):
                rng = _rng(seed, ri, _ATTR_INDEX[attribute], d)
                top1 = 0
                top2 = 0
                for player, block in blocks.items():
                    take = min(n, len(block))
                    if take < len(block):
                        rows = rng.choice(len(block), size=take, replace=False)
                        avg = block[rows].mean(axis=0)
                    else:
                        avg = block.mean(axis=0)
                    order = np.argsort(-avg, kind="stable")
                    true_idx = classes.index(truth[player])
                    if order[0] == true_idx:
                        top1 += 1
                        top2 += 1
                    elif order[1] == true_idx:
                        top2 += 1
                top1_scores.append(top1 / len(blocks))
                top2_scores.append(top2 / len(blocks))
        t1 = _mean_std(top1_scores)
        t2 = _mean_std(top2_scores)
        report.metric_tables[attribute] = {
            "top1": t1, "top2": t2,
            "improvement": t2["mean"] - t1["mean"],
        }
    return report


# ---------------------------------------------------------------------------
# Targeted protocol: precision-first binary detection of a subgroup
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TargetSpec:
    """Conjunction of (attribute, accepted classes) clauses."""

    name: str
    clauses: tuple[tuple[str, frozenset[str]], ...]

    def __post_init__(self):
        if not self.clauses:
            raise ValueError("target needs at least one clause")
        for attribute, accepted in self.clauses:
            schema = ATTRIBUTE_SCHEMA.get(attribute)
            if schema is None:
                raise ValueError(f"unknown attribute {attribute!r}")
            unknown = set(accepted) - set(schema)
            if unknown:
                raise ValueError(f"unknown classes for {attribute}: {unknown}")

    def matches(self, labels: AttributeLabels) -> bool:
        return all(getattr(labels, attribute) in accepted
                   for attribute, accepted in self.clauses)


BUILTIN_TARGETS: dict[str, TargetSpec] = {
    "very_young": TargetSpec("very_young", (("age_bin", frozenset({"13-18"})),)),
    "purchasers": TargetSpec("purchasers", (
        ("purchase_habits", frozenset({"rarely", "regularly"})),)),
    "introverts": TargetSpec("introverts", (("extraversion", frozenset({"low"})),)),
    "purchasers_and_workers": TargetSpec("purchasers_and_workers", (
        ("occupation", frozenset({"yes"})),
        ("purchase_habits", frozenset({"rarely", "regularly"})),)),
}

_THRESHOLDS = tuple(np.round(np.arange(0.10, 0.96, 0.05), 2))


def targeted_aia(target: TargetSpec, variants: Sequence[FeatureMatrix],
                 labels: dict[int, AttributeLabels],
                 n_sweep: Sequence[int] = tuple(range(1, 31)),
                 repeats: int = 5, draws: int = 20, seed: int = 0,
                 algorithms: Sequence[str] = ("random_forest",),
                 grids: dict | None = None, max_features: int = 12,
                 test_fraction: float = 0.20, val_fraction: float = 0.10,
                 thresholds: Sequence[float] = _THRESHOLDS,
                 jobs: int = 1) -> AttackReport:
    """Binary, precision-optimized detection of one subgroup.

    Everyone outside the target conjunction collapses into the negative
    class. Model and decision threshold are chosen on held-out validation
    players to maximize precision subject to at least one predicted
    positive; precision drives both choices. Curves report precision and
    recall per number of averaged matches on disjoint test players.
    """
    grids = grids or DESK_GRIDS
    classes = ["negative", "positive"]
    report = AttackReport(protocol="targeted", config={
        "target": target.name,
        "clauses": [[a, sorted(c)] for a, c in target.clauses],
        "seed": seed, "repeats": repeats, "draws": draws,
        "n_sweep": list(n_sweep), "algorithms": list(algorithms),
        "grids": grids, "thresholds": [float(t) for t in thresholds],
    })
    precision_per_n: dict[int, list[float]] = {n: [] for n in n_sweep}
    recall_per_n: dict[int, list[float]] = {n: [] for n in n_sweep}
    chosen_log: list[dict] = []

    def run_repeat(rep: int) -> tuple[dict, dict, dict]:
        matrix = variants[rep % len(variants)]
        players = matrix.owners()
        y_by_player = {p: "positive" if target.matches(labels[p]) else "negative"
                       for p in players}
        if not any(v == "positive" for v in y_by_player.values()):
            raise NoPositives(f"target {target.name} matches no player")
        split_rng = _rng(seed, rep, 2)
        train_p, val_p, test_p = _stratified_player_split(
            players, y_by_player, test_fraction, val_fraction, split_rng)
        for part, name in ((train_p, "train"), (val_p, "validation"),
                           (test_p, "test")):
            if not any(y_by_player[p] == "positive" for p in part):
                raise NoPositives(
                    f"target {target.name}: no positives in the {name} split")
        _check_disjoint(train_p, test_p, f"targeted:{target.name}")
        _check_disjoint(val_p, test_p, f"targeted:{target.name}")

        def rows_of(player_set):
            chosen = set(player_set)
            return [i for i, o in enumerate(matrix.row_owner) if o in chosen]

        train_rows = rows_of(train_p)
        y_train = ["positive" if target.matches(labels[o]) else "negative"
                   for o in (matrix.row_owner[i] for i in train_rows)]

        # Candidate models: every algorithm x grid point, scored on the
        # validation players by full-history averaged probabilities.
        val_blocks: dict[int, list[int]] = {p: [] for p in val_p}
        for i, owner in enumerate(matrix.row_owner):
            if owner in val_blocks:
                val_blocks[owner].append(i)
        best = None  # (precision, recall, -gi, -ci) -> model, threshold
        for gi, algorithm in enumerate(algorithms):
            selected = m.select_features(matrix, train_rows, y_train,
                                         max_features, classes)
            for ci, candidate in enumerate(m._expand_grid(grids.get(algorithm, {}))):
                unit_seed = _unit_seed(seed, rep, gi, ci)
                model = m.fit_resampled(algorithm, matrix, train_rows, y_train,
                                        hyperparams=candidate, seed=unit_seed,
                                        classes=classes, selected=selected)
                pos_proba = {}
                for player, rows in val_blocks.items():
                    block = m.predict_proba(model, matrix, rows)
                    pos_proba[player] = float(block.mean(axis=0)[1])
                y_true = [y_by_player[p] for p in val_p]
                scored: list[tuple[float, float, float]] = []
                for threshold in thresholds:
                    y_pred = ["positive" if pos_proba[p] >= threshold
                              else "negative" for p in val_p]
                    if not any(v == "positive" for v in y_pred):
                        continue
                    precision, recall = binary_precision_recall(
                        y_true, y_pred, "positive")
                    scored.append((precision, recall, float(threshold)))
                if not scored:
                    continue
                top = max(s[:2] for s in scored)
                # Small validation sets tie many thresholds at the same
                # (precision, recall); the median of the tied band keeps the
                # widest margin on both sides.
                band = sorted(t for p, r, t in scored if (p, r) == top)
                threshold = band[len(band) // 2]
                key = (top[0], top[1], -gi, -ci)
                if best is None or key > best[0]:
                    best = (key, model, threshold, algorithm, candidate)
        if best is None:
            raise NoPositives(
                f"target {target.name}: no candidate predicted a positive "
                "on validation")
        _, model, threshold, algorithm, candidate = best

        test_blocks: dict[int, np.ndarray] = {}
        for player in test_p:
            rows = [i for i, o in enumerate(matrix.row_owner) if o == player]
            test_blocks[player] = m.predict_proba(model, matrix, rows)
        truth = {p: y_by_player[p] for p in test_p}
        precisions: dict[int, list[float]] = {n: [] for n in n_sweep}
        recalls: dict[int, list[float]] = {n: [] for n in n_sweep}
        for n in n_sweep:
            for d in range(draws):
                rng = _rng(seed, rep, n, d, 3)
                y_pred = []
                for player in test_p:
                    block = test_blocks[player]
                    take = min(n, len(block))
                    if take < len(block):
                        rows = rng.choice(len(block), size=take, replace=False)
                        avg_pos = float(block[rows].mean(axis=0)[1])
                    else:
                        avg_pos = float(block.mean(axis=0)[1])
                    y_pred.append("positive" if avg_pos >= threshold
                                  else "negative")
                y_true = [truth[p] for p in test_p]
                precision, recall = binary_precision_recall(y_true, y_pred,
                                                            "positive")
                precisions[n].append(precision)
                recalls[n].append(recall)
        chosen = {"repeat": rep, "algorithm": algorithm,
                  "hyperparams": candidate, "threshold": threshold}
        return precisions, recalls, chosen

    results = _map_units(run_repeat, [(rep,) for rep in range(repeats)], jobs)
    for precisions, recalls, chosen in results:
        chosen_log.append(chosen)
        for n in n_sweep:
            precision_per_n[n].extend(precisions[n])
            recall_per_n[n].extend(recalls[n])
    report.curves["precision"] = [{"n": n, **_mean_std(precision_per_n[n])}
                                  for n in n_sweep]
    report.curves["recall"] = [{"n": n, **_mean_std(recall_per_n[n])}
                               for n in n_sweep]
    report.config["selected"] = chosen_log
    return report
