"""Command-line front-end wiring the pipeline stages.

Subcommands mirror the pipeline: synth / ingest / labels produce inputs,
featurize builds the three dataset shapes, correlate / attack / validate
produce reports, and reproduce-table8 replays the published-values ledger.
Usage errors exit 2; data errors exit 1 with a structured message. Reports
embed the config hash, seed, and tool version, and re-running a command
with identical inputs overwrites outputs with identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__, attacks, validation
from .attributes import bin_survey, read_labels_csv, read_survey_csv, write_labels_csv
from .errors import AiaError
from .features import (
    FeatureContext,
    build_distilled,
    build_match_matrix,
    build_player_matrix,
)
from .ingest import (
    TelemetryClient,
    filter_players,
    iter_cached_players,
    load_cached_match,
    load_cached_player,
)
from .matrix import load_matrix, save_matrix
from .stats import correlation_report, required_sample_size, significance_counts
from .synth import SynthConfig, FIXTURE_CONFIG, generate_population, write_population_cache, write_survey_csv


def _config_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def _finalize_report(report: attacks.AttackReport, seed: int) -> attacks.AttackReport:
    report.config["tool_version"] = __version__
    report.config["config_hash"] = _config_hash(report.config)
    report.config.setdefault("seed", seed)
    return report


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _load_corpus(cache_dir: Path, labels_path: Path, min_matches: int,
                 min_human_players: int = 0):
    labels = read_labels_csv(labels_path)
    pairs = []
    for handle in iter_cached_players(cache_dir):
        record = load_cached_player(cache_dir, handle)
        pairs.append((record, labels.get(handle)))
    kept, report = filter_players(pairs, min_matches=min_matches)
    matches = {}
    for record, _ in kept:
        for mid in record.match_ids:
            if mid not in matches:
                match = load_cached_match(cache_dir, mid)
                # Bot-backfilled lobbies are retained by default; the flag
                # exists because the source data does not settle the question.
                if match.human_players >= min_human_players:
                    matches[mid] = match
    players = [record for record, _ in kept]
    labels_kept = {record.handle: lab for record, lab in kept}
    return players, matches, labels_kept, report


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def _cmd_synth(args) -> int:
    if args.fixture:
        config = FIXTURE_CONFIG
    else:
        if args.config is None:
            raise AiaError("synth needs --config FILE or --fixture")
        config = SynthConfig.from_json_dict(
            json.loads(Path(args.config).read_text(encoding="utf-8")))
    population = generate_population(config)
    out = Path(args.out)
    write_population_cache(population, out)
    write_survey_csv(population, out / "survey.csv")
    print(f"synth: {len(population.players)} players, "
          f"{len(population.matches)} matches -> {out}")
    return 0


def _cmd_ingest(args) -> int:
    handles = [int(line.strip()) for line in
               Path(args.handles).read_text(encoding="utf-8").splitlines()
               if line.strip()]
    client = TelemetryClient(args.cache, base_url=args.base_url,
                             rate_per_s=args.rate, offline=args.offline)
    fetched_players = 0
    fetched_matches = 0
    missing = []
    for handle in handles:
        try:
            record = client.fetch_player(handle, window_days=args.window_days)
        except AiaError as exc:
            missing.append({"handle": handle, "reason": str(exc)})
            continue
        fetched_players += 1
        for mid in record.match_ids:
            client.fetch_match(mid)
            fetched_matches += 1
    print(f"ingest: {fetched_players}/{len(handles)} players, "
          f"{fetched_matches} matches cached under {args.cache}")
    if missing:
        print(f"ingest: {len(missing)} handles without public data",
              file=sys.stderr)
    return 0


def _cmd_labels(args) -> int:
    rows = read_survey_csv(args.infile)
    binned = bin_survey(rows)
    write_labels_csv(binned.labels, args.out)
    print(f"labels: {len(binned.labels)} binned, "
          f"{len(binned.excluded)} excluded -> {args.out}")
    for handle, reason in binned.excluded:
        print(f"  excluded {handle}: {reason}", file=sys.stderr)
    return 0


def _cmd_featurize(args) -> int:
    cache = Path(args.cache)
    out = Path(args.out)
    players, matches, labels, freport = _load_corpus(
        cache, Path(args.labels), args.min_matches, args.min_human_players)
    ctx = FeatureContext.default()
    _write_json(out / "filter_report.json", {
        "invalid_labels": freport.invalid_labels,
        "not_visible": freport.not_visible,
        "inactive": freport.inactive,
        "retained": freport.retained,
    })
    if args.variant == "P":
        matrix = build_player_matrix(players, matches, ctx)
        save_matrix(matrix, out / "P.csv")
        print(f"featurize: P {matrix.n_rows}x{len(matrix.columns)} -> {out}")
        return 0
    m, aug = build_match_matrix(players, matches, ctx)
    if args.variant == "M":
        save_matrix(m, out / "M.csv")
        print(f"featurize: M {m.n_rows}x{len(m.columns)} -> {out}")
        return 0
    variants = build_distilled(m, aug, max_per_player=args.cap,
                               n_variants=args.variants, seed=args.seed)
    for i, variant in enumerate(variants):
        save_matrix(variant, out / f"Mbar_{i:02d}.csv")
    print(f"featurize: {len(variants)} Mbar variants "
          f"({variants[0].n_rows}x{len(variants[0].columns)}) -> {out}")
    return 0


def correlation_doc(matrix, labels, alpha: float, top_k: int) -> dict:
    """The JSON document emitted by `aia correlate` (also used as a golden)."""
    report = correlation_report(matrix, labels, alpha=alpha, top_k=top_k)
    table = significance_counts(matrix, labels)
    doc = {
        "alpha": alpha,
        "top_k": top_k,
        "tool_version": __version__,
        "top_correlations": {
            attr: [{
                "feature": r.feature_name, "metric": r.metric,
                "value": r.value, "p_value": r.p_value, "n": r.n,
                "strong": r.strong,
            } for r in results]
            for attr, results in sorted(report.items())
        },
        "significance_counts": [
            {"attribute": attr, "metric": metric, "alpha": a, "count": count}
            for (attr, metric, a), count in sorted(table.counts.items())
        ],
    }
    doc["config_hash"] = _config_hash({"alpha": alpha, "top": top_k,
                                       "columns": matrix.column_hash()})
    return doc


def _cmd_correlate(args) -> int:
    matrix = load_matrix(args.features)
    labels = read_labels_csv(args.labels)
    out = Path(args.out)
    doc = correlation_doc(matrix, labels, args.alpha, args.top)
    _write_json(out / "correlations.json", doc)
    top = doc["top_correlations"]
    with open(out / "correlations.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["attribute", "feature", "metric", "value", "p_value",
                         "n", "strong"])
        for attr, results in top.items():
            for r in results:
                writer.writerow([attr, r["feature"], r["metric"],
                                 repr(r["value"]), repr(r["p_value"]),
                                 r["n"], r["strong"]])
    print(f"correlate: {sum(len(v) for v in top.values())} top hits -> {out}")
    return 0


def _curves_csv(path: Path, curves: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "n", "mean", "std", "n_runs"])
        for series, points in sorted(curves.items()):
            for point in points:
                writer.writerow([series, point["n"], repr(point["mean"]),
                                 repr(point["std"]), point["n_runs"]])


def _metric_tables_csv(path: Path, tables: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["attribute", "model", "mean", "std", "n_runs"])
        for attribute, by_model in sorted(tables.items()):
            for model, cell in sorted(by_model.items()):
                if isinstance(cell, dict):
                    writer.writerow([attribute, model, repr(cell["mean"]),
                                     repr(cell["std"]), cell["n_runs"]])
                else:
                    writer.writerow([attribute, model, repr(cell), "", ""])


def _load_mbar_variants(features_dir: Path):
    paths = sorted(features_dir.glob("Mbar_*.csv"))
    if not paths:
        raise AiaError(f"no Mbar_*.csv variants under {features_dir}")
    return [load_matrix(p) for p in paths]


def _cmd_attack(args) -> int:
    features_dir = Path(args.features)
    labels = read_labels_csv(args.labels)
    algorithms = tuple(args.algorithms.split(",")) if args.algorithms else \
        attacks.DEFAULT_ALGORITHMS
    out = Path(args.out)
    n_sweep = tuple(range(args.sweep_start, args.sweep_stop + 1))

    if args.protocol == "simple":
        matrix = load_matrix(features_dir / "P.csv")
        report = attacks.simple_aia(matrix, labels, algorithms=algorithms,
                                    seed=args.seed, jobs=args.jobs)
    elif args.protocol == "one-match":
        if args.expert:
            variants = _load_mbar_variants(features_dir)
            report, _ = attacks.one_match_aia(variants, labels,
                                              algorithms=algorithms,
                                              seed=args.seed, jobs=args.jobs)
        else:
            matrix = load_matrix(features_dir / "M.csv")
            report, _ = attacks.one_match_aia(matrix, labels,
                                              algorithms=algorithms,
                                              seed=args.seed,
                                              n_repeats=args.repeats,
                                              jobs=args.jobs)
    elif args.protocol in ("sophisticated", "indiscriminate"):
        variants = _load_mbar_variants(features_dir)
        _, runs = attacks.one_match_aia(variants, labels,
                                        algorithms=("random_forest",),
                                        seed=args.seed,
                                        keep_models="random_forest",
                                        jobs=args.jobs)
        if args.protocol == "sophisticated":
            report = attacks.sophisticated_aia(runs, labels, n_sweep=n_sweep,
                                               draws=args.draws,
                                               seed=args.seed, jobs=args.jobs)
        else:
            report = attacks.indiscriminate_aia(runs, labels,
                                                n=args.sweep_stop,
                                                draws=args.draws,
                                                seed=args.seed)
    elif args.protocol == "targeted":
        target = attacks.BUILTIN_TARGETS.get(args.target)
        if target is None:
            raise AiaError(f"unknown target {args.target!r}; choose from "
                           f"{sorted(attacks.BUILTIN_TARGETS)}")
        variants = _load_mbar_variants(features_dir)
        report = attacks.targeted_aia(target, variants, labels,
                                      n_sweep=n_sweep, repeats=args.repeats,
                                      draws=args.draws, seed=args.seed,
                                      jobs=args.jobs)
    else:  # pragma: no cover - argparse restricts choices
        raise AiaError(f"unknown protocol {args.protocol}")

    _finalize_report(report, args.seed)
    out.parent.mkdir(parents=True, exist_ok=True)
    attacks.save_report(report, out)
    if report.curves:
        _curves_csv(out.with_suffix(".curves.csv"), report.curves)
    if report.metric_tables:
        _metric_tables_csv(out.with_suffix(".metrics.csv"), report.metric_tables)
    print(f"attack[{args.protocol}]: report -> {out}")
    return 0


def _cmd_validate(args) -> int:
    tables = None
    if args.pairs:
        tables = json.loads(Path(args.pairs).read_text(encoding="utf-8"))
    ledger = validation.hypothesis_table(tables, alpha=args.alpha,
                                         welch=args.welch)
    rows = validation.ledger_rows(ledger)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["family", "pair", "t_statistic", "p_value",
                             "alpha", "rejected", "flagged"])
            for row in rows:
                writer.writerow([row["family"], row["pair"],
                                 repr(row["t_statistic"]), repr(row["p_value"]),
                                 row["alpha"], row["rejected"], row["flagged"]])
    for family, (rejected, total) in ledger.counts().items():
        print(f"{family}: reject {rejected}/{total}")
    return 0


def _cmd_reproduce_table8(args) -> int:
    ledger = validation.hypothesis_table(alpha=0.05)
    for family, (rejected, total) in ledger.counts().items():
        print(f"{family}: reject {rejected}/{total}")
    return 0


def _cmd_sample_size(args) -> int:
    n = required_sample_size(args.confidence, args.margin, args.proportion,
                             args.population)
    print(n)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aia",
        description="Attribute-inference-attack pipeline for MOBA telemetry")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic population cache")
    p.add_argument("--config", help="SynthConfig JSON file")
    p.add_argument("--fixture", action="store_true",
                   help="emit the built-in regression fixture")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("ingest", help="fetch player and match telemetry")
    p.add_argument("--handles", required=True, help="file of account ids")
    p.add_argument("--window-days", type=int, default=30)
    p.add_argument("--cache", required=True)
    p.add_argument("--offline", action="store_true")
    p.add_argument("--base-url", default="https://api.opendota.com/api")
    p.add_argument("--rate", type=float, default=1.0, help="requests per second")
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("labels", help="bin a raw survey CSV into labels")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_labels)

    p = sub.add_parser("featurize", help="build feature matrices from a cache")
    p.add_argument("--variant", choices=["P", "M", "Mbar"], required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variants", type=int, default=20)
    p.add_argument("--cap", type=int, default=30, help="max rows per player")
    p.add_argument("--min-matches", type=int, default=5)
    p.add_argument("--min-human-players", type=int, default=0,
                   help="drop matches with fewer humans (default: keep all)")
    p.set_defaults(fn=_cmd_featurize)

    p = sub.add_parser("correlate", help="feature/attribute correlation report")
    p.add_argument("--features", required=True, help="matrix CSV path")
    p.add_argument("--labels", required=True)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--top", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_correlate)

    p = sub.add_parser("attack", help="run an attack protocol")
    p.add_argument("--protocol", required=True,
                   choices=["simple", "one-match", "sophisticated",
                            "indiscriminate", "targeted"])
    p.add_argument("--features", required=True, help="featurize output dir")
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--algorithms", help="comma list; default all five")
    p.add_argument("--expert", action="store_true",
                   help="one-match: use the distilled variants")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--draws", type=int, default=100)
    p.add_argument("--sweep-start", type=int, default=1)
    p.add_argument("--sweep-stop", type=int, default=30)
    p.add_argument("--target", default="very_young",
                   help="targeted protocol subgroup name")
    p.set_defaults(fn=_cmd_attack)

    p = sub.add_parser("validate", help="two-sample t-test ledger")
    p.add_argument("--pairs", help="summary-tables JSON; default: shipped values")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--welch", action="store_true")
    p.add_argument("--out", help="ledger CSV path")
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("reproduce-table8",
                       help="replay the published-values rejection ledger")
    p.set_defaults(fn=_cmd_reproduce_table8)

    p = sub.add_parser("sample-size", help="finite-population sample size")
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--margin", type=float, default=0.05)
    p.add_argument("--proportion", type=float, default=0.5)
    p.add_argument("--population", type=int, required=True)
    p.set_defaults(fn=_cmd_sample_size)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (AiaError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
