"""Statistical validation: two-sample t-tests over protocol summary statistics.

The reproduction ledger pits each advanced technique against its baseline
(four hypothesis families) and counts how often the "no difference" null
must be rejected at the target alpha. A data file of the published summary
values ships with the package so the ledger can be reproduced exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import DegenerateInput, DomainError, MissingPair
from .stats import t_sf_two_sided

DEFAULT_ALPHA = 0.05


@dataclass(frozen=True)
class SummaryStat:
    label: str
    mean: float
    std: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise DomainError(f"summary stat {self.label!r} needs n >= 2, got {self.n}")
        if self.std < 0:
            raise DomainError(f"summary stat {self.label!r} has negative std")


@dataclass(frozen=True)
class HypothesisResult:
    pair: str
    t_statistic: float
    p_value: float
    alpha: float
    rejected: bool
    flagged: bool = False  # degenerate variance handled by convention


def two_sample_ttest(a: SummaryStat, b: SummaryStat,
                     alpha: float = DEFAULT_ALPHA,
                     welch: bool = False) -> HypothesisResult:
    """Student's two-sample t-test from summary statistics.

    Pooled variance by default (a Welch flag exists for sensitivity runs).
    Two degenerate cases are resolved by convention and flagged: both stds
    zero with equal means -> p = 1; with unequal means -> p = 0.
    """
    if a.std == 0.0 and b.std == 0.0:
        if a.mean == b.mean:
            return HypothesisResult(f"{a.label} vs {b.label}", 0.0, 1.0, alpha,
                                    rejected=False, flagged=True)
        t = math.inf if a.mean > b.mean else -math.inf
        return HypothesisResult(f"{a.label} vs {b.label}", t, 0.0, alpha,
                                rejected=0.0 < alpha, flagged=True)
    if welch:
        va = a.std ** 2 / a.n
        vb = b.std ** 2 / b.n
        se = math.sqrt(va + vb)
        df = (va + vb) ** 2 / (va ** 2 / (a.n - 1) + vb ** 2 / (b.n - 1))
    else:
        df = a.n + b.n - 2
        pooled = ((a.n - 1) * a.std ** 2 + (b.n - 1) * b.std ** 2) / df
        se = math.sqrt(pooled * (1.0 / a.n + 1.0 / b.n))
    if se == 0.0:
        raise DegenerateInput("zero standard error with nonzero stds")
    t = (a.mean - b.mean) / se
    p = t_sf_two_sided(t, df)
    return HypothesisResult(f"{a.label} vs {b.label}", t, p, alpha,
                            rejected=p < alpha)


# ---------------------------------------------------------------------------
# Ledger over the published (or freshly produced) summary tables
# ---------------------------------------------------------------------------


@dataclass
class LedgerFamily:
    name: str
    results: list[HypothesisResult]

    @property
    def rejected(self) -> int:
        return sum(1 for r in self.results if r.rejected)

    @property
    def total(self) -> int:
        return len(self.results)


@dataclass
class HypothesisLedger:
    alpha: float
    families: list[LedgerFamily]

    def counts(self) -> dict[str, tuple[int, int]]:
        return {f.name: (f.rejected, f.total) for f in self.families}


def load_published_results(path: str | Path | None = None) -> dict:
    if path is None:
        path = Path(resources.files("aia").joinpath("data", "published_results.json"))  # type: ignore[arg-type]
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _stat(label: str, pair: Iterable[float], n: int) -> SummaryStat:
    mean, std = pair
    return SummaryStat(label, float(mean), float(std), n)


def hypothesis_table(tables: dict | None = None, alpha: float = DEFAULT_ALPHA,
                     welch: bool = False) -> HypothesisLedger:
    """Build the four-family rejection ledger from summary tables.

    Families: dummy = best model (simple protocol), dummy = naive and
    dummy = expert (one-match protocol), sophisticated = indiscriminate
    (top-2 protocol). `tables` defaults to the shipped published values and
    accepts any document with the same shape.
    """
    tables = tables if tables is not None else load_published_results()
    families: list[LedgerFamily] = []

    simple = tables["simple"]
    results = []
    for attr, row in simple["attributes"].items():
        best = row.get("best")
        if best is None or best not in row or "dummy" not in row:
            raise MissingPair(f"simple table row {attr!r} lacks best/dummy stats")
        n = int(simple["n_runs"])
        results.append(two_sample_ttest(
            _stat(f"{attr}:dummy", row["dummy"], n),
            _stat(f"{attr}:{best}", row[best], n), alpha=alpha, welch=welch))
    families.append(LedgerFamily("dummy_vs_best_model", results))

    one_match = tables["one_match"]
    for opponent in ("naive", "expert"):
        results = []
        for attr, row in one_match["attributes"].items():
            if opponent not in row or "dummy" not in row:
                raise MissingPair(f"one-match row {attr!r} lacks {opponent}/dummy stats")
            n = int(one_match["n_runs"])
            results.append(two_sample_ttest(
                _stat(f"{attr}:dummy", row["dummy"], n),
                _stat(f"{attr}:{opponent}", row[opponent], n),
                alpha=alpha, welch=welch))
        families.append(LedgerFamily(f"dummy_vs_{opponent}", results))

    indis = tables["indiscriminate"]
    results = []
    for attr, row in indis["attributes"].items():
        if "sophisticated" not in row or "indiscriminate" not in row:
            raise MissingPair(f"indiscriminate row {attr!r} lacks a pair")
        n = int(indis["n_runs"])
        results.append(two_sample_ttest(
            _stat(f"{attr}:sophisticated", row["sophisticated"], n),
            _stat(f"{attr}:indiscriminate", row["indiscriminate"], n),
            alpha=alpha, welch=welch))
    families.append(LedgerFamily("sophisticated_vs_indiscriminate", results))

    return HypothesisLedger(alpha=alpha, families=families)


def ledger_rows(ledger: HypothesisLedger) -> list[dict]:
    """Flat rows for CSV emission."""
    rows = []
    for family in ledger.families:
        for res in family.results:
            rows.append({
                "family": family.name,
                "pair": res.pair,
                "t_statistic": res.t_statistic,
                "p_value": res.p_value,
                "alpha": res.alpha,
                "rejected": res.rejected,
                "flagged": res.flagged,
            })
    return rows
