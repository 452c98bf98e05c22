"""Named-column feature table with CSV + sidecar-schema persistence.

Three variants exist: per-player ("P"), per-match ("M"), and the distilled
per-match variant ("M_bar", at most 30 rows per owner). Numeric cells are
always floats, booleans are Python bools, categoricals are strings, which
keeps save/load round trips byte-stable.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .errors import SchemaError

VARIANTS = ("P", "M", "M_bar")
COLUMN_KINDS = ("numeric", "categorical", "boolean")

DISTILL_CAP = 30


@dataclass(frozen=True)
class Column:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in COLUMN_KINDS:
            raise SchemaError(f"unknown column kind {self.kind!r}", path=self.name)


@dataclass
class FeatureMatrix:
    variant: str
    columns: list[Column]
    rows: list[list]
    row_owner: list[int]
    row_match: Optional[list[int]] = None
    variant_seed: Optional[int] = None
    config_hash: Optional[str] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise SchemaError(f"unknown variant {self.variant!r}")
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise SchemaError(f"row {i} has {len(row)} cells, expected {width}")
        if len(self.row_owner) != len(self.rows):
            raise SchemaError("row_owner length does not match rows")
        if self.row_match is not None and len(self.row_match) != len(self.rows):
            raise SchemaError("row_match length does not match rows")
        if self.variant == "M_bar":
            per_owner: dict[int, int] = {}
            for owner in self.row_owner:
                per_owner[owner] = per_owner.get(owner, 0) + 1
            worst = max(per_owner.values(), default=0)
            if worst > DISTILL_CAP:
                raise SchemaError(f"M_bar has {worst} rows for one owner (cap {DISTILL_CAP})")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column_index(self, name: str) -> int:
        for i, col in enumerate(self.columns):
            if col.name == name:
                return i
        raise KeyError(name)

    def column_values(self, name: str) -> list:
        idx = self.column_index(name)
        return [row[idx] for row in self.rows]

    def owners(self) -> list[int]:
        """Distinct owners in first-appearance order."""
        seen: dict[int, None] = {}
        for owner in self.row_owner:
            seen.setdefault(owner)
        return list(seen)

    def rows_of_owner(self, owner: int) -> list[int]:
        return [i for i, o in enumerate(self.row_owner) if o == owner]

    def subset(self, indices: Sequence[int], variant: str | None = None) -> "FeatureMatrix":
        return FeatureMatrix(
            variant=variant or self.variant,
            columns=list(self.columns),
            rows=[self.rows[i] for i in indices],
            row_owner=[self.row_owner[i] for i in indices],
            row_match=[self.row_match[i] for i in indices] if self.row_match else None,
            variant_seed=self.variant_seed,
            config_hash=self.config_hash,
        )

    def project(self, names: Sequence[str]) -> "FeatureMatrix":
        idx = [self.column_index(n) for n in names]
        return FeatureMatrix(
            variant=self.variant,
            columns=[self.columns[i] for i in idx],
            rows=[[row[i] for i in idx] for row in self.rows],
            row_owner=list(self.row_owner),
            row_match=list(self.row_match) if self.row_match else None,
            variant_seed=self.variant_seed,
            config_hash=self.config_hash,
        )

    def column_hash(self) -> str:
        blob = "|".join(f"{c.name}:{c.kind}" for c in self.columns)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _format_cell(value, kind: str) -> str:
    if kind == "boolean":
        return "true" if value else "false"
    if kind == "numeric":
        return repr(float(value))
    return str(value)


def _parse_cell(text: str, kind: str):
    if kind == "boolean":
        return text == "true"
    if kind == "numeric":
        return float(text)
    return text


def save_matrix(matrix: FeatureMatrix, csv_path: str | Path) -> None:
    """CSV of the rows plus a `.schema.json` sidecar with the metadata."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    header = ["_owner"] + (["_match"] if matrix.row_match is not None else [])
    header += [c.name for c in matrix.columns]
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, row in enumerate(matrix.rows):
            lead = [str(matrix.row_owner[i])]
            if matrix.row_match is not None:
                lead.append(str(matrix.row_match[i]))
            writer.writerow(lead + [_format_cell(v, c.kind)
                                    for v, c in zip(row, matrix.columns)])
    sidecar = {
        "format_version": 1,
        "variant": matrix.variant,
        "columns": [{"name": c.name, "kind": c.kind} for c in matrix.columns],
        "has_match_ids": matrix.row_match is not None,
        "variant_seed": matrix.variant_seed,
        "config_hash": matrix.config_hash,
        "n_rows": matrix.n_rows,
        "column_hash": matrix.column_hash(),
    }
    schema_path = csv_path.with_suffix(csv_path.suffix + ".schema.json")
    schema_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")


def load_matrix(csv_path: str | Path) -> FeatureMatrix:
    csv_path = Path(csv_path)
    schema_path = csv_path.with_suffix(csv_path.suffix + ".schema.json")
    if not schema_path.exists():
        raise SchemaError(f"missing sidecar schema for {csv_path}")
    sidecar = json.loads(schema_path.read_text(encoding="utf-8"))
    columns = [Column(c["name"], c["kind"]) for c in sidecar["columns"]]
    has_match = bool(sidecar.get("has_match_ids"))
    rows: list[list] = []
    owners: list[int] = []
    match_ids: list[int] = [] if has_match else None  # type: ignore[assignment]
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["_owner"] + (["_match"] if has_match else []) + [c.name for c in columns]
        if header != expected:
            raise SchemaError("CSV header does not match sidecar schema")
        for rec in reader:
            owners.append(int(rec[0]))
            offset = 1
            if has_match:
                match_ids.append(int(rec[1]))
                offset = 2
            rows.append([_parse_cell(t, c.kind)
                         for t, c in zip(rec[offset:], columns)])
    return FeatureMatrix(
        variant=sidecar["variant"],
        columns=columns,
        rows=rows,
        row_owner=owners,
        row_match=match_ids,
        variant_seed=sidecar.get("variant_seed"),
        config_hash=sidecar.get("config_hash"),
    )
