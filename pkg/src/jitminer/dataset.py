"""Dataset persistence and summary artifacts.

The CSV schema is fixed and bit-stable: one header, booleans as 0/1,
floats printed with six decimals, LF line endings. import_csv is the
exact inverse on matrices whose values are representable at that
precision.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import EmptyDataset, IoError, MalformedRow, SchemaMismatch
from .gitrepo import RepoHandle, commit_diff
from .metrics import FEATURE_COLUMNS, NUMERIC_FEATURES, FeatureMatrix, FeatureVector
from .szz import CommitLabel

CSV_HEADER = ("commit",) + FEATURE_COLUMNS + ("defective",)


@dataclass(frozen=True)
class ColumnStats:
    min: float
    max: float
    mean: float
    stddev: float


@dataclass
class DatasetSummary:
    stats: dict[str, ColumnStats]
    row_count: int
    defective_count: int
    fix_count: int
    period: tuple[int, int] | None = None

    @property
    def defective_pct(self) -> float:
        return 100.0 * self.defective_count / self.row_count if self.row_count else 0.0

    def to_dict(self) -> dict:
        return {
            "row_count": self.row_count,
            "defective_count": self.defective_count,
            "defective_pct": round(self.defective_pct, 4),
            "fix_count": self.fix_count,
            "period": list(self.period) if self.period else None,
            "features": {
                name: {
                    "min": s.min, "max": s.max, "mean": s.mean, "stddev": s.stddev,
                }
                for name, s in self.stats.items()
            },
        }


@dataclass
class ExtensionReport:
    rows: list[tuple[str, float]]
    mean_files_per_defective_commit: float
    mean_distinct_extensions: float
    defective_commits: int = 0

    def to_dict(self) -> dict:
        return {
            "defective_commits": self.defective_commits,
            "mean_files_per_defective_commit": self.mean_files_per_defective_commit,
            "mean_distinct_extensions": self.mean_distinct_extensions,
            "extensions": [
                {"extension": ext, "mean_files_changed": mean} for ext, mean in self.rows
            ],
        }


def _format_value(column: str, value: float | bool) -> str:
    if column in ("fix", "defective"):
        return "1" if value else "0"
    return f"{float(value):.6f}"


def export_csv(matrix: FeatureMatrix, path: str | Path) -> int:
    """Write the matrix; returns the number of data rows written."""
    lines = [",".join(CSV_HEADER)]
    for row in matrix.rows:
        fields = [row.commit_hash]
        fields += [_format_value(c, row.value(c)) for c in FEATURE_COLUMNS]
        fields.append(_format_value("defective", row.defective))
        lines.append(",".join(fields))
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return len(matrix.rows)


def import_csv(path: str | Path) -> FeatureMatrix:
    """Read a dataset written by export_csv.

    The header must match the fixed schema exactly (order included);
    the first offending column name is reported. Row errors carry the
    1-based data-row index.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaMismatch("file is empty, header expected", column=None)
    _check_header(tuple(header))

    rows = []
    for idx, record in enumerate(reader, start=1):
        if len(record) != len(CSV_HEADER):
            raise MalformedRow(
                f"expected {len(CSV_HEADER)} fields, got {len(record)}", idx
            )
        values: dict[str, float | bool] = {}
        commit_hash = record[0]
        if not commit_hash:
            raise MalformedRow("empty commit hash", idx)
        for name, raw in zip(CSV_HEADER[1:], record[1:]):
            if name in ("fix", "defective"):
                if raw not in ("0", "1"):
                    raise MalformedRow(f"column {name} must be 0 or 1, got {raw!r}", idx)
                values[name] = raw == "1"
            else:
                try:
                    values[name] = float(raw)
                except ValueError:
                    raise MalformedRow(
                        f"column {name} is not numeric: {raw!r}", idx
                    ) from None
                if math.isnan(values[name]):
                    raise MalformedRow(f"column {name} is NaN", idx)
        rows.append(FeatureVector(commit_hash=commit_hash, **values))
    return FeatureMatrix(rows=rows)


def _check_header(header: tuple[str, ...]) -> None:
    expected = CSV_HEADER
    if header == expected:
        return
    for name in header:
        if name not in expected:
            raise SchemaMismatch(f"unknown column: {name!r}", column=name)
    for name in expected:
        if name not in header:
            raise SchemaMismatch(f"missing column: {name!r}", column=name)
    for got, want in zip(header, expected):
        if got != want:
            raise SchemaMismatch(
                f"column {got!r} out of order, expected {want!r}", column=got
            )
    raise SchemaMismatch("header does not match schema", column=None)


def summarize(matrix: FeatureMatrix) -> DatasetSummary:
    """Population statistics per numeric column plus label counts.

    The covered period is only known when the matrix still carries commit
    timestamps from the mining run.
    """
    if not matrix.rows:
        raise EmptyDataset("cannot summarize an empty dataset")
    stats = {}
    for name in NUMERIC_FEATURES:
        values = matrix.column(name)
        n = len(values)
        mean = sum(values) / n
        variance = sum((v - mean) ** 2 for v in values) / n
        stats[name] = ColumnStats(
            min=min(values), max=max(values), mean=mean, stddev=math.sqrt(variance)
        )
    period = None
    if matrix.timestamps:
        period = (min(matrix.timestamps), max(matrix.timestamps))
    return DatasetSummary(
        stats=stats,
        row_count=len(matrix.rows),
        defective_count=sum(1 for r in matrix.rows if r.defective),
        fix_count=sum(1 for r in matrix.rows if r.fix),
        period=period,
    )


def extension_of(path: str) -> str:
    """Lowercased suffix after the final dot; dotfiles count as extensionless."""
    name = path.rsplit("/", 1)[-1]
    idx = name.rfind(".")
    if idx <= 0:
        return "no extension"
    return name[idx + 1 :].lower() or "no extension"


def extension_report(
    handle: RepoHandle, labels: Sequence[CommitLabel]
) -> ExtensionReport:
    """Per-extension modification averages over defective commits only."""
    defective = [lbl.commit_hash for lbl in labels if lbl.defective]
    if not defective:
        return ExtensionReport(
            rows=[],
            mean_files_per_defective_commit=0.0,
            mean_distinct_extensions=0.0,
            defective_commits=0,
        )
    ext_totals: dict[str, int] = {}
    total_files = 0
    total_distinct = 0
    for commit_hash in defective:
        deltas = commit_diff(handle, commit_hash)
        seen = set()
        for delta in deltas:
            ext = extension_of(delta.path)
            ext_totals[ext] = ext_totals.get(ext, 0) + 1
            seen.add(ext)
        total_files += len(deltas)
        total_distinct += len(seen)
    n = len(defective)
    rows = sorted(
        ((ext, count / n) for ext, count in ext_totals.items()),
        key=lambda item: (-item[1], item[0]),
    )
    return ExtensionReport(
        rows=rows,
        mean_files_per_defective_commit=total_files / n,
        mean_distinct_extensions=total_distinct / n,
        defective_commits=n,
    )
