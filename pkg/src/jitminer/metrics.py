"""Change-level feature metrics.

Fourteen per-commit features in five groups: diffusion (ns, nd, nf,
entropy), size (la, ld, lt), purpose (fix), history (ndev, age, nuc) and
experience (exp, rexp, sexp), plus the defective label. History and
experience read a prior-history index built in one sequential pass over
the commits, so per-commit extraction can then run from parallel workers
against the shared read-only index.
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_left
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .diffparse import FileDelta
from .errors import InvalidConfig, JitMinerError
from .gitrepo import (
    CommitRecord,
    RepoHandle,
    commit_diff,
    file_line_count_at,
    repo_file_count_at,
)
from .szz import CommitLabel
from .tickets import FixLink

logger = logging.getLogger(__name__)

DAY_SECONDS = 86400.0
YEAR_SECONDS = 365.25 * 86400.0

FEATURE_COLUMNS = (
    "ns", "nd", "nf", "entropy", "la", "ld", "lt",
    "fix", "ndev", "age", "nuc", "exp", "rexp", "sexp",
)
# Every feature except the boolean fix flag.
NUMERIC_FEATURES = tuple(c for c in FEATURE_COLUMNS if c != "fix")

ENTROPY_MODES = ("per_commit", "windowed")
LA_LD_NORMS = ("raw", "by_new_file_size", "by_lt")
LT_NORMS = ("raw", "by_nf")
NF_NORMS = ("raw", "by_repo_file_count")
NUC_NORMS = ("raw", "by_nf")


@dataclass
class MetricsConfig:
    entropy_mode: str = "per_commit"
    window_days: float = 14.0
    la_ld_norm: str = "raw"
    lt_norm: str = "raw"
    nf_norm: str = "by_repo_file_count"
    nuc_norm: str = "raw"
    rexp_year_offset: int = 0

    def __post_init__(self):
        if self.entropy_mode not in ENTROPY_MODES:
            raise InvalidConfig(f"entropy_mode must be one of {ENTROPY_MODES}")
        if self.la_ld_norm not in LA_LD_NORMS:
            raise InvalidConfig(f"la_ld_norm must be one of {LA_LD_NORMS}")
        if self.lt_norm not in LT_NORMS:
            raise InvalidConfig(f"lt_norm must be one of {LT_NORMS}")
        if self.nf_norm not in NF_NORMS:
            raise InvalidConfig(f"nf_norm must be one of {NF_NORMS}")
        if self.nuc_norm not in NUC_NORMS:
            raise InvalidConfig(f"nuc_norm must be one of {NUC_NORMS}")
        if not self.window_days > 0:
            raise InvalidConfig("window_days must be positive")
        if self.rexp_year_offset not in (0, -1):
            raise InvalidConfig("rexp_year_offset must be 0 or -1")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "MetricsConfig":
        kwargs = {}
        for config_field in (
            "entropy_mode", "la_ld_norm", "lt_norm", "nf_norm", "nuc_norm",
        ):
            if config_field in mapping:
                kwargs[config_field] = str(mapping[config_field])
        if "window_days" in mapping:
            kwargs["window_days"] = float(mapping["window_days"])
        if "rexp_year_offset" in mapping:
            kwargs["rexp_year_offset"] = int(mapping["rexp_year_offset"])
        return cls(**kwargs)


@dataclass
class FeatureVector:
    """One dataset row: commit id, the 14 metrics, and the label."""

    commit_hash: str
    ns: float = 0.0
    nd: float = 0.0
    nf: float = 0.0
    entropy: float = 0.0
    la: float = 0.0
    ld: float = 0.0
    lt: float = 0.0
    fix: bool = False
    ndev: float = 0.0
    age: float = 0.0
    nuc: float = 0.0
    exp: float = 0.0
    rexp: float = 0.0
    sexp: float = 0.0
    defective: bool = False

    def value(self, column: str) -> float | bool:
        return getattr(self, column)


@dataclass
class FeatureMatrix:
    """Rows in a fixed, documented column order.

    timestamps (parallel to rows) are present when the matrix came from a
    repository mine; a matrix imported from CSV has none. norm_bounds
    records the per-column (min, max) used by min_max_normalize so the
    same affine map can be replayed on unseen data.
    """

    rows: list[FeatureVector] = field(default_factory=list)
    feature_order: tuple[str, ...] = FEATURE_COLUMNS
    timestamps: list[int] | None = None
    norm_bounds: dict[str, tuple[float, float]] | None = None

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list[float]:
        return [float(row.value(name)) for row in self.rows]


def subsystem_of(path: str) -> str:
    """Root directory name; files at the repository root share subsystem ''."""
    return path.split("/", 1)[0] if "/" in path else ""


def directory_of(path: str) -> str:
    """Containing directory; '' for files at the repository root."""
    idx = path.rfind("/")
    return path[:idx] if idx >= 0 else ""


def diffusion_metrics(deltas: Sequence[FileDelta]) -> tuple[int, int, int]:
    """(ns, nd, nf): distinct subsystems, distinct directories, file count."""
    subsystems = {subsystem_of(d.path) for d in deltas}
    directories = {directory_of(d.path) for d in deltas}
    return len(subsystems), len(directories), len(deltas)


def _entropy_from_counts(counts: Iterable[float]) -> float:
    # Sorted so the float sum is exactly permutation invariant.
    positive = sorted(c for c in counts if c > 0)
    total = sum(positive)
    if total <= 0:
        return 0.0
    h = 0.0
    for c in positive:
        p = c / total
        h -= p * math.log2(p)
    return h


def change_entropy(deltas: Sequence[FileDelta]) -> float:
    """Shannon entropy of the modified-line distribution across files.

    Weight of file k is its added+deleted line count; files with no line
    changes are excluded, and a change concentrated in one file scores 0.
    """
    return _entropy_from_counts(d.lines_added + d.lines_deleted for d in deltas)


def window_entropy(touch_counts: Mapping[str, float] | Iterable[float]) -> float:
    """Entropy over per-file touch counts within a time window."""
    if isinstance(touch_counts, Mapping):
        return _entropy_from_counts(touch_counts.values())
    return _entropy_from_counts(touch_counts)


def size_metrics(
    handle: RepoHandle,
    commit: CommitRecord,
    deltas: Sequence[FileDelta],
    config: MetricsConfig | None = None,
) -> tuple[float, float, float]:
    """(la, ld, lt) with the configured normalization.

    Raw la/ld sum line changes over all files; raw lt is the mean
    pre-change line count of the touched files. by_new_file_size divides
    each file's counts by its post-change length (denominator 1 for
    deleted or empty files, so the raw count passes through).
    """
    config = config or MetricsConfig()
    parent = commit.parents[0] if commit.parents else None
    raw_la = float(sum(d.lines_added for d in deltas))
    raw_ld = float(sum(d.lines_deleted for d in deltas))
    before_counts = []
    for delta in deltas:
        if parent is None:
            before_counts.append(0)
        else:
            before_counts.append(file_line_count_at(handle, parent, delta.source_path))
    lt = sum(before_counts) / len(deltas) if deltas else 0.0

    if config.la_ld_norm == "by_new_file_size":
        la = ld = 0.0
        for delta in deltas:
            denom = delta.new_file_lines
            if delta.kind == "deleted" or denom <= 0:
                denom = 1
            la += delta.lines_added / denom
            ld += delta.lines_deleted / denom
    elif config.la_ld_norm == "by_lt":
        if lt > 0:
            la, ld = raw_la / lt, raw_ld / lt
        else:
            la, ld = raw_la, raw_ld
    else:
        la, ld = raw_la, raw_ld

    if config.lt_norm == "by_nf" and deltas:
        lt = lt / len(deltas)
    return la, ld, lt


class HistoryIndex:
    """Prior-touch index over a commit sequence.

    Built once, in (timestamp, hash) order; queries then filter on the
    sequence number so a commit only ever sees strictly earlier history.
    A rename carries the old path's touch history over to the new path.
    """

    def __init__(self):
        self._file_touches: dict[str, list[tuple[int, int, str, str]]] = {}
        self._author_commits: dict[str, list[tuple[int, int, frozenset[str]]]] = {}
        self._seq_of: dict[str, int] = {}
        self._commit_paths: list[tuple[int, list[str]]] = []

    @classmethod
    def build(
        cls,
        commits: Sequence[CommitRecord],
        deltas_by_hash: Mapping[str, Sequence[FileDelta]],
    ) -> "HistoryIndex":
        index = cls()
        ordered = sorted(commits, key=lambda r: (r.timestamp, r.hash))
        for seq, commit in enumerate(ordered):
            index._observe(seq, commit, deltas_by_hash.get(commit.hash, ()))
        return index

    def _observe(self, seq: int, commit: CommitRecord, deltas: Sequence[FileDelta]):
        self._seq_of[commit.hash] = seq
        paths = []
        for delta in deltas:
            if delta.kind == "renamed" and delta.old_path and delta.old_path != delta.path:
                carried = self._file_touches.pop(delta.old_path, [])
                existing = self._file_touches.get(delta.path, [])
                merged = sorted(existing + carried)
                self._file_touches[delta.path] = merged
            touches = self._file_touches.setdefault(delta.path, [])
            touches.append((seq, commit.timestamp, commit.author_id, commit.hash))
            paths.append(delta.path)
        subsystems = frozenset(subsystem_of(p) for p in paths)
        self._author_commits.setdefault(commit.author_id, []).append(
            (seq, commit.timestamp, subsystems)
        )
        self._commit_paths.append((commit.timestamp, paths))

    def seq_of(self, commit_hash: str) -> int:
        return self._seq_of[commit_hash]

    def prior_touches(self, path: str, before_seq: int):
        touches = self._file_touches.get(path, [])
        cut = bisect_left(touches, (before_seq, -1, "", ""))
        return touches[:cut]

    def prior_author_history(self, author_id: str, before_seq: int):
        entries = self._author_commits.get(author_id, [])
        cut = bisect_left(entries, (before_seq, -1, frozenset()))
        return entries[:cut]

    def window_touch_counts(self, end_ts: int, window_seconds: float) -> dict[str, int]:
        counts: dict[str, int] = {}
        for ts, paths in self._commit_paths:
            if end_ts - window_seconds < ts <= end_ts:
                for p in paths:
                    counts[p] = counts.get(p, 0) + 1
        return counts


def history_metrics(
    index: HistoryIndex,
    commit: CommitRecord,
    deltas: Sequence[FileDelta],
    config: MetricsConfig | None = None,
) -> tuple[float, float, float]:
    """(ndev, age, nuc) from prior touches of the files this commit changes.

    ndev and nuc are unions across the touched files; age is the mean in
    days since each file's previous change, files without history excluded
    (0 when none has any).
    """
    config = config or MetricsConfig()
    seq = index.seq_of(commit.hash)
    authors: set[str] = set()
    prior_commits: set[str] = set()
    intervals = []
    for delta in deltas:
        # Prior history lives under the old-side name for renames/deletes.
        touches = index.prior_touches(delta.source_path, seq)
        for _, _, author, commit_hash in touches:
            authors.add(author)
            prior_commits.add(commit_hash)
        if touches:
            last_ts = max(t[1] for t in touches)
            intervals.append((commit.timestamp - last_ts) / DAY_SECONDS)
    age = sum(intervals) / len(intervals) if intervals else 0.0
    nuc = float(len(prior_commits))
    if config.nuc_norm == "by_nf" and deltas:
        nuc = nuc / len(deltas)
    return float(len(authors)), age, nuc


def rexp_weight(age_seconds: float, year_offset: int = 0) -> float:
    """Recency weight 1/(n+1), n = whole years elapsed (clamped at 0
    after the configured offset)."""
    years = math.floor(age_seconds / YEAR_SECONDS)
    return 1.0 / (max(years + year_offset, 0) + 1)


def experience_metrics(
    index: HistoryIndex,
    commit: CommitRecord,
    deltas: Sequence[FileDelta],
    config: MetricsConfig | None = None,
) -> tuple[float, float, float]:
    """(exp, rexp, sexp) for the commit's author.

    exp counts the author's prior commits, rexp weights each by
    1/(years+1), sexp counts those touching a subsystem this commit also
    touches.
    """
    config = config or MetricsConfig()
    seq = index.seq_of(commit.hash)
    prior = index.prior_author_history(commit.author_id, seq)
    exp = float(len(prior))
    rexp = sum(
        rexp_weight(commit.timestamp - ts, config.rexp_year_offset)
        for _, ts, _ in prior
    )
    current = {subsystem_of(d.path) for d in deltas}
    sexp = float(sum(1 for _, _, subs in prior if subs & current))
    return exp, rexp, sexp


class FeatureExtractor:
    """Shared context for turning commits into FeatureVectors.

    Fetches per-commit diffs once, builds the history index sequentially,
    then lets extract()/extract_all() run per commit (extract_all can fan
    out to worker threads; the row order never depends on worker count).
    """

    def __init__(
        self,
        handle: RepoHandle,
        commits: Sequence[CommitRecord],
        labels: Sequence[CommitLabel],
        fix_links: Sequence[FixLink],
        config: MetricsConfig | None = None,
        deltas_by_hash: Mapping[str, list[FileDelta]] | None = None,
        jobs: int = 1,
    ):
        self.handle = handle
        self.config = config or MetricsConfig()
        self.commits = sorted(commits, key=lambda r: (r.timestamp, r.hash))
        self._defective = {lbl.commit_hash for lbl in labels if lbl.defective}
        self._fixes = {link.commit_hash for link in fix_links}
        if deltas_by_hash is None:
            deltas_by_hash = self._fetch_deltas(jobs)
        self.deltas_by_hash = deltas_by_hash
        self.index = HistoryIndex.build(self.commits, deltas_by_hash)

    def _fetch_deltas(self, jobs: int) -> dict[str, list[FileDelta]]:
        def fetch(record: CommitRecord) -> list[FileDelta]:
            return commit_diff(self.handle, record.hash)

        if jobs > 1 and len(self.commits) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                fetched = list(pool.map(fetch, self.commits))
        else:
            fetched = [fetch(r) for r in self.commits]
        return {r.hash: d for r, d in zip(self.commits, fetched)}

    def extract(self, commit: CommitRecord) -> FeatureVector:
        config = self.config
        deltas = self.deltas_by_hash.get(commit.hash, [])
        ns, nd, nf = diffusion_metrics(deltas)
        if config.entropy_mode == "windowed":
            counts = self.index.window_touch_counts(
                commit.timestamp, config.window_days * DAY_SECONDS
            )
            entropy = window_entropy(counts)
        else:
            entropy = change_entropy(deltas)
        la, ld, lt = size_metrics(self.handle, commit, deltas, config)
        ndev, age, nuc = history_metrics(self.index, commit, deltas, config)
        exp, rexp, sexp = experience_metrics(self.index, commit, deltas, config)

        nf_value = float(nf)
        if config.nf_norm == "by_repo_file_count":
            tracked = repo_file_count_at(self.handle, commit.hash)
            if tracked > 0:
                nf_value = nf / tracked
        return FeatureVector(
            commit_hash=commit.hash,
            ns=float(ns),
            nd=float(nd),
            nf=nf_value,
            entropy=entropy,
            la=la,
            ld=ld,
            lt=lt,
            fix=commit.hash in self._fixes,
            ndev=ndev,
            age=age,
            nuc=nuc,
            exp=exp,
            rexp=rexp,
            sexp=sexp,
            defective=commit.hash in self._defective,
        )

    def extract_all(self, jobs: int = 1) -> FeatureMatrix:
        def safe_extract(record: CommitRecord) -> FeatureVector | None:
            try:
                return self.extract(record)
            except JitMinerError as exc:
                logger.warning("row for %s dropped: %s", record.hash, exc)
                return None

        if jobs > 1 and len(self.commits) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(safe_extract, self.commits))
        else:
            rows = [safe_extract(r) for r in self.commits]
        matrix = FeatureMatrix(
            rows=[r for r in rows if r is not None],
            timestamps=[
                c.timestamp for c, r in zip(self.commits, rows) if r is not None
            ],
        )
        return matrix


def extract_features(
    handle: RepoHandle,
    commit: CommitRecord,
    labels: Sequence[CommitLabel],
    fix_links: Sequence[FixLink],
    config: MetricsConfig | None = None,
    extractor: FeatureExtractor | None = None,
) -> FeatureVector:
    """One-commit convenience wrapper; builds the full-history extractor
    unless one is supplied."""
    if extractor is None:
        from .gitrepo import list_commits

        extractor = FeatureExtractor(handle, list_commits(handle), labels, fix_links, config)
    return extractor.extract(commit)


def min_max_normalize(
    matrix: FeatureMatrix, columns: Sequence[str] | None = None
) -> FeatureMatrix:
    """Rescale selected numeric columns to [0, 1] via (x-min)/(max-min).

    Boolean columns are untouched; a constant column maps to 0. The
    (min, max) pairs are recorded on the result for replay on unseen data.
    """
    columns = tuple(columns) if columns is not None else NUMERIC_FEATURES
    bounds: dict[str, tuple[float, float]] = {}
    for name in columns:
        if name not in NUMERIC_FEATURES:
            raise InvalidConfig(f"not a normalizable column: {name}")
        values = matrix.column(name)
        if values:
            bounds[name] = (min(values), max(values))
        else:
            bounds[name] = (0.0, 0.0)
    result = apply_min_max(matrix, bounds)
    result.norm_bounds = dict(bounds)
    return result


def apply_min_max(
    matrix: FeatureMatrix, bounds: Mapping[str, tuple[float, float]]
) -> FeatureMatrix:
    """Replay recorded (min, max) bounds onto a matrix (e.g. a test split)."""
    new_rows = []
    for row in matrix.rows:
        updates = {}
        for name, (lo, hi) in bounds.items():
            value = float(row.value(name))
            updates[name] = (value - lo) / (hi - lo) if hi > lo else 0.0
        new_rows.append(replace(row, **updates))
    return FeatureMatrix(
        rows=new_rows,
        feature_order=matrix.feature_order,
        timestamps=list(matrix.timestamps) if matrix.timestamps else None,
        norm_bounds=dict(bounds),
    )
