"""Read-only git repository access.

Everything goes through the git command-line tool as a subprocess: log with
first-parent order, diff with rename detection and zero context, blame with
line ranges, ls-tree for file counts. No operation ever mutates a repository,
so handles are safe to share across worker threads.
"""

from __future__ import annotations

import logging
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from .diffparse import FileDelta, parse_unified_diff
from .errors import FileAbsent, IoError, LineOutOfRange, NotARepository, UnknownCommit

logger = logging.getLogger(__name__)

_RECORD_SEP = "\x1e"
_FIELD_SEP = "\x1f"


@dataclass
class CommitRecord:
    hash: str
    author_id: str
    timestamp: int
    message: str
    parents: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class LineRef:
    """A single line on one side of a change."""

    path: str
    line_no: int
    side: str  # "old" or "new"


@dataclass(frozen=True)
class BlameEntry:
    """Origin of one line per git blame: the introducing commit, and the
    line's number/path inside that commit."""

    commit: str
    orig_line: int
    orig_path: str


class RepoHandle:
    """Read-only handle on an on-disk git repository."""

    def __init__(self, root_path: Path, default_branch: str):
        self.root_path = root_path
        self.default_branch = default_branch
        self._known_commits: set[str] = set()
        self._line_counts: dict[tuple[str, str], int] = {}
        self._timestamps: dict[str, int] = {}
        self._empty_tree: str | None = None

    def __repr__(self) -> str:
        return f"RepoHandle({str(self.root_path)!r}, branch={self.default_branch!r})"


def _run_git(
    handle: RepoHandle, *args: str, check: bool = True
) -> subprocess.CompletedProcess[bytes]:
    try:
        proc = subprocess.run(
            ["git", "-C", str(handle.root_path), *args],
            capture_output=True,
        )
    except OSError as exc:
        raise IoError(f"failed to invoke git: {exc}") from exc
    if check and proc.returncode != 0:
        stderr = proc.stderr.decode("utf-8", errors="replace").strip()
        raise IoError(f"git {' '.join(args[:2])} failed: {stderr}")
    return proc


def open_repository(path: str | Path) -> RepoHandle:
    """Open a git repository for reading.

    Raises IoError when the path does not exist, NotARepository when it
    exists but holds no repository.
    """
    root = Path(path)
    if not root.exists():
        raise IoError(f"no such path: {root}")
    probe = subprocess.run(
        ["git", "-C", str(root), "rev-parse", "--git-dir"], capture_output=True
    )
    if probe.returncode != 0:
        raise NotARepository(f"not a git repository: {root}")
    handle = RepoHandle(root_path=root, default_branch="HEAD")
    head = _run_git(handle, "symbolic-ref", "--short", "-q", "HEAD", check=False)
    name = head.stdout.decode("utf-8", errors="replace").strip()
    if name:
        handle.default_branch = name
    return handle


def _require_commit(handle: RepoHandle, commit_hash: str) -> None:
    if commit_hash in handle._known_commits:
        return
    probe = _run_git(
        handle, "rev-parse", "--verify", "--quiet", f"{commit_hash}^{{commit}}",
        check=False,
    )
    if probe.returncode != 0:
        raise UnknownCommit(f"unknown commit: {commit_hash}")
    handle._known_commits.add(commit_hash)


def _empty_tree(handle: RepoHandle) -> str:
    if handle._empty_tree is None:
        proc = _run_git(handle, "hash-object", "-t", "tree", "/dev/null")
        handle._empty_tree = proc.stdout.decode().strip()
    return handle._empty_tree


def first_parent(handle: RepoHandle, commit_hash: str) -> str | None:
    _require_commit(handle, commit_hash)
    proc = _run_git(handle, "rev-list", "--parents", "-n", "1", commit_hash)
    parts = proc.stdout.decode().split()
    return parts[1] if len(parts) > 1 else None


def commit_timestamp(handle: RepoHandle, commit_hash: str) -> int:
    """Author timestamp (UTC seconds) of an arbitrary commit."""
    cached = handle._timestamps.get(commit_hash)
    if cached is not None:
        return cached
    _require_commit(handle, commit_hash)
    proc = _run_git(handle, "show", "-s", "--format=%at", commit_hash)
    ts = int(proc.stdout.decode().strip().splitlines()[-1])
    handle._timestamps[commit_hash] = ts
    return ts


def list_commits(
    handle: RepoHandle, since: int | None = None, until: int | None = None
) -> list[CommitRecord]:
    """First-parent history of the default branch, ascending by author
    timestamp with ties broken by hash. Bounds are inclusive."""
    fmt = f"%H{_FIELD_SEP}%an <%ae>{_FIELD_SEP}%at{_FIELD_SEP}%P{_FIELD_SEP}%B{_RECORD_SEP}"
    proc = _run_git(
        handle, "log", "--first-parent", f"--format={fmt}", handle.default_branch,
        check=False,
    )
    if proc.returncode != 0:
        # A repository with no commits yet has no history to list.
        stderr = proc.stderr.decode("utf-8", errors="replace")
        if "does not have any commits" in stderr or "unknown revision" in stderr:
            return []
        raise IoError(f"git log failed: {stderr.strip()}")
    records = []
    for chunk in proc.stdout.decode("utf-8", errors="replace").split(_RECORD_SEP):
        chunk = chunk.lstrip("\n")
        if not chunk.strip():
            continue
        commit_hash, author, ts, parents, message = chunk.split(_FIELD_SEP, 4)
        record = CommitRecord(
            hash=commit_hash,
            author_id=author.lower(),
            timestamp=int(ts),
            message=message,
            parents=parents.split(),
        )
        handle._timestamps[record.hash] = record.timestamp
        handle._known_commits.add(record.hash)
        records.append(record)
    records.sort(key=lambda r: (r.timestamp, r.hash))
    if since is not None:
        records = [r for r in records if r.timestamp >= since]
    if until is not None:
        records = [r for r in records if r.timestamp <= until]
    return records


def commit_diff(handle: RepoHandle, commit_hash: str) -> list[FileDelta]:
    """Per-file deltas of a commit against its first parent (the empty tree
    for root commits), with rename detection and zero context lines."""
    base = first_parent(handle, commit_hash) or _empty_tree(handle)
    proc = _run_git(
        handle, "diff", "--no-color", "--unified=0", "--find-renames",
        base, commit_hash,
    )
    deltas = parse_unified_diff(proc.stdout.decode("utf-8", errors="replace"))
    for delta in deltas:
        if delta.kind == "deleted" or delta.binary:
            delta.new_file_lines = 0
        else:
            delta.new_file_lines = file_line_count_at(handle, commit_hash, delta.path)
    return deltas


def file_line_count_at(handle: RepoHandle, commit_hash: str, path: str) -> int:
    """Text line count of a file at a commit; 0 when absent or binary."""
    key = (commit_hash, path)
    cached = handle._line_counts.get(key)
    if cached is not None:
        return cached
    _require_commit(handle, commit_hash)
    proc = _run_git(handle, "show", f"{commit_hash}:{path}", check=False)
    if proc.returncode != 0:
        count = 0
    else:
        blob = proc.stdout
        if b"\0" in blob:
            count = 0
        elif not blob:
            count = 0
        else:
            count = blob.count(b"\n") + (0 if blob.endswith(b"\n") else 1)
    handle._line_counts[key] = count
    return count


def file_lines_at(handle: RepoHandle, commit_hash: str, path: str) -> list[str]:
    """Full text content of a file at a commit, split into lines."""
    _require_commit(handle, commit_hash)
    proc = _run_git(handle, "show", f"{commit_hash}:{path}", check=False)
    if proc.returncode != 0:
        raise FileAbsent(f"{path} not present at {commit_hash}")
    return proc.stdout.decode("utf-8", errors="replace").splitlines()


def repo_file_count_at(handle: RepoHandle, commit_hash: str) -> int:
    """Number of tracked files in the tree at a commit."""
    _require_commit(handle, commit_hash)
    proc = _run_git(handle, "ls-tree", "-r", "-z", "--name-only", commit_hash)
    return sum(1 for entry in proc.stdout.split(b"\0") if entry)


def blame_line(
    handle: RepoHandle, path: str, line_no: int, at_commit: str
) -> str:
    """Hash of the commit that last touched an old-side line.

    The line is addressed in the file as it stood at at_commit's first
    parent, i.e. just before the change at at_commit."""
    entries = blame_lines(handle, path, [line_no], at_commit)
    return entries[line_no].commit


def blame_lines(
    handle: RepoHandle, path: str, line_nos: list[int], at_commit: str
) -> dict[int, BlameEntry]:
    """Blame several old-side lines of one file in a single pass.

    Returns a map from each requested line number to its BlameEntry with
    the origin commit, plus the line's number and path inside that commit.
    """
    _require_commit(handle, at_commit)
    parent = first_parent(handle, at_commit)
    if parent is None:
        raise FileAbsent(f"{at_commit} has no parent to blame against")
    probe = _run_git(handle, "cat-file", "-e", f"{parent}:{path}", check=False)
    if probe.returncode != 0:
        raise FileAbsent(f"{path} not present at {parent}")
    if not line_nos:
        return {}
    length = file_line_count_at(handle, parent, path)
    bad = [n for n in line_nos if n < 1 or n > length]
    if bad:
        raise LineOutOfRange(
            f"line {bad[0]} outside 1..{length} of {path} at {parent}"
        )
    result: dict[int, BlameEntry] = {}
    # Chunked to keep argv small; each line costs one "-L n,n" argument.
    for start in range(0, len(line_nos), 200):
        chunk = line_nos[start : start + 200]
        args = ["blame", "--line-porcelain"]
        for n in chunk:
            args += ["-L", f"{n},{n}"]
        args += [parent, "--", path]
        proc = _run_git(handle, *args)
        result.update(_parse_line_porcelain(proc.stdout.decode("utf-8", errors="replace")))
    return result


def _parse_line_porcelain(text: str) -> dict[int, BlameEntry]:
    entries: dict[int, BlameEntry] = {}
    commit = ""
    orig_line = 0
    final_line = 0
    filename = ""
    for line in text.split("\n"):
        if line.startswith("\t"):
            if commit:
                entries[final_line] = BlameEntry(commit, orig_line, filename)
            commit = ""
            continue
        head = line.split(" ")
        if len(head) >= 3 and len(head[0]) in (40, 64) and head[1].isdigit():
            commit, orig_line, final_line = head[0], int(head[1]), int(head[2])
        elif line.startswith("filename "):
            filename = line[len("filename "):]
    return entries
