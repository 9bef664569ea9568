"""Shared fixtures: deterministic git repositories and dataset builders."""

from __future__ import annotations

import subprocess
from pathlib import Path

import pytest

from jitminer.metrics import FeatureMatrix, FeatureVector

# Fixed epoch base so commit hashes are stable run to run.
T0 = 1_600_000_000
DAY = 86_400

ALICE = ("alice", "alice@example.org")
BOB = ("bob", "bob@example.org")


class GitRepoBuilder:
    """Writes commits with pinned authors and timestamps so every hash is
    reproducible across runs and machines."""

    def __init__(self, root: Path):
        self.root = root
        root.mkdir(parents=True, exist_ok=True)
        self._git("init", "-q", "-b", "main")
        self._git("config", "user.name", ALICE[0])
        self._git("config", "user.email", ALICE[1])
        self.hashes: list[str] = []

    def _git(self, *args: str, env: dict | None = None) -> str:
        proc = subprocess.run(
            ["git", "-C", str(self.root), *args],
            capture_output=True,
            text=True,
            env=env,
        )
        if proc.returncode != 0:
            raise RuntimeError(f"git {args} failed: {proc.stderr}")
        return proc.stdout

    def commit(
        self,
        files: dict[str, str | None],
        message: str,
        author: tuple[str, str] = ALICE,
        ts: int | None = None,
    ) -> str:
        """Apply file edits (None deletes) and commit them at a fixed time."""
        if ts is None:
            ts = T0 + len(self.hashes) * DAY
        for rel, content in files.items():
            target = self.root / rel
            if content is None:
                target.unlink()
            else:
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_text(content, encoding="utf-8")
        self._git("add", "-A")
        import os

        env = dict(os.environ)
        env.update(
            GIT_AUTHOR_NAME=author[0],
            GIT_AUTHOR_EMAIL=author[1],
            GIT_COMMITTER_NAME=author[0],
            GIT_COMMITTER_EMAIL=author[1],
            GIT_AUTHOR_DATE=f"{ts} +0000",
            GIT_COMMITTER_DATE=f"{ts} +0000",
        )
        self._git("commit", "-q", "--allow-empty", "-m", message, env=env)
        commit_hash = self._git("rev-parse", "HEAD").strip()
        self.hashes.append(commit_hash)
        return commit_hash

    def move(self, old: str, new: str) -> None:
        """Stage a rename; combine with commit({}, msg) to record it."""
        self._git("mv", old, new)


@pytest.fixture
def repo_builder(tmp_path):
    def build(name: str = "repo") -> GitRepoBuilder:
        return GitRepoBuilder(tmp_path / name)

    return build


def make_matrix(values_by_column: dict[str, list], defective: list[bool] | None = None):
    """FeatureMatrix from per-column values; missing columns default to 0."""
    n = max(len(v) for v in values_by_column.values()) if values_by_column else 0
    if defective is None:
        defective = [False] * n
    rows = []
    for i in range(n):
        kwargs = {col: vals[i] for col, vals in values_by_column.items()}
        rows.append(
            FeatureVector(
                commit_hash=f"{i:040x}", defective=defective[i], **kwargs
            )
        )
    return FeatureMatrix(rows=rows)
