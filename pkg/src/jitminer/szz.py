"""Bug-inducing commit identification (SZZ, phase 2).

From each fix commit, the deleted lines of its diff are blamed at the fix's
first parent; the blamed commits become inducing candidates. Candidates
newer than the bug report are dropped unless they are themselves fixes
(partial fixes). Every mined commit then receives one label.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import JitMinerError
from .gitrepo import (
    LineRef,
    RepoHandle,
    blame_lines,
    commit_diff,
    commit_timestamp,
)
from .gitrepo import CommitRecord
from .tickets import BugTicket, FixLink

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InducingCandidate:
    candidate_hash: str
    fix_hash: str
    path: str
    old_line_no: int
    candidate_timestamp: int


@dataclass
class InducingPair:
    inducing_hash: str
    fix_hash: str
    ticket_id: str | None
    evidence: list[LineRef]
    partial_fix: bool = False

    def key(self) -> tuple[str, str, str]:
        return (self.fix_hash, self.inducing_hash, self.ticket_id or "")


@dataclass
class CommitLabel:
    commit_hash: str
    defective: bool
    fix: bool
    inducing_pairs: list[InducingPair] = field(default_factory=list)


def _is_blank(text: str) -> bool:
    return not text.strip()


def candidate_inducers(handle: RepoHandle, fix: FixLink) -> list[InducingCandidate]:
    """Blame every non-blank deleted line of the fix commit's diff.

    Pure-addition fixes yield no candidates: an added line has no prior
    author to blame. Whitespace-only deletions are skipped to keep
    cosmetic churn out of the evidence.
    """
    candidates: list[InducingCandidate] = []
    seen: set[tuple[str, str, int]] = set()
    for delta in commit_diff(handle, fix.commit_hash):
        if delta.binary or delta.kind == "added":
            continue
        line_nos = [
            no for no, text in delta.iter_deleted_lines() if not _is_blank(text)
        ]
        if not line_nos:
            continue
        entries = blame_lines(handle, delta.source_path, line_nos, fix.commit_hash)
        for no in line_nos:
            entry = entries.get(no)
            if entry is None:
                logger.warning(
                    "blame returned nothing for %s:%d at %s",
                    delta.source_path, no, fix.commit_hash,
                )
                continue
            key = (entry.commit, delta.source_path, no)
            if key in seen:
                continue
            seen.add(key)
            candidates.append(
                InducingCandidate(
                    candidate_hash=entry.commit,
                    fix_hash=fix.commit_hash,
                    path=delta.source_path,
                    old_line_no=no,
                    candidate_timestamp=commit_timestamp(handle, entry.commit),
                )
            )
    return candidates


def filter_candidates(
    candidates: list[InducingCandidate],
    ticket: BugTicket | None,
    fix_links: list[FixLink],
    partial_fix_detection: bool = True,
) -> list[InducingPair]:
    """Apply the date rule and group surviving candidates into pairs.

    A candidate older than the ticket is accepted outright. A candidate
    newer than the ticket can only have broken an earlier, incomplete
    repair, so it is kept (flagged partial_fix) iff it is itself a linked
    fix commit. Keyword links carry no ticket and no date filter applies.
    """
    fix_hashes = {link.commit_hash for link in fix_links}
    groups: dict[str, list[InducingCandidate]] = {}
    for cand in candidates:
        groups.setdefault(cand.candidate_hash, []).append(cand)

    pairs: list[InducingPair] = []
    for candidate_hash in sorted(groups):
        members = groups[candidate_hash]
        partial = False
        if ticket is not None:
            timestamp = members[0].candidate_timestamp
            if timestamp >= ticket.created_at:
                if not (partial_fix_detection and candidate_hash in fix_hashes):
                    continue
                partial = True
        evidence = sorted(
            {LineRef(m.path, m.old_line_no, "old") for m in members},
            key=lambda ref: (ref.path, ref.line_no),
        )
        pairs.append(
            InducingPair(
                inducing_hash=candidate_hash,
                fix_hash=members[0].fix_hash,
                ticket_id=ticket.ticket_id if ticket else None,
                evidence=evidence,
                partial_fix=partial,
            )
        )
    return pairs


def run_szz(
    handle: RepoHandle,
    commits: list[CommitRecord],
    fix_links: list[FixLink],
    tickets: list[BugTicket],
    jobs: int = 1,
    partial_fix_detection: bool = True,
) -> tuple[list[InducingPair], list[CommitLabel]]:
    """End-to-end labeling: trace, filter, merge, label every commit.

    Per-fix tracing failures are demoted to warnings so one unreadable
    commit cannot sink the run. Output order is canonical: pairs by
    (fix hash, inducing hash), labels by (timestamp, hash).
    """
    tickets_by_id = {t.ticket_id: t for t in tickets}
    unique_fixes: list[str] = []
    for link in fix_links:
        if link.commit_hash not in unique_fixes:
            unique_fixes.append(link.commit_hash)

    def trace(fix_hash: str) -> list[InducingCandidate]:
        probe = FixLink(fix_hash, None, "keyword", "")
        try:
            return candidate_inducers(handle, probe)
        except JitMinerError as exc:
            logger.warning("skipping fix %s: %s", fix_hash, exc)
            return []

    if jobs > 1 and len(unique_fixes) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            traced = list(pool.map(trace, unique_fixes))
    else:
        traced = [trace(h) for h in unique_fixes]
    candidates_by_fix = dict(zip(unique_fixes, traced))

    pairs: list[InducingPair] = []
    seen_keys: set[tuple[str, str, str]] = set()
    for link in fix_links:
        ticket = tickets_by_id.get(link.ticket_id) if link.ticket_id else None
        for pair in filter_candidates(
            candidates_by_fix[link.commit_hash], ticket, fix_links,
            partial_fix_detection,
        ):
            if pair.key() in seen_keys:
                continue
            seen_keys.add(pair.key())
            pairs.append(pair)
    pairs.sort(key=InducingPair.key)

    by_inducing: dict[str, list[InducingPair]] = {}
    for pair in pairs:
        by_inducing.setdefault(pair.inducing_hash, []).append(pair)
    fix_hashes = {link.commit_hash for link in fix_links}

    labels = [
        CommitLabel(
            commit_hash=record.hash,
            defective=record.hash in by_inducing,
            fix=record.hash in fix_hashes,
            inducing_pairs=by_inducing.get(record.hash, []),
        )
        for record in sorted(commits, key=lambda r: (r.timestamp, r.hash))
    ]
    return pairs, labels


def defect_lines(handle: RepoHandle, pair: InducingPair) -> list[LineRef]:
    """New-side lines the inducing commit added that the fix later removed.

    Each evidence line is blamed again to recover its number and path inside
    the inducing commit; lines whose blame no longer lands on the inducing
    commit (rename or history edge cases) are dropped with a warning.
    """
    added: set[tuple[str, int]] = set()
    for delta in commit_diff(handle, pair.inducing_hash):
        if delta.binary:
            continue
        for no, _ in delta.iter_added_lines():
            added.add((delta.path, no))

    by_path: dict[str, list[int]] = {}
    for ref in pair.evidence:
        by_path.setdefault(ref.path, []).append(ref.line_no)

    found: set[LineRef] = set()
    for path, nos in sorted(by_path.items()):
        entries = blame_lines(handle, path, sorted(nos), pair.fix_hash)
        for no in nos:
            entry = entries.get(no)
            if entry is None or entry.commit != pair.inducing_hash:
                continue
            if (entry.orig_path, entry.orig_line) in added:
                found.add(LineRef(entry.orig_path, entry.orig_line, "new"))

    result = sorted(found, key=lambda ref: (ref.path, ref.line_no))
    if not result:
        logger.warning(
            "no defect lines attributable for pair %s -> %s",
            pair.inducing_hash, pair.fix_hash,
        )
    return result


def write_pairs_jsonl(pairs: list[InducingPair], path: str | Path) -> int:
    """Audit trail: one JSON object per pair, stable key order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pair in pairs:
            fh.write(json.dumps(_pair_to_dict(pair), sort_keys=True))
            fh.write("\n")
    return len(pairs)


def read_pairs_jsonl(path: str | Path) -> list[InducingPair]:
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            pairs.append(
                InducingPair(
                    inducing_hash=obj["inducing_hash"],
                    fix_hash=obj["fix_hash"],
                    ticket_id=obj.get("ticket_id"),
                    evidence=[
                        LineRef(e["path"], e["line_no"], e["side"])
                        for e in obj["evidence"]
                    ],
                    partial_fix=obj.get("partial_fix", False),
                )
            )
    return pairs


def _pair_to_dict(pair: InducingPair) -> dict:
    return {
        "inducing_hash": pair.inducing_hash,
        "fix_hash": pair.fix_hash,
        "ticket_id": pair.ticket_id,
        "partial_fix": pair.partial_fix,
        "evidence": [
            {"path": ref.path, "line_no": ref.line_no, "side": ref.side}
            for ref in pair.evidence
        ],
    }
