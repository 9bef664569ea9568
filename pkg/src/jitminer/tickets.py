"""Bug tracker export parsing and fix-commit linking.

Linking is two-stage: ticket-id patterns in the commit message are matched
against the closed-ticket set first; when none hit, a keyword scan of the
message marks the commit as an approximate fix with no ticket attached.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import BinaryIO

from .errors import MalformedExport
from .gitrepo import CommitRecord

logger = logging.getLogger(__name__)

METHOD_TICKET_ID = "ticket_id_match"
METHOD_KEYWORD = "keyword"

DEFAULT_ID_PATTERNS = (
    r"#(\d+)",
    r"ticket:(\d+)",
    r"ticket\s+(\d+)",
)
DEFAULT_FIX_KEYWORDS = ("fix", "fixed", "fixes", "bug")


@dataclass(frozen=True)
class BugTicket:
    ticket_id: str
    created_at: int
    closed_at: int | None = None
    status: str = ""
    ticket_type: str = ""
    summary: str = ""

    @property
    def is_closed(self) -> bool:
        return self.status.lower() == "closed"


@dataclass(frozen=True)
class FixLink:
    commit_hash: str
    ticket_id: str | None
    method: str  # METHOD_TICKET_ID or METHOD_KEYWORD
    matched_text: str


@dataclass
class LinkConfig:
    """Knobs of the fix-linking stage.

    id_patterns need exactly one capture group holding the ticket id.
    keyword_fallback=False restricts linking to ticket-id matches only.
    """

    id_patterns: tuple[str, ...] = DEFAULT_ID_PATTERNS
    fix_keywords: tuple[str, ...] = DEFAULT_FIX_KEYWORDS
    require_defect_type: bool = False
    word_boundary_match: bool = True
    keyword_fallback: bool = True

    def __post_init__(self):
        if not self.id_patterns or not self.fix_keywords:
            raise ValueError("id_patterns and fix_keywords must be nonempty")
        self._id_res = [re.compile(p, re.IGNORECASE) for p in self.id_patterns]
        if self.word_boundary_match:
            self._kw_res = [
                re.compile(rf"\b{re.escape(k)}\b", re.IGNORECASE)
                for k in self.fix_keywords
            ]
        else:
            self._kw_res = [re.compile(re.escape(k), re.IGNORECASE) for k in self.fix_keywords]


def parse_timestamp(raw: str) -> int:
    """Accept epoch seconds or ISO-8601 and return UTC seconds."""
    raw = raw.strip()
    if not raw:
        raise ValueError("empty timestamp")
    try:
        return int(float(raw))
    except ValueError:
        pass
    text = raw.replace("Z", "+00:00")
    moment = datetime.fromisoformat(text)
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return int(moment.timestamp())


def parse_ticket_export(stream: BinaryIO, format: str = "csv") -> list[BugTicket]:
    """Parse a tracker export (CSV with header or JSON array).

    Records without a ticket id, or with an unusable timestamp, are skipped
    with a warning; a broken header or undecodable stream raises
    MalformedExport.
    """
    try:
        text = stream.read().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedExport(f"export is not UTF-8: {exc}") from exc
    if format == "csv":
        rows = _csv_rows(text)
    elif format == "json":
        rows = _json_rows(text)
    else:
        raise MalformedExport(f"unknown export format: {format}")

    tickets = []
    for idx, row in rows:
        ticket_id = str(row.get("id", "") or "").strip()
        if not ticket_id:
            logger.warning("ticket export record %d has no id, skipped", idx)
            continue
        try:
            created_at = parse_timestamp(str(row.get("time", "")))
        except ValueError:
            logger.warning("ticket %s has unparseable creation time, skipped", ticket_id)
            continue
        status = str(row.get("status", "") or "")
        closed_at = None
        if status.lower() == "closed":
            modified_raw = str(row.get("changetime", "") or "")
            if modified_raw:
                try:
                    closed_at = parse_timestamp(modified_raw)
                except ValueError:
                    logger.warning("ticket %s has unparseable changetime", ticket_id)
        if closed_at is not None and created_at > closed_at:
            logger.warning(
                "ticket %s closed before it was created, skipped", ticket_id
            )
            continue
        tickets.append(
            BugTicket(
                ticket_id=ticket_id,
                created_at=created_at,
                closed_at=closed_at,
                status=status,
                ticket_type=str(row.get("type", "") or ""),
                summary=str(row.get("summary", "") or ""),
            )
        )
    return tickets


def _csv_rows(text: str) -> list[tuple[int, dict]]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise MalformedExport("CSV export has no header row")
    header = [h.strip().lower() for h in reader.fieldnames]
    if "id" not in header or "time" not in header:
        raise MalformedExport(
            f"CSV header must contain 'id' and 'time' columns, got {reader.fieldnames}"
        )
    rows = []
    for idx, raw in enumerate(reader, start=1):
        rows.append((idx, {(k or "").strip().lower(): v for k, v in raw.items()}))
    return rows


def _json_rows(text: str) -> list[tuple[int, dict]]:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedExport(f"JSON export unparseable: {exc}") from exc
    if not isinstance(payload, list):
        raise MalformedExport("JSON export must be an array of objects")
    rows = []
    for idx, obj in enumerate(payload, start=1):
        if not isinstance(obj, dict):
            logger.warning("json export record %d is not an object, skipped", idx)
            continue
        rows.append((idx, {str(k).lower(): v for k, v in obj.items()}))
    return rows


def message_ticket_ids(message: str, config: LinkConfig) -> list[tuple[str, str]]:
    """All (ticket_id, matched_text) pairs in order of appearance,
    deduplicated by id."""
    found: list[tuple[str, str]] = []
    seen: set[str] = set()
    hits = []
    for pattern in config._id_res:
        for match in pattern.finditer(message):
            hits.append((match.start(), match.group(1), match.group(0)))
    hits.sort()
    for _, ticket_id, text in hits:
        if ticket_id not in seen:
            seen.add(ticket_id)
            found.append((ticket_id, text))
    return found


def _keyword_hit(message: str, config: LinkConfig) -> str | None:
    best: tuple[int, str] | None = None
    for regex, keyword in zip(config._kw_res, config.fix_keywords):
        match = regex.search(message)
        if match and (best is None or match.start() < best[0]):
            best = (match.start(), match.group(0))
    return best[1] if best else None


def is_fix_message(message: str, config: LinkConfig | None = None) -> bool:
    """True when the message carries a ticket-id pattern or a fix keyword."""
    config = config or LinkConfig()
    if message_ticket_ids(message, config):
        return True
    return _keyword_hit(message, config) is not None


def link_fixes(
    commits: list[CommitRecord],
    tickets: list[BugTicket],
    config: LinkConfig | None = None,
) -> list[FixLink]:
    """Link commits to the tickets they fix.

    Ticket-id matches are attempted first, against closed tickets only
    (and only defect-typed ones when require_defect_type is set); a commit
    may link to several tickets. When no id match lands, a fix keyword in
    the message yields one approximate link with no ticket. Output order
    follows the commit list, then id appearance order; the function is pure.
    """
    config = config or LinkConfig()
    by_id = {t.ticket_id: t for t in tickets}
    links: list[FixLink] = []
    for commit in commits:
        matched = False
        for ticket_id, text in message_ticket_ids(commit.message, config):
            ticket = by_id.get(ticket_id)
            if ticket is None or not ticket.is_closed:
                continue
            if config.require_defect_type and ticket.ticket_type.lower() != "defect":
                continue
            links.append(
                FixLink(
                    commit_hash=commit.hash,
                    ticket_id=ticket_id,
                    method=METHOD_TICKET_ID,
                    matched_text=text,
                )
            )
            matched = True
        if matched or not config.keyword_fallback:
            continue
        keyword = _keyword_hit(commit.message, config)
        if keyword is not None:
            links.append(
                FixLink(
                    commit_hash=commit.hash,
                    ticket_id=None,
                    method=METHOD_KEYWORD,
                    matched_text=keyword,
                )
            )
    return links
