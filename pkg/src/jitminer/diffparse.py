"""Unified diff parsing and rendering.

Understands git-style diffs (``diff --git`` sections with rename, new/deleted
file and binary markers) as well as plain ``---``/``+++`` unified diffs.
Hunk headers follow the GNU/git convention: counts of 1 are omitted, the
section heading after the closing ``@@`` is preserved byte for byte.

The parser is the pure half of repository diffing: `gitrepo.commit_diff`
feeds it the output of ``git diff`` and then enriches the deltas with
file-size information the text alone cannot carry.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import MalformedDiff

KIND_ADDED = "added"
KIND_MODIFIED = "modified"
KIND_DELETED = "deleted"
KIND_RENAMED = "renamed"

_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@(?: (.*))?$")
_GIT_HEADER_RE = re.compile(r'^diff --git (?:"a/(.*?)"|a/(.*?)) (?:"b/(.*)"|b/(.*))$')
_BINARY_RE = re.compile(r"^Binary files (.*) and (.*) differ$")
_NO_NEWLINE = "\\ No newline at end of file"

# Header metadata lines that carry no structure we track.
_SKIPPABLE_META = (
    "index ",
    "old mode ",
    "new mode ",
    "similarity index ",
    "dissimilarity index ",
    "mode ",
)


@dataclass
class Hunk:
    """One ``@@`` block.

    body holds the ordered raw lines as (tag, text) pairs with tag one of
    ``" "`` (context), ``"-"``, ``"+"`` or ``"\\"`` (no-newline marker).
    Line numbers for added/deleted lines are derived from the starts.
    """

    old_start: int
    old_count: int
    new_start: int
    new_count: int
    body: list[tuple[str, str]] = field(default_factory=list)
    section: str = ""

    @property
    def deleted_lines(self) -> list[tuple[int, str]]:
        out = []
        old_no = self.old_start
        for tag, text in self.body:
            if tag == "-":
                out.append((old_no, text))
                old_no += 1
            elif tag == " ":
                old_no += 1
        return out

    @property
    def added_lines(self) -> list[tuple[int, str]]:
        out = []
        new_no = self.new_start
        for tag, text in self.body:
            if tag == "+":
                out.append((new_no, text))
                new_no += 1
            elif tag == " ":
                new_no += 1
        return out

    def header(self) -> str:
        old = str(self.old_start) if self.old_count == 1 else f"{self.old_start},{self.old_count}"
        new = str(self.new_start) if self.new_count == 1 else f"{self.new_start},{self.new_count}"
        text = f"@@ -{old} +{new} @@"
        return f"{text} {self.section}" if self.section else text


@dataclass
class FileDelta:
    """Structured change of a single file within one commit.

    path is the new-side path; for deleted files it equals old_path (the
    only path the file ever had). new_file_lines is the post-change line
    count of the file: the parser can only derive it for added files, the
    repository layer fills it for the rest.
    """

    path: str
    kind: str
    old_path: str | None = None
    hunks: list[Hunk] = field(default_factory=list)
    binary: bool = False
    new_file_lines: int = 0

    @property
    def lines_added(self) -> int:
        return sum(len(h.added_lines) for h in self.hunks)

    @property
    def lines_deleted(self) -> int:
        return sum(len(h.deleted_lines) for h in self.hunks)

    def iter_added_lines(self):
        for hunk in self.hunks:
            yield from hunk.added_lines

    def iter_deleted_lines(self):
        for hunk in self.hunks:
            yield from hunk.deleted_lines

    @property
    def source_path(self) -> str:
        """Old-side path: where deleted lines live before the change."""
        return self.old_path if self.old_path is not None else self.path


def _unquote(path: str) -> str:
    if len(path) >= 2 and path.startswith('"') and path.endswith('"'):
        return (
            path[1:-1]
            .replace("\\t", "\t")
            .replace("\\n", "\n")
            .replace('\\"', '"')
            .replace("\\\\", "\\")
        )
    return path


def _quote(path: str) -> str:
    if any(c in path for c in (' ', '"', '\\', '\t', '\n')):
        escaped = (
            path.replace("\\", "\\\\")
            .replace('"', '\\"')
            .replace("\t", "\\t")
            .replace("\n", "\\n")
        )
        return f'"{escaped}"'
    return path


def _strip_file_label(label: str) -> str | None:
    """Turn a ---/+++ label into a repo path (None for /dev/null)."""
    label = _unquote(label.split("\t", 1)[0].rstrip())
    if label == "/dev/null":
        return None
    if label.startswith(("a/", "b/")):
        return label[2:]
    return label


class _Cursor:
    def __init__(self, lines: list[str]):
        self.lines = lines
        self.i = 0

    def peek(self) -> str | None:
        return self.lines[self.i] if self.i < len(self.lines) else None

    def take(self) -> str:
        line = self.lines[self.i]
        self.i += 1
        return line

    @property
    def line_no(self) -> int:
        """1-based number of the line peek() would return."""
        return self.i + 1


def parse_unified_diff(text: str) -> list[FileDelta]:
    """Parse unified diff text into FileDelta structures.

    Tolerates no-newline markers, blank separator lines between file
    sections and empty context lines. Binary markers produce a delta with
    empty hunks. Raises MalformedDiff with the 1-based line number of the
    first violation.
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    cur = _Cursor(lines)
    deltas: list[FileDelta] = []
    while (line := cur.peek()) is not None:
        if line == "":
            cur.take()
            continue
        if line.startswith("diff --git"):
            deltas.append(_parse_git_section(cur))
        elif line.startswith("--- "):
            deltas.append(_parse_plain_section(cur))
        else:
            raise MalformedDiff(f"expected a file header, got {line!r}", cur.line_no)
    return deltas


def _parse_git_section(cur: _Cursor) -> FileDelta:
    header_no = cur.line_no
    match = _GIT_HEADER_RE.match(cur.take())
    if not match:
        raise MalformedDiff("unparseable 'diff --git' header", header_no)
    groups = match.groups()
    old_header = groups[0] if groups[0] is not None else groups[1]
    new_header = groups[2] if groups[2] is not None else groups[3]

    kind = KIND_MODIFIED
    old_path: str | None = old_header
    new_path: str | None = new_header
    binary = False

    while (line := cur.peek()) is not None:
        if line.startswith("new file mode"):
            kind = KIND_ADDED
            cur.take()
        elif line.startswith("deleted file mode"):
            kind = KIND_DELETED
            cur.take()
        elif line.startswith("rename from "):
            kind = KIND_RENAMED
            old_path = _unquote(cur.take()[len("rename from "):])
        elif line.startswith("rename to "):
            kind = KIND_RENAMED
            new_path = _unquote(cur.take()[len("rename to "):])
        elif line.startswith(_SKIPPABLE_META):
            cur.take()
        elif _BINARY_RE.match(line):
            binary = True
            cur.take()
            break
        else:
            break

    hunks: list[Hunk] = []
    if not binary and (line := cur.peek()) is not None and line.startswith("--- "):
        old_label = _strip_file_label(cur.take()[4:])
        plus_no = cur.line_no
        plus = cur.peek()
        if plus is None or not plus.startswith("+++ "):
            raise MalformedDiff("expected '+++' after '---'", plus_no)
        new_label = _strip_file_label(cur.take()[4:])
        if old_label is None:
            kind = KIND_ADDED
        elif new_label is None:
            kind = KIND_DELETED
        if old_label is not None:
            old_path = old_label
        if new_label is not None:
            new_path = new_label
        hunks = _parse_hunks(cur)

    return _assemble_delta(kind, old_path, new_path, hunks, binary)


def _parse_plain_section(cur: _Cursor) -> FileDelta:
    old_label = _strip_file_label(cur.take()[4:])
    plus_no = cur.line_no
    plus = cur.peek()
    if plus is None or not plus.startswith("+++ "):
        raise MalformedDiff("expected '+++' after '---'", plus_no)
    new_label = _strip_file_label(cur.take()[4:])
    if old_label is None and new_label is None:
        raise MalformedDiff("both sides are /dev/null", plus_no)
    if old_label is None:
        kind = KIND_ADDED
    elif new_label is None:
        kind = KIND_DELETED
    else:
        kind = KIND_MODIFIED
    hunks = _parse_hunks(cur)
    return _assemble_delta(kind, old_label, new_label, hunks, binary=False)


def _parse_hunks(cur: _Cursor) -> list[Hunk]:
    hunks = []
    while (line := cur.peek()) is not None and line.startswith("@@"):
        hunks.append(_parse_one_hunk(cur))
    return hunks


def _parse_one_hunk(cur: _Cursor) -> Hunk:
    header_no = cur.line_no
    match = _HUNK_RE.match(cur.take())
    if not match:
        raise MalformedDiff("unparseable hunk header", header_no)
    old_start = int(match.group(1))
    old_count = int(match.group(2)) if match.group(2) is not None else 1
    new_start = int(match.group(3))
    new_count = int(match.group(4)) if match.group(4) is not None else 1
    hunk = Hunk(old_start, old_count, new_start, new_count, section=match.group(5) or "")

    old_left, new_left = old_count, new_count
    while old_left > 0 or new_left > 0:
        line_no = cur.line_no
        line = cur.peek()
        if line is None or line.startswith(("diff --git", "@@")):
            raise MalformedDiff(
                f"hunk body shorter than declared ({hunk.header()!r})", line_no
            )
        cur.take()
        if line == _NO_NEWLINE:
            if not hunk.body:
                raise MalformedDiff("no-newline marker before any hunk line", line_no)
            hunk.body.append(("\\", ""))
            continue
        tag, text = (line[0], line[1:]) if line else (" ", "")
        if tag == " ":
            if old_left <= 0 or new_left <= 0:
                raise MalformedDiff("hunk body longer than declared", line_no)
            old_left -= 1
            new_left -= 1
        elif tag == "-":
            if old_left <= 0:
                raise MalformedDiff("hunk body longer than declared", line_no)
            old_left -= 1
        elif tag == "+":
            if new_left <= 0:
                raise MalformedDiff("hunk body longer than declared", line_no)
            new_left -= 1
        else:
            raise MalformedDiff(f"unexpected line in hunk body: {line!r}", line_no)
        hunk.body.append((tag, text))

    if (line := cur.peek()) is not None and line == _NO_NEWLINE:
        cur.take()
        hunk.body.append(("\\", ""))
    return hunk


def _assemble_delta(
    kind: str,
    old_path: str | None,
    new_path: str | None,
    hunks: list[Hunk],
    binary: bool,
) -> FileDelta:
    if kind == KIND_ADDED:
        delta = FileDelta(path=new_path or "", kind=kind, old_path=None)
    elif kind == KIND_DELETED:
        delta = FileDelta(path=old_path or "", kind=kind, old_path=old_path)
    elif kind == KIND_RENAMED:
        delta = FileDelta(path=new_path or "", kind=kind, old_path=old_path)
    else:
        delta = FileDelta(path=new_path or old_path or "", kind=kind, old_path=None)
    delta.hunks = hunks
    delta.binary = binary
    if kind == KIND_ADDED and not binary:
        delta.new_file_lines = delta.lines_added
    return delta


def render_unified_diff(deltas: list[FileDelta]) -> str:
    """Serialize deltas back to git-style unified diff text.

    Inverse of parse_unified_diff up to header metadata we do not track
    (index lines, file modes, similarity percentages).
    """
    out: list[str] = []
    for delta in deltas:
        old = delta.source_path
        new = delta.path if delta.kind != KIND_DELETED else delta.source_path
        out.append(f"diff --git {_quote('a/' + old)} {_quote('b/' + new)}")
        if delta.kind == KIND_ADDED:
            out.append("new file mode 100644")
        elif delta.kind == KIND_DELETED:
            out.append("deleted file mode 100644")
        elif delta.kind == KIND_RENAMED:
            out.append(f"rename from {_quote(old)}")
            out.append(f"rename to {_quote(new)}")
        if delta.binary:
            a_label = "/dev/null" if delta.kind == KIND_ADDED else _quote("a/" + old)
            b_label = "/dev/null" if delta.kind == KIND_DELETED else _quote("b/" + new)
            out.append(f"Binary files {a_label} and {b_label} differ")
            continue
        if not delta.hunks:
            continue
        a_label = "/dev/null" if delta.kind == KIND_ADDED else _quote("a/" + old)
        b_label = "/dev/null" if delta.kind == KIND_DELETED else _quote("b/" + new)
        out.append(f"--- {a_label}")
        out.append(f"+++ {b_label}")
        for hunk in delta.hunks:
            out.append(hunk.header())
            for tag, text in hunk.body:
                out.append(_NO_NEWLINE if tag == "\\" else tag + text)
    return "\n".join(out) + "\n" if out else ""
