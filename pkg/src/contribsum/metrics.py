"""Per-file quantitative measures: size, lines, complexity, tag counts.

Complexity is computed at tokenizer level (line scanning with string and
comment stripping), not from a full AST, so mid-sprint broken code still
gets a score. The score of a function is 1 plus its decision points:
branch keywords (if/elif, match-case arms), loop keywords (for/while),
exception handlers, boolean connectives (and/or), conditional
expressions, and comprehension filter clauses. A file's score is the sum
of its function scores, plus 1 when any top-level statement exists
outside all functions, with a floor of 1.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import MalformedNotebook

SCRIPT_EXTENSIONS = (".py",)
NOTEBOOK_EXTENSIONS = (".ipynb",)
MARKUP_EXTENSIONS = (".html", ".htm")

CELL_BOUNDARY = "# ---- cell boundary ----"


@dataclass(frozen=True)
class FunctionComplexity:
    name: str
    start: int  # 1-based line of the def
    end: int  # last code line of the body
    score: int


@dataclass(frozen=True)
class ComplexityReport:
    functions: tuple[FunctionComplexity, ...]
    file_score: int
    unparseable: bool = False


@dataclass(frozen=True)
class FileMetrics:
    path: str
    byte_size: int
    line_count: int
    kind: str  # "script" | "notebook" | "markup" | "other"
    complexity: ComplexityReport | None = None
    tag_count: int | None = None


def classify_file(path: str, content: bytes) -> str:
    """Extension-based kind; a NUL byte in the first 8 KiB forces "other"."""
    if b"\0" in content[:8192]:
        return "other"
    lower = path.lower()
    if lower.endswith(SCRIPT_EXTENSIONS):
        return "script"
    if lower.endswith(NOTEBOOK_EXTENSIONS):
        return "notebook"
    if lower.endswith(MARKUP_EXTENSIONS):
        return "markup"
    return "other"


@dataclass
class _ScanLine:
    no: int
    indent: int
    code: str  # raw line with strings and comments blanked out
    opens_string: bool  # a string literal starts on this line
    continuation_only: bool  # entirely inside a triple-quoted string


def _scan(source: str) -> list[_ScanLine]:
    """Strip string literals and comments, tracking triple quotes across lines."""
    out: list[_ScanLine] = []
    triple: str | None = None
    for no, raw in enumerate(source.splitlines(), start=1):
        started_inside = triple is not None
        opens_string = False
        buf: list[str] = []
        i, n = 0, len(raw)
        while i < n:
            if triple:
                j = raw.find(triple, i)
                if j < 0:
                    i = n
                else:
                    i = j + 3
                    triple = None
                continue
            ch = raw[i]
            if ch == "#":
                break
            if raw.startswith('"""', i) or raw.startswith("'''", i):
                triple = raw[i] * 3
                opens_string = True
                i += 3
                continue
            if ch in "\"'":
                opens_string = True
                j = i + 1
                while j < n:
                    if raw[j] == "\\":
                        j += 2
                        continue
                    if raw[j] == ch:
                        break
                    j += 1
                i = j + 1 if j < n else n
                buf.append(" ")
                continue
            buf.append(ch)
            i += 1
        code = "".join(buf)
        expanded = raw.expandtabs()
        indent = len(expanded) - len(expanded.lstrip())
        continuation_only = started_inside and not code.strip() and not opens_string
        out.append(_ScanLine(no, indent, code, opens_string, continuation_only))
    return out


_DEF_RE = re.compile(r"^(?:async\s+)?def\s+(\w+)")
_DECISION_RE = re.compile(r"\b(?:if|elif|for|while|and|or|except)\b")
_CASE_RE = re.compile(r"^case\b.*:\s*$")


def _find_spans(lines: list[_ScanLine]) -> list[tuple[str, int, int]]:
    spans: list[tuple[str, int, int]] = []
    for idx, line in enumerate(lines):
        match = _DEF_RE.match(line.code.strip())
        if not match:
            continue
        end = line.no
        for later in lines[idx + 1:]:
            if later.continuation_only:
                continue
            if not later.code.strip() and not later.opens_string:
                continue  # blank or comment-only line
            if later.indent <= line.indent:
                break
            end = later.no
        spans.append((match.group(1), line.no, end))
    return spans


def _decision_points(line: _ScanLine) -> int:
    count = len(_DECISION_RE.findall(line.code))
    if _CASE_RE.match(line.code.strip()):
        count += 1
    return count


def function_spans(source: str) -> list[tuple[str, int, int]]:
    """(name, start line, end line) for every function, nested ones included."""
    return _find_spans(_scan(source))


def cyclomatic(source: str) -> ComplexityReport:
    """Score a script. Never raises: unsegmentable input scores 1, flagged."""
    lines = _scan(source)
    spans = _find_spans(lines)

    def innermost(line_no: int) -> int | None:
        best: int | None = None
        for i, (_, start, end) in enumerate(spans):
            if start <= line_no <= end:
                if best is None or start > spans[best][1]:
                    best = i
        return best

    scores = [1] * len(spans)
    has_top_level_statement = False
    for line in lines:
        if line.continuation_only:
            continue
        owner = innermost(line.no)
        if owner is not None:
            scores[owner] += _decision_points(line)
        elif line.code.strip() and not line.code.strip().startswith("@"):
            has_top_level_statement = True

    functions = tuple(
        FunctionComplexity(name, start, end, score)
        for (name, start, end), score in zip(spans, scores)
    )
    file_score = sum(scores) + (1 if has_top_level_statement else 0)
    has_content = any(raw.strip() for raw in source.splitlines())
    unparseable = has_content and not spans and not has_top_level_statement
    return ComplexityReport(
        functions=functions,
        file_score=max(1, file_score),
        unparseable=unparseable,
    )


def notebook_source(document: str) -> str:
    """Concatenate a notebook's code cells with comment boundary markers.

    A single-cell notebook yields its cell source verbatim, so wrapping a
    script in one cell scores identically to the raw script.
    """
    try:
        data = json.loads(document)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedNotebook(f"not valid notebook JSON: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("cells"), list):
        raise MalformedNotebook("missing top-level 'cells' list")
    pieces: list[str] = []
    for cell in data["cells"]:
        if not isinstance(cell, dict) or cell.get("cell_type") != "code":
            continue
        source = cell.get("source", "")
        text = "".join(source) if isinstance(source, list) else str(source)
        pieces.append(text)
    if not pieces:
        return ""
    joined = pieces[0]
    for piece in pieces[1:]:
        if joined and not joined.endswith("\n"):
            joined += "\n"
        joined += CELL_BOUNDARY + "\n" + piece
    return joined


def notebook_complexity(document: str) -> ComplexityReport:
    """Score a notebook's code cells; markdown and outputs are ignored."""
    return cyclomatic(notebook_source(document))


_HTML_COMMENT_RE = re.compile(r"<!--.*?(-->|\Z)", re.DOTALL)
_OPEN_TAG_RE = re.compile(r"<\s*[a-zA-Z]")


def tag_count(markup: str) -> int:
    """Opening tags (self-closing included); comments and closers excluded."""
    stripped = _HTML_COMMENT_RE.sub("", markup)
    return len(_OPEN_TAG_RE.findall(stripped))


def compute_file_metrics(path: str, content: bytes) -> FileMetrics:
    """Classify one snapshot file and attach the measures its kind calls for."""
    kind = classify_file(path, content)
    byte_size = len(content)
    if kind == "other" and b"\0" in content[:8192]:
        line_count = 0
    else:
        line_count = len(content.decode("utf-8", "replace").splitlines())
    complexity: ComplexityReport | None = None
    tag: int | None = None
    if kind == "script":
        complexity = cyclomatic(content.decode("utf-8", "replace"))
    elif kind == "notebook":
        try:
            complexity = notebook_complexity(content.decode("utf-8", "replace"))
        except MalformedNotebook:
            complexity = ComplexityReport(functions=(), file_score=1, unparseable=True)
    elif kind == "markup":
        tag = tag_count(content.decode("utf-8", "replace"))
    return FileMetrics(
        path=path,
        byte_size=byte_size,
        line_count=line_count,
        kind=kind,
        complexity=complexity,
        tag_count=tag,
    )
