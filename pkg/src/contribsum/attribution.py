"""Line-level authorship of window-end snapshots and per-student evidence.

The engine replays history forward: every commit's per-file line ownership
is derived from its parent's ownership plus the commit's diff, so the
window-end snapshot ends up with one owning commit per line. Semantics:

* last-writer-wins over the default branch's window-end snapshot;
* merge commits are transparent: their lines keep the original authors
  from whichever parent contributed them (conflict-resolution lines that
  match no parent are owned by the merge itself);
* rename-following at the 50% content-similarity threshold;
* whitespace-only line changes (trailing whitespace) never transfer
  ownership, so reformatting earns no credit;
* ownership depends on commit history alone, never on file contents
  claiming authorship, which defuses comment injection.
"""

from __future__ import annotations

import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from difflib import SequenceMatcher
from fnmatch import fnmatch

from . import gitio, metrics
from .errors import BranchNotFound, UnknownCommit
from .identity import UNMAPPED, Roster, StudentId, parse_coauthors, resolve
from .ingest import AnalysisWindow, RepoHandle, walk_history, window_head

# Paths that routinely contain generated or vendored content; crediting
# them inflates minor work, so they are excluded from blame by default.
DEFAULT_EXCLUDE_GLOBS: tuple[str, ...] = (
    "package-lock.json",
    "yarn.lock",
    "poetry.lock",
    "Pipfile.lock",
    "Cargo.lock",
    "node_modules/*",
    "vendor/*",
    "dist/*",
    "build/*",
    "*.min.js",
    "*.min.css",
    ".ipynb_checkpoints/*",
)

MAX_BLAME_FILE_BYTES = 1_000_000  # larger files are treated as generated


@dataclass(frozen=True)
class LineAttribution:
    path: str
    line_no: int  # 1-based within the snapshot file
    content: str
    student: StudentId | None  # None = unmapped signature
    commit: str
    authored_at: datetime


@dataclass(frozen=True)
class AttributionOptions:
    split_coauthors: bool = True
    exclude_globs: tuple[str, ...] = DEFAULT_EXCLUDE_GLOBS
    include_branches: tuple[str, ...] = ()
    max_file_bytes: int = MAX_BLAME_FILE_BYTES


@dataclass
class ContributionEvidence:
    student: StudentId
    path: str
    lines_owned: int = 0
    lines_added_in_window: int = 0
    commit_messages: list[str] = field(default_factory=list)
    solo_functions: list[tuple[str, int]] = field(default_factory=list)
    comment_only: bool = False


@dataclass
class ContributionSet:
    window: AnalysisWindow
    per_student: dict[str, list[ContributionEvidence]]
    zero_commit_students: list[StudentId]
    students: dict[str, StudentId]

    def evidence_for(self, student_id: str) -> list[ContributionEvidence]:
        return self.per_student.get(student_id, [])

    def to_json(self) -> str:
        """Canonical serialization: stable key order, byte-deterministic."""
        payload = {
            "window": {
                "start": self.window.start.astimezone(timezone.utc).isoformat(),
                "end": self.window.end.astimezone(timezone.utc).isoformat(),
                "label": self.window.label,
            },
            "zero_commit_students": sorted(s.id for s in self.zero_commit_students),
            "per_student": {
                sid: [
                    {
                        "path": ev.path,
                        "lines_owned": ev.lines_owned,
                        "lines_added_in_window": ev.lines_added_in_window,
                        "commit_messages": ev.commit_messages,
                        "solo_functions": [[n, s] for n, s in ev.solo_functions],
                        "comment_only": ev.comment_only,
                    }
                    for ev in sorted(rows, key=lambda e: e.path)
                ]
                for sid, rows in sorted(self.per_student.items())
            },
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


class _OwnedLine:
    __slots__ = ("content", "commit")

    def __init__(self, content: str, commit: str):
        self.content = content
        self.commit = commit


def _split_lines(blob: bytes) -> list[str]:
    return blob.decode("utf-8", "replace").splitlines()


def _apply_line_diff(old: list[_OwnedLine], new_lines: list[str], commit: str) -> list[_OwnedLine]:
    """Carry ownership across an edit; comparison ignores trailing whitespace."""
    matcher = SequenceMatcher(
        a=[l.content.rstrip() for l in old],
        b=[l.rstrip() for l in new_lines],
        autojunk=False,
    )
    out: list[_OwnedLine] = []
    for tag, i1, i2, j1, j2 in matcher.get_opcodes():
        if tag == "equal":
            for k in range(j2 - j1):
                out.append(_OwnedLine(new_lines[j1 + k], old[i1 + k].commit))
        elif tag in ("replace", "insert"):
            for j in range(j1, j2):
                out.append(_OwnedLine(new_lines[j], commit))
    return out


def _count_line_churn(old: list[str], new: list[str]) -> tuple[int, int]:
    matcher = SequenceMatcher(
        a=[l.rstrip() for l in old],
        b=[l.rstrip() for l in new],
        autojunk=False,
    )
    added = deleted = 0
    for tag, i1, i2, j1, j2 in matcher.get_opcodes():
        if tag in ("replace", "insert"):
            added += j2 - j1
        if tag in ("replace", "delete"):
            deleted += i2 - i1
    return added, deleted


_State = dict[str, list[_OwnedLine]]


def _apply_changes(
    state: _State, changes: list[gitio.TreeChange], commit: str, reader: gitio.ObjectReader
) -> None:
    for change in changes:
        if change.status == "D":
            state.pop(change.path, None)
            continue
        new_lines = _split_lines(reader.blob(change.new_blob))
        if change.status == "A":
            state[change.path] = [_OwnedLine(l, commit) for l in new_lines]
        elif change.status == "R":
            old = state.pop(change.old_path or "", [])
            state[change.path] = _apply_line_diff(old, new_lines, commit)
        else:  # M
            old = state.get(change.path, [])
            state[change.path] = _apply_line_diff(old, new_lines, commit)


def _merge_state(
    parent_states: list[_State],
    raw: gitio.RawCommit,
    reader: gitio.ObjectReader,
    root: str,
) -> _State:
    """Ownership after a merge: lines adopt whichever parent wrote them.

    The merge tree is diffed against the first parent; changed files are
    matched against the remaining parents, first wholesale, then line by
    line. Only lines matching no parent at all (conflict resolutions)
    become owned by the merge commit itself.
    """
    state: _State = dict(parent_states[0])
    others = parent_states[1:]
    for change in gitio.diff_tree(root, raw.parents[0], raw.hash):
        if change.status == "D":
            state.pop(change.path, None)
            continue
        new_lines = _split_lines(reader.blob(change.new_blob))
        stripped = [l.rstrip() for l in new_lines]
        if change.status == "R":
            base = state.pop(change.old_path or "", [])
        else:
            base = state.get(change.path, [])
        adopted: list[_OwnedLine] | None = None
        for other in others:
            candidate = other.get(change.path)
            if candidate is not None and [c.content.rstrip() for c in candidate] == stripped:
                adopted = [_OwnedLine(nl, c.commit) for nl, c in zip(new_lines, candidate)]
                break
        if adopted is None:
            pool: dict[str, deque[_OwnedLine]] = defaultdict(deque)
            for other in others:
                for line in other.get(change.path, []):
                    pool[line.content.rstrip()].append(line)
            matcher = SequenceMatcher(
                a=[l.content.rstrip() for l in base], b=stripped, autojunk=False
            )
            out: list[_OwnedLine] = []
            for tag, i1, i2, j1, j2 in matcher.get_opcodes():
                if tag == "equal":
                    for k in range(j2 - j1):
                        out.append(_OwnedLine(new_lines[j1 + k], base[i1 + k].commit))
                elif tag in ("replace", "insert"):
                    for j in range(j1, j2):
                        queue = pool.get(stripped[j])
                        if queue:
                            out.append(_OwnedLine(new_lines[j], queue.popleft().commit))
                        else:
                            out.append(_OwnedLine(new_lines[j], raw.hash))
            adopted = out
        state[change.path] = adopted
    return state


def _ownership_at(
    repo: RepoHandle, at: str
) -> tuple[_State, dict[str, gitio.RawCommit]]:
    """Replay history up to `at`; returns final state plus commit metadata."""
    with gitio.ObjectReader(repo.root_path) as reader:
        obj_type, _ = reader.get(at)
        if obj_type != "commit":
            raise UnknownCommit(at)
        order = gitio.rev_list(repo.root_path, at)
        raws = {sha: reader.commit(sha) for sha in order}
        states: dict[str, _State] = {}
        for sha in order:
            raw = raws[sha]
            if not raw.parents:
                state: _State = {}
                _apply_changes(state, gitio.diff_tree(repo.root_path, None, sha), sha, reader)
            elif len(raw.parents) == 1:
                state = dict(states[raw.parents[0]])
                _apply_changes(
                    state, gitio.diff_tree(repo.root_path, raw.parents[0], sha), sha, reader
                )
            else:
                state = _merge_state([states[p] for p in raw.parents], raw, reader, repo.root_path)
            states[sha] = state
        return states[at], raws


def is_excluded(path: str, globs: tuple[str, ...]) -> bool:
    """Glob match against the full path and the basename."""
    name = path.rsplit("/", 1)[-1]
    return any(fnmatch(path, g) or fnmatch(name, g) for g in globs)


def _is_binary(lines: list[_OwnedLine]) -> bool:
    budget = 8192
    for line in lines:
        if "\x00" in line.content[:budget]:
            return True
        budget -= len(line.content) + 1
        if budget <= 0:
            return False
    return False


def _emit_attributions(
    state: _State,
    raws: dict[str, gitio.RawCommit],
    roster: Roster,
    excludes: tuple[str, ...],
    max_file_bytes: int,
) -> list[LineAttribution]:
    resolved: dict[str, StudentId | None] = {}

    def student_of(sha: str) -> StudentId | None:
        if sha not in resolved:
            raw = raws[sha]
            resolved[sha] = resolve(roster, raw.author_name, raw.author_email)
        return resolved[sha]

    out: list[LineAttribution] = []
    for path in sorted(state, key=lambda p: p.encode("utf-8", "replace")):
        lines = state[path]
        if is_excluded(path, excludes) or _is_binary(lines):
            continue
        if sum(len(l.content) + 1 for l in lines) > max_file_bytes:
            continue
        for no, line in enumerate(lines, start=1):
            out.append(
                LineAttribution(
                    path=path,
                    line_no=no,
                    content=line.content,
                    student=student_of(line.commit),
                    commit=line.commit,
                    authored_at=raws[line.commit].authored_at,
                )
            )
    return out


def blame_snapshot(
    repo: RepoHandle,
    at: str,
    roster: Roster,
    excludes: tuple[str, ...] = DEFAULT_EXCLUDE_GLOBS,
    max_file_bytes: int = MAX_BLAME_FILE_BYTES,
) -> list[LineAttribution]:
    """One attribution per line of every non-excluded text file at `at`.

    Lines are credited to the primary author of the owning commit;
    co-author splitting is applied later, during evidence aggregation.
    """
    state, raws = _ownership_at(repo, at)
    return _emit_attributions(state, raws, roster, tuple(excludes), max_file_bytes)


def _credit_list(
    raw: gitio.RawCommit, roster: Roster, split: bool
) -> list[StudentId]:
    primary = resolve(roster, raw.author_name, raw.author_email) or UNMAPPED
    if not split:
        return [primary]
    credits = [primary]
    for tag in parse_coauthors(raw.message, raw.hash):
        student = resolve(roster, tag.name, tag.email)
        if student is not None and student not in credits:
            credits.append(student)
    return credits


_COMMENT_PREFIXES = {
    "script": ("#",),
    "markup": ("<!--",),
    "other": ("#", "//", "/*", "*", "<!--"),
    "notebook": (),
}


def _is_comment_line(kind: str, content: str) -> bool:
    stripped = content.strip()
    if not stripped:
        return True  # blank lines carry no implementation weight
    return stripped.startswith(_COMMENT_PREFIXES.get(kind, ()))


def build_contribution_set(
    repo: RepoHandle,
    window: AnalysisWindow,
    roster: Roster,
    options: AttributionOptions = AttributionOptions(),
) -> ContributionSet:
    """Aggregate per-(student, file) evidence over the window-end snapshot.

    Line credit: each surviving line belongs to the owning commit's credit
    list (primary author plus resolved co-authors when splitting is on).
    Multi-credit commits distribute their lines round-robin, walking the
    snapshot in (path, line number) order, so credit splits equally and
    the per-file partition invariant stays exact.
    """
    students: dict[str, StudentId] = {s.id: s for s in roster.students}
    per_student: dict[str, list[ContributionEvidence]] = {sid: [] for sid in students}
    head = window_head(repo, window)

    history = walk_history(repo, head) if head else []
    window_commits = [
        raw for raw in history if not raw.is_merge and window.contains(raw.authored_at)
    ]
    window_commits.sort(key=lambda r: (r.authored_at, r.hash))

    # zero-commit bookkeeping is independent of the splitting flag
    active_ids: set[str] = set()
    for raw in window_commits:
        for student in _credit_list(raw, roster, split=True):
            active_ids.add(student.id)
    zero_commit = sorted(
        (s for s in roster.students if s.id not in active_ids), key=lambda s: s.id
    )

    evidence: dict[tuple[str, str], ContributionEvidence] = {}

    def evidence_row(student: StudentId, path: str) -> ContributionEvidence:
        key = (student.id, path)
        if key not in evidence:
            evidence[key] = ContributionEvidence(student=student, path=path)
        return evidence[key]

    if head is not None:
        state, raws = _ownership_at(repo, head)
        attributions = _emit_attributions(
            state, raws, roster, tuple(options.exclude_globs), options.max_file_bytes
        )

        credit_cache: dict[str, list[StudentId]] = {}
        credit_counter: dict[str, int] = defaultdict(int)
        credited: list[tuple[LineAttribution, StudentId]] = []
        noncomment_lines: dict[tuple[str, str], int] = defaultdict(int)
        kind_cache: dict[str, str] = {}
        for attr in attributions:  # already in (path, line_no) order
            raw = raws[attr.commit]
            if attr.commit not in credit_cache:
                credit_cache[attr.commit] = _credit_list(raw, roster, options.split_coauthors)
            credits = credit_cache[attr.commit]
            idx = credit_counter[attr.commit]
            credit_counter[attr.commit] += 1
            student = credits[idx % len(credits)]
            credited.append((attr, student))

            row = evidence_row(student, attr.path)
            row.lines_owned += 1
            if window.contains(attr.authored_at) and not raw.is_merge:
                row.lines_added_in_window += 1
            if attr.path not in kind_cache:
                kind_cache[attr.path] = metrics.classify_file(attr.path, attr.content.encode())
            if not _is_comment_line(kind_cache[attr.path], attr.content):
                noncomment_lines[(student.id, attr.path)] += 1

        for row in evidence.values():
            row.comment_only = (
                row.lines_owned > 0 and noncomment_lines[(row.student.id, row.path)] == 0
            )

        _attach_solo_functions(credited, evidence_row)

    for raw in window_commits:
        credits = _credit_list(raw, roster, options.split_coauthors)
        touched = {
            p
            for change in gitio.diff_tree(
                repo.root_path, raw.parents[0] if raw.parents else None, raw.hash
            )
            for p in (change.path, change.old_path)
            if p is not None
        }
        for path in sorted(touched):
            if is_excluded(path, tuple(options.exclude_globs)):
                continue
            for student in credits:
                evidence_row(student, path).commit_messages.append(raw.message)

    per_student.setdefault(UNMAPPED.id, [])
    for (sid, _path), row in sorted(evidence.items()):
        per_student.setdefault(sid, []).append(row)
    if not per_student[UNMAPPED.id]:
        del per_student[UNMAPPED.id]
    for rows in per_student.values():
        rows.sort(key=lambda e: e.path)

    return ContributionSet(
        window=window,
        per_student=per_student,
        zero_commit_students=zero_commit,
        students=students,
    )


def _attach_solo_functions(credited, evidence_row) -> None:
    """Mark functions whose every line (innermost span) one student wrote."""
    by_path: dict[str, list[tuple[LineAttribution, StudentId]]] = defaultdict(list)
    for attr, student in credited:
        by_path[attr.path].append((attr, student))
    for path, rows in by_path.items():
        if metrics.classify_file(path, b"") != "script":
            continue
        source = "\n".join(attr.content for attr, _ in rows)
        report = metrics.cyclomatic(source)
        spans = [(f.name, f.start, f.end, f.score) for f in report.functions]
        owner_by_line = {attr.line_no: student for attr, student in rows}
        for name, start, end, score in spans:
            lines = set(range(start, end + 1))
            for _, other_start, other_end, _ in spans:
                if start < other_start and other_end <= end:
                    lines -= set(range(other_start, other_end + 1))
            owners = {owner_by_line[n].id for n in lines if n in owner_by_line}
            if len(owners) == 1:
                evidence_row(owner_by_line[min(lines)], path).solo_functions.append(
                    (name, score)
                )


def churn_stats(
    repo: RepoHandle, window: AnalysisWindow, roster: Roster
) -> dict[StudentId | None, tuple[int, int]]:
    """(lines added, lines deleted) per author over non-merge window commits.

    Counts work erased before the window end, which snapshot blame cannot
    see. Rename-only and trailing-whitespace-only changes count nothing.
    """
    totals: dict[StudentId | None, tuple[int, int]] = {s: (0, 0) for s in roster.students}
    with gitio.ObjectReader(repo.root_path) as reader:
        for raw in walk_history(repo):
            if raw.is_merge or not window.contains(raw.authored_at):
                continue
            student = resolve(roster, raw.author_name, raw.author_email)
            added = deleted = 0
            parent = raw.parents[0] if raw.parents else None
            for change in gitio.diff_tree(repo.root_path, parent, raw.hash):
                if change.status == "A":
                    added += len(_split_lines(reader.blob(change.new_blob)))
                elif change.status == "D":
                    deleted += len(_split_lines(reader.blob(change.old_blob)))
                else:
                    a, d = _count_line_churn(
                        _split_lines(reader.blob(change.old_blob)),
                        _split_lines(reader.blob(change.new_blob)),
                    )
                    added += a
                    deleted += d
            prev = totals.get(student, (0, 0))
            totals[student] = (prev[0] + added, prev[1] + deleted)
    return totals


def branch_extra_attributions(
    repo: RepoHandle,
    branch: str,
    window: AnalysisWindow,
    roster: Roster,
    options: AttributionOptions = AttributionOptions(),
) -> list[LineAttribution]:
    """Lines on an unmerged branch that the default branch never saw.

    Blames the branch's window-end snapshot, then keeps only lines whose
    owning commit is unreachable from the default branch head. Feeds the
    clearly-labeled supplementary report section behind --include-branch.
    """
    tip = gitio.resolve_ref(repo.root_path, f"refs/heads/{branch}")
    if not tip:
        raise BranchNotFound(branch)
    bhead = None
    for raw in walk_history(repo, tip):
        if raw.authored_at < window.end:
            bhead = raw.hash
    if bhead is None:
        return []
    mainline = set(gitio.rev_list(repo.root_path, repo.head_ref))
    return [
        attr
        for attr in blame_snapshot(
            repo, bhead, roster, tuple(options.exclude_globs), options.max_file_bytes
        )
        if attr.commit not in mainline
    ]
