"""Immutable views over local git clones: history, snapshots, windows.

This module never mutates a repository. Cloning (network transport) is a
CLI pre-step that shells out to git; everything here reads an
already-present object store.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

from . import gitio
from .errors import BranchNotFound, NotARepository, UnknownCommit


@dataclass(frozen=True)
class AnalysisWindow:
    """Half-open time interval [start, end) whose commits count for a report."""

    start: datetime
    end: datetime
    label: str = ""

    def __post_init__(self):
        if self.start.tzinfo is None or self.end.tzinfo is None:
            raise ValueError("window bounds must be timezone-aware")
        if not self.start < self.end:
            raise ValueError("window start must precede end")

    def contains(self, moment: datetime) -> bool:
        return self.start <= moment < self.end


@dataclass(frozen=True)
class FileChange:
    """One changed path within a commit."""

    kind: str  # "add" | "modify" | "delete" | "rename"
    path: str  # post-image path (pre-image path for deletions)
    old_path: str | None = None  # renames only


@dataclass(frozen=True)
class CommitRecord:
    hash: str
    author_name: str
    author_email: str
    authored_at: datetime
    message: str
    parents: tuple[str, ...]
    changed_files: tuple[FileChange, ...] = field(default_factory=tuple)

    @property
    def is_merge(self) -> bool:
        return len(self.parents) >= 2


@dataclass(frozen=True)
class RepoHandle:
    """Handle to a local clone; safe to share across concurrent readers."""

    root_path: str
    default_branch: str
    head_ref: str


_STATUS_KINDS = {"A": "add", "M": "modify", "D": "delete", "R": "rename"}


def open_repo(path: str, branch: str | None = None) -> RepoHandle:
    """Open a local clone (bare or working tree) and pin its default branch.

    Branch resolution: the requested branch if given, else the branch HEAD
    points at, else "main", else "master".
    """
    if not gitio.is_repository(path):
        raise NotARepository(f"not a git repository: {path}")
    candidates: list[str]
    if branch:
        candidates = [branch]
    else:
        configured = gitio.head_branch(path)
        candidates = [configured] if configured else []
        candidates += ["main", "master"]
    for name in candidates:
        head = gitio.resolve_ref(path, f"refs/heads/{name}")
        if head:
            return RepoHandle(root_path=path, default_branch=name, head_ref=head)
    if branch:
        raise BranchNotFound(branch)
    raise BranchNotFound(" / ".join(c for c in candidates if c))


def read_commit(repo: RepoHandle, sha: str, with_changes: bool = True) -> CommitRecord:
    """Load one commit record; changed files are diffed against the first parent."""
    with gitio.ObjectReader(repo.root_path) as reader:
        return _record_from_raw(repo, reader.commit(sha), with_changes)


def _record_from_raw(repo: RepoHandle, raw: gitio.RawCommit, with_changes: bool) -> CommitRecord:
    changes: tuple[FileChange, ...] = ()
    if with_changes:
        parent = raw.parents[0] if raw.parents else None
        tree_changes = gitio.diff_tree(repo.root_path, parent, raw.hash)
        changes = tuple(
            FileChange(kind=_STATUS_KINDS[c.status], path=c.path, old_path=c.old_path)
            for c in tree_changes
        )
    return CommitRecord(
        hash=raw.hash,
        author_name=raw.author_name,
        author_email=raw.author_email,
        authored_at=raw.authored_at,
        message=raw.message,
        parents=raw.parents,
        changed_files=changes,
    )


def walk_history(repo: RepoHandle, tip: str | None = None) -> list[gitio.RawCommit]:
    """Every commit reachable from tip (default branch head), parents-first."""
    ref = tip or repo.head_ref
    with gitio.ObjectReader(repo.root_path) as reader:
        try:
            reader.get(ref)
        except UnknownCommit:
            raise
        order = gitio.rev_list(repo.root_path, ref)
        return [reader.commit(sha) for sha in order]


def list_commits(repo: RepoHandle, window: AnalysisWindow) -> list[CommitRecord]:
    """Non-merge commits on the default branch authored inside the window.

    Merge commits are traversed for reachability but never returned; they
    carry no authorship credit. Ordered oldest first by (authored_at, hash).
    """
    selected = [
        raw
        for raw in walk_history(repo)
        if not raw.is_merge and window.contains(raw.authored_at)
    ]
    selected.sort(key=lambda r: (r.authored_at, r.hash))
    return [_record_from_raw(repo, raw, with_changes=True) for raw in selected]


def window_head(repo: RepoHandle, window: AnalysisWindow) -> str | None:
    """Commit whose tree is the window-end snapshot.

    Defined as the last commit in parents-first topological order whose
    author date precedes the window end (merges included: a merge can be
    the branch tip). None when no commit predates the window end.
    """
    head = None
    for raw in walk_history(repo):
        if raw.authored_at < window.end:
            head = raw.hash
    return head


def snapshot(repo: RepoHandle, at: str) -> list[tuple[str, bytes]]:
    """Full file tree at a commit as (path, content), bytewise path order."""
    with gitio.ObjectReader(repo.root_path) as reader:
        obj_type, _ = reader.get(at)
        if obj_type != "commit":
            raise UnknownCommit(at)
        entries = gitio.ls_tree(repo.root_path, at)
        return [(path, reader.blob(blob)) for path, blob in entries]
