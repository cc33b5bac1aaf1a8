"""Read-only plumbing around the git executable.

Everything in here shells out to `git` against a local object store; no
porcelain commands, no working-tree access, no network. Higher modules
(ingest, attribution) build on these primitives.
"""

from __future__ import annotations

import subprocess
from dataclasses import dataclass
from datetime import datetime, timezone

from .errors import NotARepository, UnknownCommit

_GIT_TIMEOUT = 120  # seconds; local plumbing should never take this long


def run_git(root: str, *args: str) -> str:
    """Run a git command against `root` and return stdout as text."""
    result = subprocess.run(
        ["git", "-C", root, *args],
        capture_output=True,
        timeout=_GIT_TIMEOUT,
    )
    if result.returncode != 0:
        raise RuntimeError(
            f"git {args[0]} failed in {root}: {result.stderr.decode('utf-8', 'replace').strip()}"
        )
    return result.stdout.decode("utf-8", "replace")


def run_git_bytes(root: str, *args: str) -> bytes:
    result = subprocess.run(
        ["git", "-C", root, *args],
        capture_output=True,
        timeout=_GIT_TIMEOUT,
    )
    if result.returncode != 0:
        raise RuntimeError(
            f"git {args[0]} failed in {root}: {result.stderr.decode('utf-8', 'replace').strip()}"
        )
    return result.stdout


def is_repository(path: str) -> bool:
    result = subprocess.run(
        ["git", "-C", path, "rev-parse", "--git-dir"],
        capture_output=True,
        timeout=_GIT_TIMEOUT,
    )
    return result.returncode == 0


@dataclass(frozen=True)
class RawCommit:
    """Parsed commit object: identity, parents, author signature, message."""

    hash: str
    parents: tuple[str, ...]
    author_name: str
    author_email: str
    authored_at: datetime
    message: str

    @property
    def is_merge(self) -> bool:
        return len(self.parents) >= 2


@dataclass(frozen=True)
class TreeChange:
    """One file-level change between two trees (git diff-tree raw entry)."""

    status: str  # one of "A", "M", "D", "R"
    path: str  # post-image path (pre-image path for deletions)
    old_path: str | None  # set for renames only
    old_blob: str
    new_blob: str


class ObjectReader:
    """Persistent `git cat-file --batch` process for cheap object reads.

    One subprocess serves every blob and commit fetch for a repository,
    which keeps snapshot and blame replay fast. Not thread-safe; use one
    reader per thread.
    """

    def __init__(self, root: str):
        if not is_repository(root):
            raise NotARepository(f"not a git repository: {root}")
        self.root = root
        self._proc = subprocess.Popen(
            ["git", "-C", root, "cat-file", "--batch"],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )

    def get(self, ref: str) -> tuple[str, bytes]:
        """Fetch one object; returns (type, payload) or raises UnknownCommit."""
        assert self._proc.stdin is not None and self._proc.stdout is not None
        self._proc.stdin.write(ref.encode() + b"\n")
        self._proc.stdin.flush()
        header = self._proc.stdout.readline().decode().strip()
        if header.endswith("missing") or not header:
            raise UnknownCommit(ref)
        sha, obj_type, size = header.split()
        payload = self._proc.stdout.read(int(size))
        self._proc.stdout.read(1)  # trailing newline
        return obj_type, payload

    def commit(self, sha: str) -> RawCommit:
        obj_type, payload = self.get(sha)
        if obj_type != "commit":
            raise UnknownCommit(sha)
        return parse_commit(sha, payload)

    def blob(self, sha: str) -> bytes:
        obj_type, payload = self.get(sha)
        if obj_type != "blob":
            raise UnknownCommit(sha)
        return payload

    def close(self) -> None:
        if self._proc.stdin:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)

    def __enter__(self) -> "ObjectReader":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def parse_commit(sha: str, payload: bytes) -> RawCommit:
    """Parse a raw commit object into its header fields and message."""
    text = payload.decode("utf-8", "replace")
    header, _, message = text.partition("\n\n")
    parents: list[str] = []
    author_line = ""
    for line in header.splitlines():
        if line.startswith(" "):  # continuation of a multi-line header (gpgsig)
            continue
        if line.startswith("parent "):
            parents.append(line[len("parent "):].strip())
        elif line.startswith("author "):
            author_line = line[len("author "):]
    name, email, authored_at = parse_person(author_line)
    return RawCommit(
        hash=sha,
        parents=tuple(parents),
        author_name=name,
        author_email=email,
        authored_at=authored_at,
        message=message,
    )


def parse_person(line: str) -> tuple[str, str, datetime]:
    """Split `Name <email> unixtime tz` into its parts; timestamp as UTC."""
    lt = line.rfind("<")
    gt = line.rfind(">")
    name = line[:lt].strip() if lt >= 0 else ""
    email = line[lt + 1:gt].strip() if 0 <= lt < gt else ""
    rest = line[gt + 1:].split() if gt >= 0 else []
    ts = int(rest[0]) if rest else 0
    return name, email, datetime.fromtimestamp(ts, tz=timezone.utc)


def rev_list(root: str, ref: str) -> list[str]:
    """All commits reachable from ref, topologically ordered parents-first."""
    out = run_git(root, "rev-list", "--topo-order", "--reverse", ref)
    return out.split()


def resolve_ref(root: str, ref: str) -> str | None:
    result = subprocess.run(
        ["git", "-C", root, "rev-parse", "--verify", "--quiet", ref],
        capture_output=True,
        timeout=_GIT_TIMEOUT,
    )
    if result.returncode != 0:
        return None
    return result.stdout.decode().strip()


def head_branch(root: str) -> str | None:
    """Branch name HEAD points at, or None for a detached/unreadable HEAD."""
    result = subprocess.run(
        ["git", "-C", root, "symbolic-ref", "--quiet", "--short", "HEAD"],
        capture_output=True,
        timeout=_GIT_TIMEOUT,
    )
    if result.returncode != 0:
        return None
    return result.stdout.decode().strip() or None


# Rename detection threshold: a delete/add pair with >= 50% identical
# content is reported as a rename, matching the attribution contract.
RENAME_THRESHOLD = "-M50%"


def diff_tree(root: str, old: str | None, new: str) -> list[TreeChange]:
    """File-level changes from `old` to `new` (old=None diffs against empty).

    Renames are detected at the 50% similarity threshold. Output is the
    raw -z format, so arbitrary path bytes are handled.
    """
    if old is None:
        args = ["diff-tree", "-r", "-z", RENAME_THRESHOLD, "--no-commit-id", "--root", new]
    else:
        args = ["diff-tree", "-r", "-z", RENAME_THRESHOLD, "--no-commit-id", old, new]
    out = run_git_bytes(root, *args)
    changes: list[TreeChange] = []
    fields = out.split(b"\0")
    i = 0
    while i < len(fields) and fields[i]:
        meta = fields[i].decode("utf-8", "replace")
        # :oldmode newmode oldsha newsha status
        parts = meta.lstrip(":").split()
        old_blob, new_blob, status = parts[2], parts[3], parts[4]
        status_kind = status[0]
        if status_kind in ("R", "C"):
            old_path = fields[i + 1].decode("utf-8", "replace")
            new_path = fields[i + 2].decode("utf-8", "replace")
            i += 3
            changes.append(TreeChange("R", new_path, old_path, old_blob, new_blob))
        else:
            path = fields[i + 1].decode("utf-8", "replace")
            i += 2
            if status_kind not in ("A", "M", "D"):
                # type changes (T) and friends: treat as modify
                status_kind = "M"
            changes.append(TreeChange(status_kind, path, None, old_blob, new_blob))
    return changes


def ls_tree(root: str, commit: str) -> list[tuple[str, str]]:
    """(path, blob sha) for every blob in the commit's tree, path-sorted."""
    out = run_git_bytes(root, "ls-tree", "-r", "-z", commit)
    entries: list[tuple[str, str]] = []
    for record in out.split(b"\0"):
        if not record:
            continue
        meta, _, path = record.partition(b"\t")
        parts = meta.decode().split()
        if len(parts) >= 3 and parts[1] == "blob":
            entries.append((path.decode("utf-8", "replace"), parts[2]))
    entries.sort(key=lambda e: e[0].encode("utf-8", "replace"))
    return entries
