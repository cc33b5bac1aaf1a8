"""Repository opening, history listing, snapshots."""

from __future__ import annotations

from datetime import datetime, timezone

import pytest

from conftest import JUNE
from contribsum.errors import BranchNotFound, NotARepository, UnknownCommit
from contribsum.ingest import AnalysisWindow, list_commits, open_repo, snapshot, window_head
from contribsum import synthfix


class TestAnalysisWindow:
    def test_start_must_precede_end(self):
        with pytest.raises(ValueError):
            AnalysisWindow(start=JUNE.end, end=JUNE.start, label="bad")

    def test_bounds_must_be_aware(self):
        with pytest.raises(ValueError):
            AnalysisWindow(
                start=datetime(2024, 6, 1), end=datetime(2024, 6, 8), label="naive"
            )

    def test_half_open_contains(self):
        assert JUNE.contains(JUNE.start)
        assert not JUNE.contains(JUNE.end)


class TestOpenRepo:
    def test_configured_default_branch(self, built_fixtures):
        handle, _ = built_fixtures["sole_author"]
        assert handle.default_branch == "main"
        assert len(handle.head_ref) == 40

    def test_empty_directory_not_a_repository(self, tmp_path):
        with pytest.raises(NotARepository):
            open_repo(str(tmp_path / "nothing-here"))
        empty = tmp_path / "empty"
        empty.mkdir()
        with pytest.raises(NotARepository):
            open_repo(str(empty))

    def test_missing_branch_named_in_error(self, built_fixtures):
        handle, _ = built_fixtures["sole_author"]
        with pytest.raises(BranchNotFound) as err:
            open_repo(handle.root_path, "grading")
        assert err.value.branch == "grading"

    def test_explicit_branch_request(self, built_fixtures):
        handle, _ = built_fixtures["unmerged_branch"]
        experiment = open_repo(handle.root_path, "experiment")
        assert experiment.default_branch == "experiment"
        assert experiment.head_ref != handle.head_ref


class TestListCommits:
    def test_empty_window_empty_list(self, built_fixtures):
        handle, _ = built_fixtures["sole_author"]
        window = AnalysisWindow(
            start=datetime(2031, 1, 1, tzinfo=timezone.utc),
            end=datetime(2031, 2, 1, tzinfo=timezone.utc),
            label="far-future",
        )
        assert list_commits(handle, window) == []

    def test_merge_commits_excluded(self, built_fixtures):
        handle, truth = built_fixtures["merged_branch"]
        records = list_commits(handle, JUNE)
        assert all(not r.is_merge for r in records)
        # the script has 4 steps, one of them the merge
        assert len(records) == 3
        assert {r.hash for r in records} == {
            truth.hash_of(m.index) for m in truth.steps if not m.is_merge
        }

    def test_unmerged_side_branch_excluded(self, built_fixtures):
        handle, truth = built_fixtures["unmerged_branch"]
        records = list_commits(handle, JUNE)
        branch_step = next(m for m in truth.steps if m.index not in truth.main_steps)
        assert truth.hash_of(branch_step.index) not in {r.hash for r in records}

    def test_ordered_oldest_first(self, built_fixtures):
        handle, _ = built_fixtures["zero_commit_student"]
        records = list_commits(handle, JUNE)
        keys = [(r.authored_at, r.hash) for r in records]
        assert keys == sorted(keys)

    def test_changed_files_carry_kinds(self, built_fixtures):
        handle, _ = built_fixtures["rename_keeps_authors"]
        records = list_commits(handle, JUNE)
        kinds = [c.kind for r in records for c in r.changed_files]
        assert "add" in kinds
        rename = next(c for r in records for c in r.changed_files if c.kind == "rename")
        assert rename.old_path == "util.py"
        assert rename.path == "helpers.py"

    def test_messages_carry_trailers(self, built_fixtures):
        handle, _ = built_fixtures["coauthored_commit"]
        records = list_commits(handle, JUNE)
        assert any("Co-authored-by: Bob Roy" in r.message for r in records)


class TestSnapshot:
    def test_initial_commit_single_file(self, built_fixtures):
        handle, truth = built_fixtures["sole_author"]
        first = truth.hash_of(0)
        files = snapshot(handle, first)
        assert [path for path, _ in files] == ["app.py"]
        assert b"booting application" in files[0][1]

    def test_rename_shows_new_path_only(self, built_fixtures):
        handle, truth = built_fixtures["rename_keeps_authors"]
        files = dict(snapshot(handle, truth.hash_of(1)))
        assert "helpers.py" in files
        assert "util.py" not in files

    def test_unknown_commit(self, built_fixtures):
        handle, _ = built_fixtures["sole_author"]
        with pytest.raises(UnknownCommit):
            snapshot(handle, "0" * 40)

    def test_paths_bytewise_sorted(self, built_fixtures):
        handle, _ = built_fixtures["generated_file_exclusion"]
        files = snapshot(handle, handle.head_ref)
        paths = [p for p, _ in files]
        assert paths == sorted(paths, key=lambda p: p.encode())


class TestWindowHead:
    def test_none_before_any_commit(self, built_fixtures):
        handle, _ = built_fixtures["sole_author"]
        window = AnalysisWindow(
            start=datetime(2020, 1, 1, tzinfo=timezone.utc),
            end=datetime(2020, 2, 1, tzinfo=timezone.utc),
            label="prehistory",
        )
        assert window_head(handle, window) is None

    def test_full_window_is_branch_head(self, built_fixtures):
        handle, _ = built_fixtures["merged_branch"]
        assert window_head(handle, JUNE) == handle.head_ref

    def test_partial_window_stops_at_cutoff(self, built_fixtures):
        handle, truth = built_fixtures["interleaved_edits"]
        cutoff = truth.steps[1].authored_at  # exclusive: second commit outside
        window = AnalysisWindow(start=JUNE.start, end=cutoff, label="early")
        assert window_head(handle, window) == truth.hash_of(0)


class TestReplayConsistency:
    def test_parent_snapshot_plus_diff_equals_snapshot(self, built_fixtures):
        # For every non-merge commit: applying its changed_files against the
        # parent snapshot must yield the commit's snapshot file set.
        for name in ("interleaved_edits", "rename_keeps_authors", "unmerged_branch"):
            handle, _ = built_fixtures[name]
            for record in list_commits(handle, JUNE):
                if not record.parents:
                    continue
                parent_files = dict(snapshot(handle, record.parents[0]))
                child_files = dict(snapshot(handle, record.hash))
                expected = dict(parent_files)
                for change in record.changed_files:
                    if change.kind == "delete":
                        expected.pop(change.path, None)
                    elif change.kind == "rename":
                        expected.pop(change.old_path, None)
                        expected[change.path] = child_files[change.path]
                    else:
                        expected[change.path] = child_files[change.path]
                assert expected == child_files, f"{name}:{record.hash}"
