"""Render synthesized summaries into per-student + team Markdown reports.

Rendering is deterministic and total: no provider calls happen here, and
any valid summary set produces a document. Validation flags are never
dropped; flagged claims stay visible with an inline caution marker and a
warnings section, because silent omission and silent hallucination both
erode trust in the reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .agents.chain import StudentSummary, TeamSummary
from .errors import TeamMismatch
from .ingest import AnalysisWindow

TEAM_SECTION_TITLE = "Overall contribution of the team"
ROLE_DISCLAIMER = (
    "_Role labels are assigned by a model and are not comparable across "
    "teams; treat them as conversation starters, not grades._"
)


@dataclass(frozen=True)
class RunMeta:
    """Everything render() needs beyond the summaries themselves."""

    team: str
    window: AnalysisWindow
    roles_enabled: bool = False
    unmapped_authors: tuple[str, ...] = ()
    # (branch name, per-student line counts, file list) for --include-branch
    branch_sections: tuple[tuple[str, tuple[tuple[str, int], ...], tuple[str, ...]], ...] = ()
    # student id -> path -> (lines_owned, lines_added_in_window)
    evidence: dict[str, dict[str, tuple[int, int]]] = field(default_factory=dict)


@dataclass
class ReportDocument:
    team: str
    window_label: str
    student_sections: list[str]
    team_section: str
    warnings: list[str]
    markdown: str
    # diff support: student id -> {path: (owned, added)} plus display names
    student_files: dict[str, dict[str, tuple[int, int]]] = field(default_factory=dict)
    student_names: dict[str, str] = field(default_factory=dict)


def _student_section(summary: StudentSummary, meta: RunMeta) -> tuple[str, list[str]]:
    lines = [f"## {summary.student.display_name}", ""]
    lines.append(f"Summary: {summary.headline}")
    warnings: list[str] = []
    flagged = {claim: reason for claim, reason in (summary.validation.flags if summary.validation else ())}
    if summary.per_file_bullets:
        lines.append("")
        lines.append("Contributions:")
        lines.append("")
        for path, text in summary.per_file_bullets:
            bullet = f"- `{path}`: {text}"
            reason = flagged.get(f"{path}: {text}")
            if reason:
                bullet += f" **[caution: {reason}]**"
                warnings.append(
                    f"{summary.student.display_name}: claim about `{path}` "
                    f"is unsupported ({reason})"
                )
            lines.append(bullet)
    if meta.roles_enabled and summary.role is not None:
        lines.append("")
        lines.append(f"Role: {summary.role.seniority} {summary.role.role}")
        lines.append(ROLE_DISCLAIMER)
    return "\n".join(lines), warnings


def render(
    summaries: list[StudentSummary], team: TeamSummary, meta: RunMeta
) -> ReportDocument:
    """Assemble the report document; sections ordered by display name."""
    ordered = sorted(summaries, key=lambda s: (s.student.display_name, s.student.id))
    warnings: list[str] = []
    student_sections: list[str] = []
    for summary in ordered:
        section, flags = _student_section(summary, meta)
        student_sections.append(section)
        warnings.extend(flags)

    team_lines = [f"## {TEAM_SECTION_TITLE}", "", team.narrative]
    if team.progress_bullets:
        team_lines.append("")
        for bullet in team.progress_bullets:
            team_lines.append(f"- {bullet}")
    team_section = "\n".join(team_lines)

    for author in meta.unmapped_authors:
        warnings.append(f"unmapped author signature: {author}")

    extra_sections: list[str] = []
    for branch, per_student, files in meta.branch_sections:
        lines = [f"## Unmerged branch: {branch}", ""]
        lines.append(
            "Work below exists only on this branch; it is not part of the "
            "default-branch snapshot above."
        )
        lines.append("")
        for name, count in per_student:
            lines.append(f"- {name}: {count} lines")
        if files:
            lines.append("")
            lines.append("Files: " + ", ".join(f"`{f}`" for f in sorted(files)))
        extra_sections.append("\n".join(lines))
        warnings.append(f"included unmerged branch: {branch}")

    parts = [f"# Contribution report: {meta.team} ({meta.window.label or 'window'})", ""]
    parts.extend(s + "\n" for s in student_sections)
    parts.append(team_section + "\n")
    parts.extend(s + "\n" for s in extra_sections)
    if warnings:
        warn_lines = ["## Warnings", ""]
        warn_lines.extend(f"- {w}" for w in warnings)
        parts.append("\n".join(warn_lines) + "\n")
    markdown = "\n".join(parts)

    return ReportDocument(
        team=meta.team,
        window_label=meta.window.label,
        student_sections=student_sections,
        team_section=team_section,
        warnings=warnings,
        markdown=markdown,
        student_files={sid: dict(paths) for sid, paths in meta.evidence.items()},
        student_names={s.student.id: s.student.display_name for s in summaries},
    )


def diff_windows(earlier: ReportDocument, later: ReportDocument) -> str:
    """Per-student digest of new files and evidence deltas between windows."""
    if earlier.team != later.team:
        raise TeamMismatch(f"cannot diff {earlier.team!r} against {later.team!r}")
    lines: list[str] = []
    ids = sorted(
        set(earlier.student_files) | set(later.student_files),
        key=lambda sid: later.student_names.get(sid, earlier.student_names.get(sid, sid)),
    )
    for sid in ids:
        before = earlier.student_files.get(sid, {})
        after = later.student_files.get(sid, {})
        name = later.student_names.get(sid) or earlier.student_names.get(sid) or sid
        entries: list[str] = []
        for path in sorted(set(before) | set(after)):
            b_owned, _ = before.get(path, (0, 0))
            a_owned, a_added = after.get(path, (0, 0))
            if path not in before:
                entries.append(f"- touched new file `{path}` ({a_owned} lines owned)")
            elif path not in after:
                entries.append(f"- no longer owns lines in `{path}`")
            elif b_owned != a_owned:
                entries.append(f"- `{path}`: lines owned {b_owned} -> {a_owned}")
            elif before.get(path) != after.get(path) and a_added:
                entries.append(f"- `{path}`: {a_added} lines reworked this window")
        if entries:
            lines.append(f"{name}:")
            lines.extend(entries)
            lines.append("")
    if not lines:
        return ""
    header = (
        f"Changes for {later.team} from {earlier.window_label or 'previous window'} "
        f"to {later.window_label or 'this window'}:\n"
    )
    return header + "\n" + "\n".join(lines).rstrip() + "\n"
