"""Per-team pipeline: repository -> tables -> summaries -> report files.

One team's failure never aborts the others; the CLI collects TeamResult
objects and reports per-team outcomes. All artifacts land under
out/<team>/<window-label>/ and every run writes a manifest with artifact
hashes so a run can be reproduced and verified exactly.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import attribution, ingest, metrics, tables
from .agents import chain
from .agents.chain import SynthesisBundle
from .config import RunConfig
from .errors import ContribSumError
from .identity import UNMAPPED, Roster, resolve
from .report import ReportDocument, RunMeta, diff_windows, render
from .store import CostLedger, Store

logger = logging.getLogger(__name__)

MANIFEST_NAME = "run_manifest.json"
STATE_NAME = "report_state.json"


@dataclass
class TeamResult:
    team: str
    ok: bool
    error: str = ""
    artifacts: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def _window_dir(cfg: RunConfig, team: str) -> Path:
    return Path(cfg.out_dir) / team / (cfg.window.label or "window")


def _read_optional(path: str | None) -> str:
    if not path:
        return ""
    return Path(path).read_text(encoding="utf-8")


def analyze_team(
    team: str,
    repo_path: str,
    cfg: RunConfig,
    roster: Roster,
    provider,
    store: Store,
    ledger: CostLedger,
) -> TeamResult:
    result = TeamResult(team=team, ok=True)
    try:
        _analyze_team(result, team, repo_path, cfg, roster, provider, store, ledger)
    except ContribSumError as exc:
        result.ok = False
        result.error = str(exc)
    except Exception as exc:  # corrupt repos raise plumbing errors
        result.ok = False
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def _analyze_team(
    result: TeamResult,
    team: str,
    repo_path: str,
    cfg: RunConfig,
    roster: Roster,
    provider,
    store: Store,
    ledger: CostLedger,
) -> None:
    repo = ingest.open_repo(repo_path, cfg.branch)
    options = attribution.AttributionOptions(
        split_coauthors=cfg.coauthor_split,
        exclude_globs=cfg.exclude_globs,
        include_branches=cfg.include_branches,
    )
    cset = attribution.build_contribution_set(repo, cfg.window, roster, options)
    head = ingest.window_head(repo, cfg.window)

    # per-file metrics and analysis-tier functionality rows
    functionality_rows: list[chain.FunctionalityRow] = []
    file_text: dict[str, str] = {}
    if head is not None:
        for path, content in ingest.snapshot(repo, head):
            if attribution.is_excluded(path, cfg.exclude_globs):
                continue
            if b"\0" in content[:8192] or len(content) > options.max_file_bytes:
                continue
            text = content.decode("utf-8", "replace")
            file_text[path] = text
            file_metrics = metrics.compute_file_metrics(path, content)
            functionality_rows.append(
                chain.summarize_file(
                    provider,
                    cfg.analysis_tier,
                    path,
                    text,
                    file_metrics,
                    ledger=ledger,
                    store=store,
                )
            )

    rows_by_path = {row.path: row for row in functionality_rows}

    # analysis-tier contribution rows for every evidence entry with lines
    contribution_rows: list[chain.ContributionRow] = []
    for student in roster.students:
        for ev in cset.evidence_for(student.id):
            if ev.lines_owned + ev.lines_added_in_window <= 0:
                continue
            row = rows_by_path.get(ev.path)
            if row is None:
                continue  # evidence for a file the snapshot no longer carries
            contribution_rows.append(
                chain.describe_contribution(
                    provider, cfg.analysis_tier, row, ev, ledger=ledger, store=store
                )
            )

    bundle = SynthesisBundle(
        functionality_rows=functionality_rows,
        contribution_rows=contribution_rows,
        sprint_instructions=_read_optional(cfg.sprint_instructions_path),
        project_description=_read_optional(cfg.project_description_path),
        roles_enabled=cfg.roles_enabled,
        roster=roster,
        window=cfg.window,
        contribution_set=cset,
        template_instructions=chain.load_template("synthesize"),
    )
    summaries, team_summary = chain.synthesize(
        provider, cfg.synthesis_tier, bundle, ledger=ledger, store=store
    )
    for summary in summaries:
        summary.validation = chain.validate_summary(summary, cset)

    # unmapped author warnings from window commits
    unmapped: list[str] = []
    for record in ingest.list_commits(repo, cfg.window):
        if resolve(roster, record.author_name, record.author_email) is None:
            signature = f"{record.author_name} <{record.author_email}>"
            if signature not in unmapped:
                unmapped.append(signature)
    if UNMAPPED.id in cset.per_student:
        owned = sum(ev.lines_owned for ev in cset.per_student[UNMAPPED.id])
        if owned:
            result.warnings.append(f"{owned} lines owned by unmapped authors")

    branch_sections = []
    for branch in cfg.include_branches:
        extra = attribution.branch_extra_attributions(repo, branch, cfg.window, roster, options)
        per_student: dict[str, int] = {}
        files: set[str] = set()
        for attr in extra:
            name = attr.student.display_name if attr.student else UNMAPPED.display_name
            per_student[name] = per_student.get(name, 0) + 1
            files.add(attr.path)
        branch_sections.append(
            (branch, tuple(sorted(per_student.items())), tuple(sorted(files)))
        )

    evidence_map = {
        sid: {ev.path: (ev.lines_owned, ev.lines_added_in_window) for ev in rows}
        for sid, rows in cset.per_student.items()
        if rows
    }
    meta = RunMeta(
        team=team,
        window=cfg.window,
        roles_enabled=cfg.roles_enabled,
        unmapped_authors=tuple(unmapped),
        branch_sections=tuple(branch_sections),
        evidence=evidence_map,
    )
    document = render(summaries, team_summary, meta)
    result.warnings.extend(document.warnings)

    out_dir = _window_dir(cfg, team)
    out_dir.mkdir(parents=True, exist_ok=True)

    functionality_table = tables.FunctionalityTable(
        rows=tuple(
            tables.FunctionalityTableRow(
                filename=row.path,
                functionality=row.functionality,
                difficulty=row.difficulty,
                byte_size=row.metrics.byte_size,
                line_count=row.metrics.line_count,
                complexity=row.metrics.complexity.file_score if row.metrics.complexity else None,
                tag_count=row.metrics.tag_count,
            )
            for row in functionality_rows
        )
    )
    contribution_table = tables.ContributionTable(
        rows=tuple(
            tables.ContributionTableRow(
                student=row.student.id,
                file=row.path,
                description=row.description,
                lines_owned=row.evidence.lines_owned,
                lines_added_in_window=row.evidence.lines_added_in_window,
                solo_functions=tables.solo_functions_text(row.evidence.solo_functions),
            )
            for row in contribution_rows
        )
    )
    tables.write_csv(functionality_table, out_dir / "functionality.csv")
    tables.write_csv(contribution_table, out_dir / "contribution.csv")
    (out_dir / "report.md").write_text(document.markdown, encoding="utf-8")
    (out_dir / "contribution_set.json").write_text(cset.to_json(), encoding="utf-8")
    _write_report_state(out_dir, cfg, document, summaries, team_summary)

    prior = _find_prior_state(cfg, team)
    if prior is not None:
        delta = diff_windows(prior, document)
        (out_dir / "delta.md").write_text(
            delta or "No changes between windows.\n", encoding="utf-8"
        )

    artifact_names = ["functionality.csv", "contribution.csv", "report.md", "contribution_set.json"]
    if prior is not None:
        artifact_names.append("delta.md")
    manifest = {
        "team": team,
        "window": {
            "start": cfg.window.start.isoformat(),
            "end": cfg.window.end.isoformat(),
            "label": cfg.window.label,
        },
        "repo_head": repo.head_ref,
        "window_head": head,
        "provider_mode": cfg.provider_mode,
        "roles": cfg.roles_enabled,
        "coauthor_split": cfg.coauthor_split,
        "exclude_globs": list(cfg.exclude_globs),
        "include_branches": list(cfg.include_branches),
        "models": {
            "analysis": cfg.analysis_tier.model_id,
            "synthesis": cfg.synthesis_tier.model_id,
        },
        "artifacts": {
            name: hashlib.sha256((out_dir / name).read_bytes()).hexdigest()
            for name in artifact_names
        },
    }
    (out_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    result.artifacts = {name: str(out_dir / name) for name in artifact_names}


def _write_report_state(
    out_dir: Path, cfg: RunConfig, document: ReportDocument, summaries, team_summary
) -> None:
    """Persist what `render` needs, so `contribsum render` can re-render
    and later windows can compute deltas, all without provider calls."""
    state = {
        "team": document.team,
        "window_label": document.window_label,
        "window_start": cfg.window.start.isoformat(),
        "student_files": {
            sid: {p: list(v) for p, v in paths.items()}
            for sid, paths in document.student_files.items()
        },
        "student_names": document.student_names,
        "roles_enabled": cfg.roles_enabled,
        "summaries": [
            {
                "id": s.student.id,
                "name": s.student.display_name,
                "headline": s.headline,
                "bullets": [[p, t] for p, t in s.per_file_bullets],
                "role": [s.role.seniority, s.role.role] if s.role else None,
                "flags": [[c, r] for c, r in (s.validation.flags if s.validation else ())],
            }
            for s in summaries
        ],
        "team_summary": {
            "narrative": team_summary.narrative,
            "bullets": list(team_summary.progress_bullets),
        },
    }
    (out_dir / STATE_NAME).write_text(
        json.dumps(state, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _document_from_state(state: dict) -> ReportDocument:
    return ReportDocument(
        team=state["team"],
        window_label=state["window_label"],
        student_sections=[],
        team_section="",
        warnings=[],
        markdown="",
        student_files={
            sid: {p: tuple(v) for p, v in paths.items()}
            for sid, paths in state["student_files"].items()
        },
        student_names=state["student_names"],
    )


def _find_prior_state(cfg: RunConfig, team: str) -> ReportDocument | None:
    """Most recent earlier window's report state for this team, if any."""
    team_dir = Path(cfg.out_dir) / team
    if not team_dir.exists():
        return None
    best: tuple[str, dict] | None = None
    for state_path in team_dir.glob(f"*/{STATE_NAME}"):
        try:
            state = json.loads(state_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            continue
        start = state.get("window_start", "")
        if start and start < cfg.window.start.isoformat():
            if best is None or start > best[0]:
                best = (start, state)
    if best is None:
        return None
    return _document_from_state(best[1])


def run_analysis(cfg: RunConfig, roster: Roster, provider, store: Store, ledger: CostLedger) -> list[TeamResult]:
    """Analyze every configured team, optionally in parallel."""
    if cfg.jobs <= 1 or len(cfg.repos) <= 1:
        return [
            analyze_team(team, path, cfg, roster, provider, store, ledger)
            for team, path in cfg.repos
        ]
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        futures = [
            pool.submit(analyze_team, team, path, cfg, roster, provider, store, ledger)
            for team, path in cfg.repos
        ]
        return [f.result() for f in futures]
