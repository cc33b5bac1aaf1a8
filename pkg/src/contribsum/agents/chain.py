"""The agent chain: per-file analysis, per-student synthesis, validation.

Raw blame output is never sent to a model; every prompt carries only the
compressed evidence (tables, counts, messages). Prompts are versioned
template files shipped with the package and referenced by hash in the
cache key, so editing a template invalidates exactly the affected
responses.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources

from ..attribution import ContributionEvidence, ContributionSet
from ..errors import BudgetExceeded, TemplateViolation
from ..identity import Roster, StudentId
from ..ingest import AnalysisWindow
from ..metrics import FileMetrics
from ..store import CostLedger, Store, cache_key
from .provider import ModelTier, estimate_tokens

ROLES = (
    "Technical Leader",
    "Data Engineer",
    "Security Engineer",
    "DevOps Engineer",
    "Backend Engineer",
    "Frontend Engineer",
    "Documenter",
)
SENIORITIES = ("Junior", "Senior")

NO_CONTRIBUTION_TEXT = "No recorded contributions in this window."

DEFAULT_CLIP_LINES = 200  # head and tail lines kept when clipping file content


@dataclass(frozen=True)
class FunctionalityRow:
    path: str
    functionality: str
    difficulty: str
    metrics: FileMetrics


@dataclass(frozen=True)
class ContributionRow:
    student: StudentId
    path: str
    description: str
    evidence: ContributionEvidence


@dataclass(frozen=True)
class RoleAssignment:
    role: str
    seniority: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.seniority not in SENIORITIES:
            raise ValueError(f"unknown seniority {self.seniority!r}")


@dataclass(frozen=True)
class ValidationReport:
    status: str  # "clean" | "flagged"
    flags: tuple[tuple[str, str], ...] = ()  # (claim text, reason)


@dataclass
class StudentSummary:
    student: StudentId
    headline: str
    per_file_bullets: list[tuple[str, str]] = field(default_factory=list)
    role: RoleAssignment | None = None
    validation: ValidationReport | None = None


@dataclass(frozen=True)
class TeamSummary:
    window: AnalysisWindow
    narrative: str
    progress_bullets: tuple[str, ...] = ()


@dataclass
class SynthesisBundle:
    functionality_rows: list[FunctionalityRow]
    contribution_rows: list[ContributionRow]
    sprint_instructions: str
    project_description: str
    roles_enabled: bool
    roster: Roster
    window: AnalysisWindow
    contribution_set: ContributionSet
    template_instructions: str = ""  # defaults to the shipped synthesize template


def load_template(name: str) -> str:
    return resources.files("contribsum.agents.prompts").joinpath(f"{name}.txt").read_text(
        encoding="utf-8"
    )


def template_hash(name: str) -> str:
    return hashlib.sha256(load_template(name).encode()).hexdigest()


def clip_content(text: str, head: int = DEFAULT_CLIP_LINES, tail: int = DEFAULT_CLIP_LINES) -> str:
    """First and last N lines with an elision marker in between."""
    lines = text.splitlines()
    if len(lines) <= head + tail:
        return text
    elided = len(lines) - head - tail
    kept = lines[:head] + [f"... [{elided} lines clipped] ..."] + lines[len(lines) - tail:]
    return "\n".join(kept)


def _render(template_name: str, data: dict) -> str:
    template = load_template(template_name)
    block = "[[DATA]]\n" + json.dumps(data, sort_keys=True, ensure_ascii=False, indent=1) + "\n[[/DATA]]"
    return template.replace("<<DATA>>", block)


def _complete(
    provider,
    tier: ModelTier,
    template_name: str,
    data: dict,
    *,
    ledger: CostLedger | None = None,
    store: Store | None = None,
    scope: str = "",
    prompt_override: str | None = None,
) -> str:
    """One budgeted, cached, ledgered provider call."""
    prompt = prompt_override if prompt_override is not None else _render(template_name, data)
    system = load_template("system")
    estimate = estimate_tokens(system) + estimate_tokens(prompt)
    if estimate > tier.input_budget:
        raise BudgetExceeded(
            f"estimated {estimate} tokens exceeds budget {tier.input_budget} "
            f"for {tier.model_id}"
        )
    key = cache_key(scope, template_hash(template_name), tier.model_id, prompt)
    if store is not None:
        hit = store.get(key)
        if hit is not None:
            return hit["text"]
    messages = [
        {"role": "system", "content": system},
        {"role": "user", "content": prompt},
    ]
    response = provider.send(messages, tier.model_id)
    if ledger is not None:
        record_usage(ledger, tier, response.input_tokens, response.output_tokens)
    if store is not None:
        store.put(
            key,
            {
                "text": response.text,
                "input_tokens": response.input_tokens,
                "output_tokens": response.output_tokens,
            },
        )
    return response.text


def record_usage(
    ledger: CostLedger, tier: ModelTier, input_tokens: int, output_tokens: int
):
    """Append one usage entry priced at the tier's per-1k rates."""
    cost = (
        input_tokens / 1000.0 * tier.cost_per_1k_input
        + output_tokens / 1000.0 * tier.cost_per_1k_output
    )
    return ledger.add(tier.tier, tier.model_id, input_tokens, output_tokens, cost)


def _metrics_payload(metrics: FileMetrics) -> dict:
    return {
        "byte_size": metrics.byte_size,
        "line_count": metrics.line_count,
        "kind": metrics.kind,
        "complexity": metrics.complexity.file_score if metrics.complexity else None,
        "tag_count": metrics.tag_count,
    }


def summarize_file(
    provider,
    tier: ModelTier,
    path: str,
    content: str,
    metrics: FileMetrics,
    *,
    ledger: CostLedger | None = None,
    store: Store | None = None,
    scope: str = "",
) -> FunctionalityRow:
    """Analysis-tier call producing one Functionality Table row.

    Empty files short-circuit without a provider call. Content is clipped
    to the first and last N lines; N halves until the request fits the
    tier budget, or BudgetExceeded is raised.
    """
    if not content.strip():
        return FunctionalityRow(path=path, functionality="empty file", difficulty="none", metrics=metrics)
    clip = DEFAULT_CLIP_LINES
    system_cost = estimate_tokens(load_template("system"))
    while True:
        data = {
            "task": "summarize-file",
            "path": path,
            "metrics": _metrics_payload(metrics),
            "content": clip_content(content, clip, clip),
        }
        prompt = _render("summarize_file", data)
        if system_cost + estimate_tokens(prompt) <= tier.input_budget:
            break
        if clip <= 4:
            raise BudgetExceeded(f"{path}: content cannot fit tier budget even fully clipped")
        clip //= 2
    text = _complete(
        provider, tier, "summarize_file", data, ledger=ledger, store=store, scope=scope
    )
    functionality, difficulty = _parse_two_fields(text)
    return FunctionalityRow(path=path, functionality=functionality, difficulty=difficulty, metrics=metrics)


def _parse_two_fields(text: str) -> tuple[str, str]:
    functionality = difficulty = ""
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.lower().startswith("functionality:"):
            functionality = stripped.split(":", 1)[1].strip()
        elif stripped.lower().startswith("difficulty:"):
            difficulty = stripped.split(":", 1)[1].strip()
    if not functionality:
        functionality = text.strip() or "(no response)"
    if not difficulty:
        difficulty = "(not stated)"
    return functionality, difficulty


def describe_contribution(
    provider,
    tier: ModelTier,
    row: FunctionalityRow,
    evidence: ContributionEvidence,
    *,
    ledger: CostLedger | None = None,
    store: Store | None = None,
    scope: str = "",
) -> ContributionRow:
    """Analysis-tier call producing one Contribution Table row."""
    if evidence.lines_owned + evidence.lines_added_in_window <= 0:
        raise ValueError(
            f"no measurable lines for {evidence.student.id} in {evidence.path}; "
            "caller must not request a description"
        )
    data = {
        "task": "describe-contribution",
        "student_id": evidence.student.id,
        "student_name": evidence.student.display_name,
        "path": evidence.path,
        "file_functionality": row.functionality,
        "lines_owned": evidence.lines_owned,
        "lines_added_in_window": evidence.lines_added_in_window,
        "commit_messages": evidence.commit_messages[:20],
        "solo_functions": [[n, s] for n, s in evidence.solo_functions],
    }
    text = _complete(
        provider, tier, "describe_contribution", data, ledger=ledger, store=store, scope=scope
    )
    return ContributionRow(
        student=evidence.student, path=evidence.path, description=text.strip(), evidence=evidence
    )


def _has_positive_evidence(rows: list[ContributionEvidence]) -> bool:
    return any(r.lines_owned + r.lines_added_in_window > 0 or r.commit_messages for r in rows)


def synthesize(
    provider,
    tier: ModelTier,
    bundle: SynthesisBundle,
    *,
    ledger: CostLedger | None = None,
    store: Store | None = None,
    scope: str = "",
) -> tuple[list[StudentSummary], TeamSummary]:
    """Synthesis-tier call producing every student summary plus the team's.

    Students without window evidence get a fixed no-contribution summary
    without touching the provider. A malformed response triggers exactly
    one corrective repair retry before TemplateViolation is raised.
    """
    active: list[StudentId] = []
    idle: list[StudentId] = []
    for student in bundle.roster.students:
        rows = bundle.contribution_set.evidence_for(student.id)
        if _has_positive_evidence(rows):
            active.append(student)
        else:
            idle.append(student)

    summaries: list[StudentSummary] = [
        StudentSummary(student=s, headline=NO_CONTRIBUTION_TEXT) for s in idle
    ]

    if not active:
        team = TeamSummary(
            window=bundle.window,
            narrative="No recorded team contributions in this window.",
            progress_bullets=(),
        )
        return _in_roster_order(summaries, bundle.roster), team

    described = {(r.student.id, r.path): r.description for r in bundle.contribution_rows}
    students_payload = []
    for student in active:
        files = []
        for ev in bundle.contribution_set.evidence_for(student.id):
            if ev.lines_owned + ev.lines_added_in_window <= 0 and not ev.commit_messages:
                continue
            files.append(
                {
                    "path": ev.path,
                    "description": described.get((student.id, ev.path), ""),
                    "lines_owned": ev.lines_owned,
                    "lines_added_in_window": ev.lines_added_in_window,
                    "solo_functions": [[n, s] for n, s in ev.solo_functions],
                }
            )
        students_payload.append(
            {"id": student.id, "name": student.display_name, "files": files}
        )

    data = {
        "task": "synthesize",
        "students": students_payload,
        "functionality": [
            {
                "path": r.path,
                "functionality": r.functionality,
                "complexity": r.metrics.complexity.file_score if r.metrics.complexity else None,
            }
            for r in bundle.functionality_rows
        ],
        "sprint_instructions": bundle.sprint_instructions,
        "project_description": bundle.project_description,
        "roles_requested": bundle.roles_enabled,
        "template_instructions": bundle.template_instructions,
    }

    text = _complete(provider, tier, "synthesize", data, ledger=ledger, store=store, scope=scope)
    try:
        parsed, team = _parse_synthesis(text, [s.id for s in active], bundle)
    except TemplateViolation as first_error:
        repair = load_template("repair")
        prompt = repair.replace("<<PROBLEMS>>", str(first_error)).replace(
            "<<ORIGINAL>>", _render("synthesize", data)
        )
        text = _complete(
            provider,
            tier,
            "repair",
            data,
            ledger=ledger,
            store=store,
            scope=scope,
            prompt_override=prompt,
        )
        parsed, team = _parse_synthesis(text, [s.id for s in active], bundle)

    summaries.extend(parsed)
    return _in_roster_order(summaries, bundle.roster), team


def _in_roster_order(summaries: list[StudentSummary], roster: Roster) -> list[StudentSummary]:
    order = {s.id: i for i, s in enumerate(roster.students)}
    return sorted(summaries, key=lambda s: order.get(s.student.id, len(order)))


_SECTION_RE = re.compile(r"^### (STUDENT (\S+)|TEAM)\s*$", re.MULTILINE)
_ROLE_RE = re.compile(r"^Role:\s*(Junior|Senior)\s+(.+?)\s*$", re.MULTILINE)


def _parse_synthesis(
    text: str, expected_ids: list[str], bundle: SynthesisBundle
) -> tuple[list[StudentSummary], TeamSummary]:
    matches = list(_SECTION_RE.finditer(text))
    if not matches:
        raise TemplateViolation("no '### STUDENT' or '### TEAM' sections found")
    sections: list[tuple[str | None, str]] = []
    for i, match in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        body = text[match.end():end].strip()
        sections.append((match.group(2), body))  # group(2) is None for TEAM

    student_bodies = {sid: body for sid, body in sections if sid is not None}
    team_bodies = [body for sid, body in sections if sid is None]
    missing = [sid for sid in expected_ids if sid not in student_bodies]
    if missing:
        raise TemplateViolation(f"missing student sections: {', '.join(missing)}")
    if len(team_bodies) != 1:
        raise TemplateViolation(f"expected exactly one TEAM section, found {len(team_bodies)}")

    students_by_id = {s.id: s for s in bundle.roster.students}
    summaries: list[StudentSummary] = []
    for sid in expected_ids:
        body = student_bodies[sid]
        headline, bullets = _parse_student_body(sid, body)
        role = None
        if bundle.roles_enabled:
            role_match = _ROLE_RE.search(body)
            if not role_match:
                raise TemplateViolation(f"student {sid}: missing Role line")
            seniority, role_name = role_match.group(1), role_match.group(2).strip()
            if role_name not in ROLES:
                raise TemplateViolation(f"student {sid}: role {role_name!r} not in enumeration")
            role = RoleAssignment(role=role_name, seniority=seniority)
        summaries.append(
            StudentSummary(
                student=students_by_id[sid],
                headline=headline,
                per_file_bullets=bullets,
                role=role,
            )
        )

    team_lines = team_bodies[0].splitlines()
    narrative_lines = [l for l in team_lines if l.strip() and not l.strip().startswith("- ")]
    bullet_lines = [l.strip()[2:].strip() for l in team_lines if l.strip().startswith("- ")]
    narrative = " ".join(l.strip() for l in narrative_lines).strip()
    if not narrative:
        raise TemplateViolation("TEAM section has no narrative paragraph")
    team = TeamSummary(
        window=bundle.window, narrative=narrative, progress_bullets=tuple(bullet_lines)
    )
    return summaries, team


def _parse_student_body(sid: str, body: str) -> tuple[str, list[tuple[str, str]]]:
    summary_match = re.search(r"^Summary:\s*(.+?)(?=^Contributions:|\Z)", body, re.MULTILINE | re.DOTALL)
    if not summary_match:
        raise TemplateViolation(f"student {sid}: missing 'Summary:' paragraph")
    headline = " ".join(summary_match.group(1).split())
    if "Contributions:" not in body:
        raise TemplateViolation(f"student {sid}: missing 'Contributions:' list")
    bullets: list[tuple[str, str]] = []
    in_bullets = False
    for line in body.splitlines():
        stripped = line.strip()
        if stripped.startswith("Contributions:"):
            in_bullets = True
            continue
        if in_bullets and stripped.startswith("- "):
            item = stripped[2:]
            path, sep, desc = item.partition(":")
            if not sep:
                raise TemplateViolation(f"student {sid}: bullet without '<path>: <text>': {item!r}")
            bullets.append((path.strip().strip("`"), desc.strip()))
        elif in_bullets and stripped and not stripped.startswith("- "):
            in_bullets = False
    return headline, bullets


def validate_summary(summary: StudentSummary, contribution_set: ContributionSet) -> ValidationReport:
    """Deterministic cross-check of summary claims against blame evidence.

    Never raises; every unsupported claim becomes a flag. This is the
    safety net against models being led by untrue source-code comments.
    """
    evidence = {ev.path: ev for ev in contribution_set.evidence_for(summary.student.id)}
    flags: list[tuple[str, str]] = []
    for path, text in summary.per_file_bullets:
        claim = f"{path}: {text}"
        ev = evidence.get(path)
        if ev is None:
            flags.append((claim, "file-not-touched"))
        elif ev.lines_owned == 0 and ev.lines_added_in_window == 0:
            flags.append((claim, "zero-lines"))
        elif ev.comment_only:
            flags.append((claim, "comment-only-evidence"))
    return ValidationReport(status="flagged" if flags else "clean", flags=tuple(flags))
