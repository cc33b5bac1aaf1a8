"""Run configuration: one INI-style file per course, env vars for secrets.

Sections: [run] (paths, window, flags), [repos] (team = clone path),
[analysis_model] / [synthesis_model] (tiers with rates), [provider]
(endpoint, replay directory). LLM_API_KEY overrides any configured key;
CONTRIBSUM_STATE overrides the state directory.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .agents.provider import ModelTier
from .attribution import DEFAULT_EXCLUDE_GLOBS
from .errors import ConfigError
from .ingest import AnalysisWindow

API_KEY_ENV_VAR = "LLM_API_KEY"

PROVIDER_MODES = ("mock", "replay", "live")


@dataclass
class RunConfig:
    repos: list[tuple[str, str]]  # (team id, clone path)
    roster_path: str
    window: AnalysisWindow
    analysis_tier: ModelTier
    synthesis_tier: ModelTier
    provider_mode: str = "mock"
    sprint_instructions_path: str | None = None
    project_description_path: str | None = None
    roles_enabled: bool = False
    coauthor_split: bool = True
    include_branches: tuple[str, ...] = ()
    exclude_globs: tuple[str, ...] = DEFAULT_EXCLUDE_GLOBS
    endpoint: str = ""
    api_key: str = ""
    replay_dir: str = ""
    out_dir: str = "out"
    state_dir: str = ".contribsum"
    jobs: int = 1  # teams processed in parallel
    analysis_workers: int = 1  # in-flight analysis calls per team
    rate_limit: float = 0.0  # provider requests/second, 0 = unlimited
    branch: str | None = None  # explicit default branch override
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not self.repos:
            raise ConfigError("no repositories configured ([repos] section empty)")
        paths = [p for _, p in self.repos]
        if len(set(paths)) != len(paths):
            raise ConfigError("repository paths must be distinct")
        if self.provider_mode not in PROVIDER_MODES:
            raise ConfigError(f"provider must be one of {PROVIDER_MODES}, got {self.provider_mode!r}")
        if self.provider_mode == "live":
            if not self.endpoint:
                raise ConfigError("live provider requires [provider] endpoint")
            if not self.resolved_api_key():
                raise ConfigError(
                    f"live provider requires an API key ({API_KEY_ENV_VAR} or [provider] api_key)"
                )
        if self.provider_mode == "replay" and not self.replay_dir:
            raise ConfigError("replay provider requires [provider] replay_dir")
        if not Path(self.roster_path).exists():
            raise ConfigError(f"roster file not found: {self.roster_path}")
        for key in ("sprint_instructions_path", "project_description_path"):
            value = getattr(self, key)
            if value and not Path(value).exists():
                raise ConfigError(f"{key.replace('_path', '')} file not found: {value}")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if self.analysis_workers < 1:
            raise ConfigError("analysis_workers must be at least 1")
        if self.rate_limit < 0:
            raise ConfigError("rate_limit must be non-negative")

    def resolved_api_key(self) -> str:
        return os.environ.get(API_KEY_ENV_VAR) or self.api_key


def _parse_bool(raw: str, what: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{what}: expected on/off, got {raw!r}")


def _parse_when(raw: str, what: str) -> datetime:
    try:
        moment = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        raise ConfigError(f"{what}: not an ISO timestamp: {raw!r}")
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return moment


def _tier(parser: configparser.ConfigParser, section: str, tier_name: str) -> ModelTier:
    if not parser.has_section(section):
        raise ConfigError(f"missing [{section}] section")
    try:
        return ModelTier(
            tier=tier_name,
            model_id=parser.get(section, "model_id"),
            max_input_tokens=parser.getint(section, "max_input_tokens"),
            cost_per_1k_input=parser.getfloat(section, "cost_per_1k_input", fallback=0.0),
            cost_per_1k_output=parser.getfloat(section, "cost_per_1k_output", fallback=0.0),
        )
    except (configparser.Error, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}")


def resolve_window(
    *,
    window_start: str | None,
    window_end: str | None,
    window_label: str | None,
    sprint_start: str | None,
    week: int | None,
) -> AnalysisWindow:
    """Explicit bounds, or a --week preset against the sprint start date."""
    if week is not None:
        if not sprint_start:
            raise ConfigError("--week requires sprint_start in the [run] section")
        if week < 1:
            raise ConfigError("--week must be 1 or greater")
        start = _parse_when(sprint_start, "sprint_start") + timedelta(weeks=week - 1)
        return AnalysisWindow(start=start, end=start + timedelta(weeks=1), label=f"week-{week}")
    if not window_start or not window_end:
        raise ConfigError("window_start and window_end (or --week) are required")
    start = _parse_when(window_start, "window_start")
    end = _parse_when(window_end, "window_end")
    if not start < end:
        raise ConfigError("window_start must precede window_end")
    return AnalysisWindow(start=start, end=end, label=window_label or "window")


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    """Parse and validate the run configuration file.

    `overrides` carries CLI flag values (same key names as [run] options,
    plus `week`); only non-None entries take effect.
    """
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"config file not found: {config_path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(config_path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {config_path}: {exc}")
    if not parser.has_section("run"):
        raise ConfigError("missing [run] section")

    base = config_path.parent

    def rel(value: str | None) -> str | None:
        if not value:
            return None
        p = Path(value)
        return str(p if p.is_absolute() else base / p)

    def run_opt(key: str, fallback: str | None = None) -> str | None:
        if key in overrides:
            return str(overrides[key])
        return parser.get("run", key, fallback=fallback)

    repos: list[tuple[str, str]] = []
    if parser.has_section("repos"):
        for team, repo_path in parser.items("repos"):
            repos.append((team, rel(repo_path) or repo_path))
    if "repos" in overrides:
        repos = overrides["repos"]

    window = resolve_window(
        window_start=run_opt("window_start"),
        window_end=run_opt("window_end"),
        window_label=run_opt("window_label"),
        sprint_start=run_opt("sprint_start"),
        week=overrides.get("week"),
    )

    roster = rel(run_opt("roster"))
    if not roster:
        raise ConfigError("[run] roster is required")

    include_raw = run_opt("include_branches", "") or ""
    include_branches = tuple(b.strip() for b in include_raw.split(",") if b.strip())
    exclude_raw = run_opt("exclude_globs", "") or ""
    if exclude_raw.strip():
        exclude_globs = tuple(g.strip() for g in exclude_raw.split(",") if g.strip())
    else:
        exclude_globs = DEFAULT_EXCLUDE_GLOBS

    cfg = RunConfig(
        repos=repos,
        roster_path=roster,
        window=window,
        analysis_tier=_tier(parser, "analysis_model", "analysis"),
        synthesis_tier=_tier(parser, "synthesis_model", "synthesis"),
        provider_mode=(run_opt("provider", "mock") or "mock").lower(),
        sprint_instructions_path=rel(run_opt("sprint_instructions")),
        project_description_path=rel(run_opt("project_description")),
        roles_enabled=_parse_bool(run_opt("roles", "off") or "off", "[run] roles"),
        coauthor_split=_parse_bool(run_opt("coauthor_split", "on") or "on", "[run] coauthor_split"),
        include_branches=include_branches,
        exclude_globs=exclude_globs,
        endpoint=parser.get("provider", "endpoint", fallback=""),
        api_key=parser.get("provider", "api_key", fallback=""),
        replay_dir=rel(parser.get("provider", "replay_dir", fallback="")) or "",
        out_dir=rel(run_opt("out_dir", "out")) or "out",
        state_dir=rel(run_opt("state_dir", ".contribsum")) or ".contribsum",
        jobs=int(run_opt("jobs", "1") or 1),
        analysis_workers=int(run_opt("analysis_workers", "1") or 1),
        rate_limit=float(run_opt("rate_limit", "0") or 0),
        branch=run_opt("branch"),
    )
    cfg.validate()
    return cfg
