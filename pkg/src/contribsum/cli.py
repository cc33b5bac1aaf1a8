"""Command-line entry point: analyze, check, cost, render.

Exit codes: 0 success, 1 partial failure (some team failed or a check
found problems), 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import ingest, pipeline
from .agents import chain
from .agents.provider import HttpProvider, MockProvider, ReplayProvider
from .config import RunConfig, load_config
from .errors import ConfigError, ContribSumError
from .identity import load_roster, resolve
from .pipeline import STATE_NAME
from .report import ReportDocument, RunMeta, render
from .store import CostLedger, Store, ledger_report, resolve_state_dir


def build_provider(cfg: RunConfig):
    if cfg.provider_mode == "mock":
        budgets = {
            cfg.analysis_tier.model_id: cfg.analysis_tier.max_input_tokens,
            cfg.synthesis_tier.model_id: cfg.synthesis_tier.max_input_tokens,
        }
        return MockProvider(budgets=budgets)
    if cfg.provider_mode == "replay":
        return ReplayProvider(cfg.replay_dir)
    return HttpProvider(endpoint=cfg.endpoint, api_key=cfg.resolved_api_key())


def _effective_config(cfg: RunConfig) -> RunConfig:
    # mock calls are free by definition; zero the rates so ledger totals
    # stay honest no matter what the config file says
    if cfg.provider_mode == "mock":
        cfg.analysis_tier = type(cfg.analysis_tier)(
            tier="analysis",
            model_id=cfg.analysis_tier.model_id,
            max_input_tokens=cfg.analysis_tier.max_input_tokens,
            cost_per_1k_input=0.0,
            cost_per_1k_output=0.0,
        )
        cfg.synthesis_tier = type(cfg.synthesis_tier)(
            tier="synthesis",
            model_id=cfg.synthesis_tier.model_id,
            max_input_tokens=cfg.synthesis_tier.max_input_tokens,
            cost_per_1k_input=0.0,
            cost_per_1k_output=0.0,
        )
    return cfg


def cmd_analyze(cfg: RunConfig) -> int:
    cfg = _effective_config(cfg)
    roster = load_roster(Path(cfg.roster_path).read_text(encoding="utf-8"))
    state_dir = resolve_state_dir(cfg.state_dir)
    store = Store(state_dir / "cache")
    ledger = CostLedger(state_dir / "ledger.jsonl")
    provider = build_provider(cfg)

    results = pipeline.run_analysis(cfg, roster, provider, store, ledger)
    failed = 0
    for result in results:
        if result.ok:
            print(f"[ok]   {result.team}: {len(result.artifacts)} artifacts")
            for warning in result.warnings:
                print(f"       warning: {warning}")
        else:
            failed += 1
            print(f"[fail] {result.team}: {result.error}")
    print(f"{len(results) - failed}/{len(results)} teams analyzed; ledger total ${ledger.total:.2f}")
    return 0 if failed == 0 else 1


def cmd_check(cfg: RunConfig) -> int:
    problems = 0
    roster = None
    try:
        roster = load_roster(Path(cfg.roster_path).read_text(encoding="utf-8"))
        print(f"[ok]   roster: {len(roster.students)} students")
    except ContribSumError as exc:
        problems += 1
        print(f"[fail] roster: {exc}")

    for name in ("system", "summarize_file", "describe_contribution", "synthesize", "repair"):
        try:
            chain.load_template(name)
        except OSError as exc:
            problems += 1
            print(f"[fail] prompt template {name}: {exc}")

    for team, path in cfg.repos:
        try:
            repo = ingest.open_repo(path, cfg.branch)
        except ContribSumError as exc:
            problems += 1
            print(f"[fail] {team}: {exc}")
            continue
        unmapped: list[str] = []
        if roster is not None:
            for raw in ingest.walk_history(repo):
                if resolve(roster, raw.author_name, raw.author_email) is None:
                    signature = f"{raw.author_name} <{raw.author_email}>"
                    if signature not in unmapped:
                        unmapped.append(signature)
        if unmapped:
            print(f"[warn] {team}: unmapped authors: {', '.join(unmapped)}")
        else:
            print(f"[ok]   {team}: branch {repo.default_branch} at {repo.head_ref[:10]}")

    if cfg.provider_mode == "live":
        import requests

        try:
            requests.get(cfg.endpoint, timeout=10)
            print(f"[ok]   provider endpoint reachable: {cfg.endpoint}")
        except requests.RequestException as exc:
            problems += 1
            print(f"[fail] provider endpoint unreachable: {exc}")

    print("ok" if problems == 0 else f"{problems} problem(s) found")
    return 0 if problems == 0 else 1


def cmd_cost(state_dir_arg: str | None) -> int:
    state_dir = resolve_state_dir(state_dir_arg)
    ledger = CostLedger(state_dir / "ledger.jsonl")
    print(ledger_report(ledger))
    return 0


def cmd_render(cfg: RunConfig) -> int:
    """Rebuild report.md from persisted state, without provider calls."""
    failed = 0
    for team, _path in cfg.repos:
        out_dir = Path(cfg.out_dir) / team / (cfg.window.label or "window")
        state_path = out_dir / STATE_NAME
        if not state_path.exists():
            print(f"[fail] {team}: no saved state at {state_path}; run analyze first")
            failed += 1
            continue
        state = json.loads(state_path.read_text(encoding="utf-8"))
        roster = load_roster(Path(cfg.roster_path).read_text(encoding="utf-8"))
        by_id = {s.id: s for s in roster.students}
        summaries = []
        for item in state["summaries"]:
            student = by_id.get(item["id"])
            if student is None:
                continue
            summary = chain.StudentSummary(
                student=student,
                headline=item["headline"],
                per_file_bullets=[tuple(b) for b in item["bullets"]],
                role=chain.RoleAssignment(role=item["role"][1], seniority=item["role"][0])
                if item.get("role")
                else None,
                validation=chain.ValidationReport(
                    status="flagged" if item["flags"] else "clean",
                    flags=tuple(tuple(f) for f in item["flags"]),
                ),
            )
            summaries.append(summary)
        team_summary = chain.TeamSummary(
            window=cfg.window,
            narrative=state["team_summary"]["narrative"],
            progress_bullets=tuple(state["team_summary"]["bullets"]),
        )
        meta = RunMeta(
            team=team,
            window=cfg.window,
            roles_enabled=state.get("roles_enabled", False),
            evidence={
                sid: {p: tuple(v) for p, v in paths.items()}
                for sid, paths in state["student_files"].items()
            },
        )
        document = render(summaries, team_summary, meta)
        (out_dir / "report.md").write_text(document.markdown, encoding="utf-8")
        print(f"[ok]   {team}: re-rendered {out_dir / 'report.md'}")
    return 0 if failed == 0 else 1


def _add_config_arguments(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", "-c", default="contribsum.ini", help="run configuration file")
    sub.add_argument("--week", type=int, help="window preset: week N of the configured sprint")
    sub.add_argument("--window-start", dest="window_start")
    sub.add_argument("--window-end", dest="window_end")
    sub.add_argument("--window-label", dest="window_label")
    sub.add_argument("--provider", choices=("mock", "replay", "live"))
    sub.add_argument("--roster")
    sub.add_argument("--out", dest="out_dir")
    sub.add_argument("--state", dest="state_dir")
    sub.add_argument("--jobs", type=int)
    sub.add_argument("--branch", help="analyze this branch instead of the default")
    sub.add_argument(
        "--roles", action="store_const", const="on", help="enable role classification"
    )
    sub.add_argument(
        "--no-coauthor-split",
        dest="coauthor_split",
        action="store_const",
        const="off",
        help="reproduce the legacy behavior that drops co-author credit",
    )
    sub.add_argument(
        "--include-branch",
        dest="include_branches_list",
        action="append",
        metavar="BRANCH",
        help="add a labeled supplementary section for an unmerged branch",
    )
    sub.add_argument("--exclude", dest="exclude_list", action="append", metavar="GLOB")


def _overrides_from(args: argparse.Namespace) -> dict:
    overrides = {
        "week": args.week,
        "window_start": args.window_start,
        "window_end": args.window_end,
        "window_label": args.window_label,
        "provider": args.provider,
        "roster": args.roster,
        "out_dir": args.out_dir,
        "state_dir": args.state_dir,
        "jobs": args.jobs,
        "branch": args.branch,
        "roles": args.roles,
        "coauthor_split": args.coauthor_split,
    }
    if args.include_branches_list:
        overrides["include_branches"] = ",".join(args.include_branches_list)
    if args.exclude_list:
        overrides["exclude_globs"] = ",".join(args.exclude_list)
    return overrides


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="contribsum",
        description="Summarize per-student code contributions in team git repositories.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("analyze", "run the full pipeline and write reports"),
        ("check", "validate configuration, repos, and identities without provider calls"),
        ("render", "re-render reports from cached state without provider calls"),
    ):
        sub = commands.add_parser(name, help=help_text)
        _add_config_arguments(sub)

    cost = commands.add_parser("cost", help="print the cost ledger")
    cost.add_argument("--state", dest="state_dir", default=None)

    args = parser.parse_args(argv)

    if args.command == "cost":
        return cmd_cost(args.state_dir)

    try:
        cfg = load_config(args.config, _overrides_from(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "analyze":
        return cmd_analyze(cfg)
    if args.command == "check":
        return cmd_check(cfg)
    if args.command == "render":
        return cmd_render(cfg)
    return 2


if __name__ == "__main__":
    sys.exit(main())
