"""Command line entry point: one subcommand per pipeline stage, plus ``run``.

Stages hand data to each other only through the JSON files in the output
directory, so any stage can be rerun or replaced on its own::

    repo-pulse extract-commits --repo . --out out/
    repo-pulse extract-issues --owner-repo acme/widget --out out/
    repo-pulse metrics --out out/
    repo-pulse render --out out/
    repo-pulse run --repo . --owner-repo acme/widget --out out/

Progress is reported on stderr as one JSON object per line.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import httpx

from . import __version__
from .errors import RepoPulseError
from .issue_extract import (
    DEFAULT_API_URL,
    IssueClient,
    normalize_pages,
    parse_timestamp,
    read_issues,
    split_owner_repo,
    token_from_env,
    write_issues,
)
from .loc_counter import DEFAULT_EXCLUDE, DEFAULT_INCLUDE, DEFAULT_MAX_FILE_BYTES, FileFilter
from .metrics import DEFAULT_BUCKET_DAYS, DEFAULT_COVERAGE, MetricsConfig, compute_all, write_metrics
from .render import render_all
from .vcs_extract import measure_chain, read_commits, resolve_branch, walk_commits, write_commits

logger = logging.getLogger("repo_pulse")

COMMITS_FILE = "commits.json"
ISSUES_FILE = "issues.json"
METRICS_FILE = "metrics.json"
CHARTS_DIR = "charts"


@dataclass
class RunConfig:
    out_dir: Path
    repo_path: Path | None = None
    branch: str | None = None
    owner_repo: str | None = None
    bucket_days: int = DEFAULT_BUCKET_DAYS
    coverage: float = DEFAULT_COVERAGE
    include_prs: bool = True
    per_developer: bool = False
    end: int | None = None
    cache_dir: Path | None = None
    refresh: bool = False
    api_url: str = DEFAULT_API_URL
    style: Path | None = None
    include: tuple[str, ...] = DEFAULT_INCLUDE
    exclude: tuple[str, ...] = DEFAULT_EXCLUDE
    max_file_bytes: int = DEFAULT_MAX_FILE_BYTES
    # test hook: replaces the HTTP transport of the issue client
    transport: httpx.BaseTransport | None = field(default=None, repr=False)

    @property
    def cache(self) -> Path:
        return self.cache_dir if self.cache_dir is not None else self.out_dir / "cache"


def progress(event: str, **fields) -> None:
    print(json.dumps({"event": event, **fields}, sort_keys=True), file=sys.stderr, flush=True)


def cmd_extract_commits(cfg: RunConfig) -> list[Path]:
    repo = cfg.repo_path.resolve()
    branch = resolve_branch(repo, cfg.branch)
    chain = walk_commits(repo, branch)
    progress("commits_walked", count=len(chain), branch=branch)
    records = measure_chain(chain, repo, FileFilter(cfg.include, cfg.exclude, cfg.max_file_bytes))
    return [write_commits(cfg.out_dir / COMMITS_FILE, str(repo), branch, records)]


def cmd_extract_issues(cfg: RunConfig) -> list[Path]:
    owner, name = split_owner_repo(cfg.owner_repo)
    with IssueClient(
        token_from_env(),
        cfg.cache,
        base_url=cfg.api_url,
        refresh=cfg.refresh,
        transport=cfg.transport,
    ) as client:
        pages = client.fetch_issues(owner, name)
        progress("issue_pages_fetched", pages=len(pages), requests=client.requests_made)
    records = normalize_pages(pages)
    return [write_issues(cfg.out_dir / ISSUES_FILE, cfg.owner_repo, records)]


def cmd_metrics(cfg: RunConfig) -> list[Path]:
    _, commits = read_commits(cfg.out_dir / COMMITS_FILE)
    issues_path = cfg.out_dir / ISSUES_FILE
    issues = read_issues(issues_path)[1] if issues_path.is_file() else None
    if issues is None:
        logger.info("%s not found; issue series will be empty", issues_path)
    config = MetricsConfig(
        bucket_days=cfg.bucket_days,
        coverage=cfg.coverage,
        include_prs=cfg.include_prs,
        per_developer=cfg.per_developer,
        end=cfg.end,
    )
    grid, series = compute_all(commits, issues, config)
    return [write_metrics(cfg.out_dir / METRICS_FILE, grid, series)]


def cmd_render(cfg: RunConfig) -> list[Path]:
    return render_all(cfg.out_dir / METRICS_FILE, cfg.style, cfg.out_dir / CHARTS_DIR)


def cmd_run(cfg: RunConfig) -> list[Path]:
    stages: list[tuple[str, Callable[[RunConfig], list[Path]]]] = [("extract-commits", cmd_extract_commits)]
    if cfg.owner_repo is not None:
        stages.append(("extract-issues", cmd_extract_issues))
    stages += [("metrics", cmd_metrics), ("render", cmd_render)]
    written = []
    for name, stage in stages:
        written += _run_stage(name, stage, cfg)
    return written


def _run_stage(name: str, stage: Callable[[RunConfig], list[Path]], cfg: RunConfig) -> list[Path]:
    progress("stage_start", stage=name)
    started = time.monotonic()
    written = stage(cfg)
    progress(
        "stage_done",
        stage=name,
        outputs=[str(p) for p in written],
        seconds=round(time.monotonic() - started, 3),
    )
    return written


COMMANDS = {
    "extract-commits": cmd_extract_commits,
    "extract-issues": cmd_extract_issues,
    "metrics": cmd_metrics,
    "render": cmd_render,
}


def _bucket_days(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a whole number of days >= 1")
    return value


def _coverage(text: str) -> float:
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1]")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _owner_repo(text: str) -> str:
    try:
        split_owner_repo(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _timestamp(text: str) -> int:
    if text.isdigit():
        return int(text)
    try:
        return parse_timestamp(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected epoch seconds or an ISO 8601 date/time") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repo-pulse", description="Longitudinal process metrics for a repository.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=Path("repo-pulse-out"), help="directory for all stage files")
    common.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")

    vcs = argparse.ArgumentParser(add_help=False)
    vcs.add_argument("--repo", type=Path, help="local git repository (working copy or bare mirror)")
    vcs.add_argument("--branch", help="branch to analyse (default: the repository's HEAD branch)")
    vcs.add_argument("--include", action="append", metavar="GLOB", help="files to count (repeatable; default **/*)")
    vcs.add_argument("--exclude", action="append", metavar="GLOB", help="extra files to skip (repeatable)")
    vcs.add_argument("--max-file-bytes", type=_positive_int, default=DEFAULT_MAX_FILE_BYTES)

    issues = argparse.ArgumentParser(add_help=False)
    issues.add_argument("--owner-repo", type=_owner_repo, help="issue tracker project as owner/name")
    issues.add_argument("--cache", type=Path, help="page cache directory (default: OUT/cache)")
    issues.add_argument("--refresh", action="store_true", help="refetch pages even when cached")
    issues.add_argument("--api-url", default=DEFAULT_API_URL, help="REST API root (default: %(default)s)")

    metrics = argparse.ArgumentParser(add_help=False)
    metrics.add_argument("--bucket-days", type=_bucket_days, default=DEFAULT_BUCKET_DAYS)
    metrics.add_argument("--coverage", type=_coverage, default=DEFAULT_COVERAGE, help="bus factor share")
    metrics.add_argument("--exclude-prs", action="store_true", help="leave pull requests out of issue metrics")
    metrics.add_argument("--per-developer", action="store_true", help="divide productivity by developer count")
    metrics.add_argument("--end", type=_timestamp, help="analysis end (default: last commit)")

    render = argparse.ArgumentParser(add_help=False)
    render.add_argument("--style", type=Path, help="JSON file of chart style fields")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("extract-commits", parents=[common, vcs], help="walk history, write commits.json")
    sub.add_parser("extract-issues", parents=[common, issues], help="fetch issues, write issues.json")
    sub.add_parser("metrics", parents=[common, metrics], help="compute series, write metrics.json")
    sub.add_parser("render", parents=[common, render], help="draw one SVG chart per series")
    sub.add_parser("run", parents=[common, vcs, issues, metrics, render], help="all stages in order")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    opts = vars(args)
    return RunConfig(
        out_dir=args.out,
        repo_path=opts.get("repo"),
        branch=opts.get("branch"),
        owner_repo=opts.get("owner_repo"),
        bucket_days=opts.get("bucket_days", DEFAULT_BUCKET_DAYS),
        coverage=opts.get("coverage", DEFAULT_COVERAGE),
        include_prs=not opts.get("exclude_prs", False),
        per_developer=opts.get("per_developer", False),
        end=opts.get("end"),
        cache_dir=opts.get("cache"),
        refresh=opts.get("refresh", False),
        api_url=opts.get("api_url", DEFAULT_API_URL),
        style=opts.get("style"),
        include=tuple(opts.get("include") or DEFAULT_INCLUDE),
        exclude=DEFAULT_EXCLUDE + tuple(opts.get("exclude") or ()),
        max_file_bytes=opts.get("max_file_bytes", DEFAULT_MAX_FILE_BYTES),
    )


def main(argv: Sequence[str] | None = None, *, transport: httpx.BaseTransport | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("extract-commits", "run") and args.repo is None:
        parser.error(f"{args.command} requires --repo")
    if args.command == "extract-issues" and args.owner_repo is None:
        parser.error("extract-issues requires --owner-repo")

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    cfg = config_from_args(args)
    cfg.transport = transport
    try:
        if args.command == "run":
            written = cmd_run(cfg)
        else:
            written = _run_stage(args.command, COMMANDS[args.command], cfg)
    except RepoPulseError as exc:
        progress("error", stage=args.command, error=type(exc).__name__, message=str(exc), exit_code=exc.exit_code)
        return exc.exit_code
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
