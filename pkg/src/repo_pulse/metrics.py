"""Time-bucketed direct and derived process metrics.

All series share one :class:`IntervalGrid`: half-open buckets of a fixed
number of days, starting at UTC midnight of the first commit.  A commit
belongs to the bucket containing its ``effective_at``.  Issue series are
evaluated at each bucket's end instant.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import jsonio
from .errors import EmptyInput, InvalidConfig, InvalidCoverage, SchemaError
from .issue_extract import IssueRecord
from .vcs_extract import CommitRecord, author_key

METRICS_SCHEMA = "repo-pulse/metrics/1"
DAY_SECONDS = 86_400
DEFAULT_BUCKET_DAYS = 30
DEFAULT_COVERAGE = 0.5
# spoilage is reported on a grid of 2**-20 days (~0.08 s) so that shifting
# every age by a whole number of days shifts the value by exactly that much
SPOILAGE_RESOLUTION_BITS = 20

SERIES_NAMES = (
    "kloc",
    "dkloc",
    "developer_count",
    "issue_count_open",
    "issue_count_closed",
    "issue_density",
    "issue_spoilage",
    "productivity",
    "bus_factor",
)
DERIVED_SERIES = ("issue_density", "issue_spoilage", "productivity", "bus_factor")

Value = int | float | None


@dataclass(frozen=True)
class IntervalGrid:
    start: int
    bucket_width_days: int
    bucket_count: int

    @property
    def width(self) -> int:
        return self.bucket_width_days * DAY_SECONDS

    def bucket_start(self, k: int) -> int:
        return self.start + k * self.width

    def bucket_end(self, k: int) -> int:
        return self.start + (k + 1) * self.width

    @property
    def ends(self) -> list[int]:
        return [self.bucket_end(k) for k in range(self.bucket_count)]

    def bucket_of(self, t: int) -> int | None:
        k = (t - self.start) // self.width
        return k if 0 <= k < self.bucket_count else None


@dataclass(frozen=True)
class MetricSeries:
    name: str
    unit: str
    values: tuple[Value, ...]

    def to_json(self) -> dict:
        return {"unit": self.unit, "values": list(self.values)}


@dataclass(frozen=True)
class MetricsConfig:
    bucket_days: int = DEFAULT_BUCKET_DAYS
    coverage: float = DEFAULT_COVERAGE
    include_prs: bool = True
    per_developer: bool = False
    end: int | None = None


def _floor_day(t: int) -> int:
    return t - t % DAY_SECONDS


def build_grid(commits: Sequence[CommitRecord], width_days: int = DEFAULT_BUCKET_DAYS, end_override: int | None = None) -> IntervalGrid:
    if not commits:
        raise EmptyInput("no commits to build a time grid from")
    if int(width_days) != width_days or width_days < 1:
        raise InvalidConfig(f"bucket width must be a positive whole number of days, got {width_days!r}")
    start = _floor_day(min(c.effective_at for c in commits))
    end = max(c.effective_at for c in commits) if end_override is None else end_override
    if end < start:
        raise InvalidConfig(f"analysis end {end} precedes grid start {start}")
    width = int(width_days) * DAY_SECONDS
    return IntervalGrid(start=start, bucket_width_days=int(width_days), bucket_count=(end - start) // width + 1)


def _commits_by_bucket(commits: Sequence[CommitRecord], grid: IntervalGrid) -> list[list[CommitRecord]]:
    buckets: list[list[CommitRecord]] = [[] for _ in range(grid.bucket_count)]
    for c in commits:
        k = grid.bucket_of(c.effective_at)
        if k is not None:
            buckets[k].append(c)
    return buckets


def kloc_series(commits: Sequence[CommitRecord], grid: IntervalGrid) -> MetricSeries:
    """Size at the end of each bucket, carried forward over quiet buckets."""
    ordered = sorted(commits, key=lambda c: c.effective_at)
    values = []
    i = 0
    current = 0.0
    for end in grid.ends:
        while i < len(ordered) and ordered[i].effective_at < end:
            current = ordered[i].kloc
            i += 1
        values.append(current)
    return MetricSeries("kloc", "KLOC", tuple(values))


def _net_change(commits: Sequence[CommitRecord], grid: IntervalGrid) -> list[Fraction]:
    # exact sums; rounded once when a series value is produced
    return [sum((Fraction(c.dkloc) for c in bucket), Fraction(0)) for bucket in _commits_by_bucket(commits, grid)]


def dkloc_series(commits: Sequence[CommitRecord], grid: IntervalGrid) -> MetricSeries:
    """Net size change per bucket (sum of per-commit DKLOC)."""
    return MetricSeries("dkloc", "KLOC", tuple(float(v) for v in _net_change(commits, grid)))


def developer_count(commits: Sequence[CommitRecord], grid: IntervalGrid) -> MetricSeries:
    values = tuple(len({author_key(c) for c in bucket}) for bucket in _commits_by_bucket(commits, grid))
    return MetricSeries("developer_count", "developers", values)


def _select(issues: Sequence[IssueRecord] | None, include_prs: bool) -> list[IssueRecord]:
    return [i for i in issues or () if include_prs or not i.is_pull_request]


def _unresolved_at(issue: IssueRecord, t: int) -> bool:
    return issue.created_at <= t and (issue.closed_at is None or issue.closed_at > t)


def issue_counts(
    issues: Sequence[IssueRecord] | None, grid: IntervalGrid, include_prs: bool = True
) -> tuple[MetricSeries, MetricSeries]:
    selected = _select(issues, include_prs)
    opened, closed = [], []
    for end in grid.ends:
        opened.append(sum(1 for i in selected if _unresolved_at(i, end)))
        closed.append(sum(1 for i in selected if i.closed_at is not None and i.closed_at <= end))
    return (
        MetricSeries("issue_count_open", "issues", tuple(opened)),
        MetricSeries("issue_count_closed", "issues", tuple(closed)),
    )


def issue_density(
    issues: Sequence[IssueRecord] | None,
    kloc: MetricSeries,
    grid: IntervalGrid,
    include_prs: bool = True,
) -> MetricSeries:
    """Issues created so far per KLOC; undefined while the code base is empty."""
    selected = _select(issues, include_prs)
    values: list[Value] = []
    for end, size in zip(grid.ends, kloc.values):
        created = sum(1 for i in selected if i.created_at <= end)
        values.append(created / size if size else None)
    return MetricSeries("issue_density", "issues/KLOC", tuple(values))


def _mean_age_days(total_age_seconds: int, count: int) -> float:
    scale = 1 << SPOILAGE_RESOLUTION_BITS
    steps = round(Fraction(total_age_seconds * scale, count * DAY_SECONDS))
    return steps / scale


def issue_spoilage(issues: Sequence[IssueRecord] | None, grid: IntervalGrid, include_prs: bool = True) -> MetricSeries:
    """Mean age in days of the issues still unresolved at each bucket end.

    Ages carry uniform weight.  Buckets with nothing unresolved are null.
    """
    selected = _select(issues, include_prs)
    values: list[Value] = []
    for end in grid.ends:
        ages = [end - i.created_at for i in selected if _unresolved_at(i, end)]
        values.append(_mean_age_days(sum(ages), len(ages)) if ages else None)
    return MetricSeries("issue_spoilage", "days", tuple(values))


def productivity(commits: Sequence[CommitRecord], grid: IntervalGrid, per_developer: bool = False) -> MetricSeries:
    """Net KLOC added per bucket, optionally divided by that bucket's developers."""
    net = _net_change(commits, grid)
    if not per_developer:
        return MetricSeries("productivity", "KLOC/interval", tuple(float(v) for v in net))
    devs = developer_count(commits, grid).values
    values = tuple(float(n / d) if d else None for n, d in zip(net, devs))
    return MetricSeries("productivity", "KLOC/developer/interval", values)


def _check_coverage(coverage: float) -> Fraction:
    if isinstance(coverage, bool) or not isinstance(coverage, (int, float)) or not 0 < coverage <= 1:
        raise InvalidCoverage(f"coverage must lie in (0, 1], got {coverage!r}")
    return Fraction(coverage)


def core_contributors(counts: Counter[str], coverage: float = DEFAULT_COVERAGE) -> int:
    """Smallest number of top committers whose commits reach ``coverage`` of the total.

    Authors are ranked by commit count, ties broken by author key.
    """
    threshold = _check_coverage(coverage)
    total = sum(counts.values())
    if total == 0:
        return 0
    covered = 0
    for size, (_, n) in enumerate(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])), start=1):
        covered += n
        if covered >= threshold * total:
            return size
    return len(counts)


def bus_factor(commits: Sequence[CommitRecord], grid: IntervalGrid, coverage: float = DEFAULT_COVERAGE) -> MetricSeries:
    _check_coverage(coverage)
    values = tuple(
        core_contributors(Counter(author_key(c) for c in bucket), coverage)
        for bucket in _commits_by_bucket(commits, grid)
    )
    return MetricSeries("bus_factor", "developers", values)


def compute_all(
    commits: Sequence[CommitRecord],
    issues: Sequence[IssueRecord] | None,
    config: MetricsConfig = MetricsConfig(),
) -> tuple[IntervalGrid, dict[str, MetricSeries]]:
    """Every series on one grid, keyed in :data:`SERIES_NAMES` order."""
    _check_coverage(config.coverage)
    grid = build_grid(commits, config.bucket_days, config.end)
    kloc = kloc_series(commits, grid)
    opened, closed = issue_counts(issues, grid, config.include_prs)
    series = {
        "kloc": kloc,
        "dkloc": dkloc_series(commits, grid),
        "developer_count": developer_count(commits, grid),
        "issue_count_open": opened,
        "issue_count_closed": closed,
        "issue_density": issue_density(issues, kloc, grid, config.include_prs),
        "issue_spoilage": issue_spoilage(issues, grid, config.include_prs),
        "productivity": productivity(commits, grid, config.per_developer),
        "bus_factor": bus_factor(commits, grid, config.coverage),
    }
    return grid, {name: series[name] for name in SERIES_NAMES}


def metrics_document(grid: IntervalGrid, series: dict[str, MetricSeries]) -> dict:
    return {
        "schema": METRICS_SCHEMA,
        "bucket_width_days": grid.bucket_width_days,
        "start": grid.start,
        "series": {name: s.to_json() for name, s in series.items()},
    }


def write_metrics(path, grid: IntervalGrid, series: dict[str, MetricSeries]) -> Path:
    return jsonio.write_json(path, metrics_document(grid, series))


def read_metrics(path) -> tuple[IntervalGrid, dict[str, MetricSeries]]:
    doc = jsonio.read_json(path, METRICS_SCHEMA, producer="metrics")
    series = {
        name: MetricSeries(name, body["unit"], tuple(body["values"])) for name, body in doc["series"].items()
    }
    counts = {len(s.values) for s in series.values()}
    if len(counts) > 1:
        raise SchemaError(f"{path}: series lengths differ: {sorted(counts)}")
    grid = IntervalGrid(
        start=int(doc["start"]),
        bucket_width_days=int(doc["bucket_width_days"]),
        bucket_count=counts.pop() if counts else 0,
    )
    return grid, series
