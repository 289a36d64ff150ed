"""Evaluation metrics: cores saved, workload and critical-path deltas, summaries."""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, fields

from .federated import allocate_cores
from .taskgraph import Task, critical_path, workload


@dataclass(frozen=True)
class TaskMetrics:
    m_saved: int | None
    delta_C: float
    delta_L: float


def task_metrics(pre: Task, post: Task) -> TaskMetrics:
    """Cores saved (integer allocations), workload reduction, critical-path extension.

    ``m_saved`` is None when either allocation is infeasible.
    """
    m_pre, m_post = allocate_cores(pre), allocate_cores(post)
    saved = None if m_pre is None or m_post is None else m_pre - m_post
    return TaskMetrics(
        saved,
        workload(pre.graph) - workload(post.graph),
        critical_path(post.graph)[1] - critical_path(pre.graph)[1],
    )


@dataclass
class ResultRow:
    set_id: int
    cores: int
    target_U: float
    approach: str
    schedulable: bool
    reason: str
    m_high: int | None
    delta_m: int
    delta_C: float
    delta_L: float
    elapsed_ms: float | None = None


RESULT_COLUMNS = [f.name for f in fields(ResultRow)]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def results_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(v) for v in asdict(row).values()])
    return buf.getvalue()


def read_results_csv(text: str) -> list[ResultRow]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append(
            ResultRow(
                int(rec["set_id"]),
                int(rec["cores"]),
                float(rec["target_U"]),
                rec["approach"],
                rec["schedulable"] == "1",
                rec["reason"],
                int(rec["m_high"]) if rec["m_high"] else None,
                int(rec["delta_m"]),
                float(rec["delta_C"]),
                float(rec["delta_L"]),
                float(rec["elapsed_ms"]) if rec["elapsed_ms"] else None,
            )
        )
    return rows


@dataclass(frozen=True)
class PointSummary:
    util_bucket: tuple[float, float]
    approach: str
    sched_ratio: float
    mean_cores: float | None
    mean_delta_m: float
    mean_delta_C: float
    mean_delta_L: float
    n: int


def buckets_of_width(width: float, upper: float) -> list[tuple[float, float]]:
    count = max(1, math.ceil(upper / width))
    return [(k * width, (k + 1) * width) for k in range(count)]


def aggregate(rows: Iterable[ResultRow], buckets: Sequence[tuple[float, float]]) -> list[PointSummary]:
    """Group by (bucket of target utilization, approach); empty groups are omitted.

    Output order is by bucket then approach name, so the result does not depend
    on the order of ``rows``.
    """
    groups: dict[tuple[tuple[float, float], str], list[ResultRow]] = {}
    for row in rows:
        for lo, hi in buckets:
            if lo <= row.target_U < hi:
                groups.setdefault(((lo, hi), row.approach), []).append(row)
                break
    out = []
    for (bucket, approach) in sorted(groups):
        rs = groups[bucket, approach]
        n = len(rs)
        cores = [r.m_high for r in rs if r.m_high is not None]
        out.append(
            PointSummary(
                bucket,
                approach,
                sum(r.schedulable for r in rs) / n,
                math.fsum(cores) / len(cores) if cores else None,
                math.fsum(r.delta_m for r in rs) / n,
                math.fsum(r.delta_C for r in rs) / n,
                math.fsum(r.delta_L for r in rs) / n,
                n,
            )
        )
    return out


SUMMARY_COLUMNS = [
    "bucket_lo", "bucket_hi", "approach", "sched_ratio", "mean_cores",
    "mean_delta_m", "mean_delta_C", "mean_delta_L", "n",
]


def summary_csv(points: Iterable[PointSummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for p in points:
        writer.writerow(
            [_fmt(float(p.util_bucket[0])), _fmt(float(p.util_bucket[1])), p.approach,
             _fmt(p.sched_ratio), _fmt(p.mean_cores), _fmt(p.mean_delta_m),
             _fmt(p.mean_delta_C), _fmt(p.mean_delta_L), p.n]
        )
    return buf.getvalue()


@dataclass(frozen=True)
class PoolSavings:
    """Pool-wide effect of one collapse ordering relative to the baseline."""

    ordering: str
    high_tasks: int
    cores_before: int
    cores_after: int
    workload_reduction_high: float
    workload_reduction_all: float
    mean_delta_L_high: float

    @property
    def core_reduction(self) -> float | None:
        if not self.cores_before:
            return None
        return (self.cores_before - self.cores_after) / self.cores_before


def pool_savings(ordering: str, baseline: Sequence[Task], collapsed: Sequence[Task]) -> PoolSavings:
    """Core and workload savings over high-utilization tasks with feasible allocations.

    Workload reduction is the mean of per-task ``delta_C / C``, reported for
    high-utilization tasks and for all tasks.
    """
    before = after = n_high = 0
    red_high, red_all, dl_high = [], [], []
    for pre, post in zip(baseline, collapsed):
        m = task_metrics(pre, post)
        C = workload(pre.graph)
        red_all.append(m.delta_C / C if C else 0.0)
        if pre.utilization > 1:
            red_high.append(m.delta_C / C if C else 0.0)
            dl_high.append(m.delta_L)
            if m.m_saved is not None:
                n_high += 1
                m_pre = allocate_cores(pre)
                before += m_pre
                after += m_pre - m.m_saved
    mean = lambda xs: math.fsum(xs) / len(xs) if xs else 0.0  # noqa: E731
    return PoolSavings(ordering, n_high, before, after, mean(red_high), mean(red_all), mean(dl_high))
