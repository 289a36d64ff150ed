"""End-to-end synthetic evaluation over generated pools and assembled sets."""

from __future__ import annotations

import time
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .federated import (
    APPROACHES,
    DEFAULT_TIMEOUT,
    HEURISTIC_APPROACHES,
    Prepared,
    Reason,
    schedulability,
)
from .collapse import AnalysisTimeout
from .generator import Generated, SetSpec, TaskPool
from .metrics import ResultRow, task_metrics

POOL_FOR = {"B-NP": "baseline", "B-P": "baseline", "OT-A": "arbitrary", "OT-G": "benefit", "OT-L": "penalty"}


@dataclass
class _Context:
    pool: TaskPool
    approaches: tuple[str, ...]
    timeout: float
    record_timing: bool


_CTX: _Context | None = None


def _init(ctx: _Context) -> None:
    global _CTX
    _CTX = ctx


def _evaluate_set(spec: SetSpec) -> list[ResultRow]:
    ctx = _CTX
    pool = ctx.pool
    base = [pool.baseline[i] for i in spec.indices]
    classes = [t.utilization > 1 for t in base]
    rows = []
    for approach in ctx.approaches:
        name = POOL_FOR[approach]
        tasks = [pool.pool(name)[i] for i in spec.indices]
        collapse_secs = 0.0
        if name in pool.collapse_seconds and pool.collapse_seconds[name]:
            collapse_secs = sum(pool.collapse_seconds[name][i] for i in spec.indices)
        t0 = time.perf_counter()
        prepared = [Prepared(t, h) for t, h in zip(tasks, classes)]
        budget = ctx.timeout - collapse_secs
        try:
            if budget <= 0:
                raise AnalysisTimeout("collapse alone exceeded the budget")
            verdict = schedulability(prepared, spec.cores, approach, time.monotonic() + budget)
            schedulable, reason = verdict.schedulable, verdict.reason
            m_high = verdict.allocation.m_high if verdict.allocation else None
        except AnalysisTimeout:
            schedulable, reason, m_high = False, Reason.TIMEOUT, None
        elapsed = (time.perf_counter() - t0 + collapse_secs) * 1000
        delta_m = 0
        delta_C = delta_L = 0.0
        if name != "baseline":
            for pre, post, high in zip(base, tasks, classes):
                m = task_metrics(pre, post)
                delta_C += m.delta_C
                delta_L += m.delta_L
                if high and m.m_saved is not None:
                    delta_m += m.m_saved
        rows.append(
            ResultRow(
                spec.set_id, spec.cores, spec.target_U, approach, schedulable, reason.value,
                m_high, delta_m, delta_C, delta_L, round(elapsed, 3) if ctx.record_timing else None,
            )
        )
    # a timeout under any heuristic counts against all of them
    if any(r.reason == Reason.TIMEOUT.value for r in rows if r.approach in HEURISTIC_APPROACHES):
        for r in rows:
            if r.approach in HEURISTIC_APPROACHES:
                r.schedulable, r.reason = False, Reason.TIMEOUT.value
    return rows


def evaluate_sets(
    pool: TaskPool,
    sets: Sequence[SetSpec],
    approaches: Sequence[str] = tuple(APPROACHES),
    timeout: float = DEFAULT_TIMEOUT,
    jobs: int = 1,
    record_timing: bool = False,
) -> list[ResultRow]:
    for a in approaches:
        if a not in APPROACHES:
            raise ValueError(f"unknown approach {a!r}")
    ctx = _Context(pool, tuple(approaches), timeout, record_timing)
    if jobs > 1:
        with ProcessPoolExecutor(jobs, initializer=_init, initargs=(ctx,)) as ex:
            chunks = list(ex.map(_evaluate_set, sets, chunksize=16))
    else:
        _init(ctx)
        chunks = [_evaluate_set(s) for s in sets]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r.set_id, list(APPROACHES).index(r.approach)))
    return rows


def run(gen: Generated, timeout: float = DEFAULT_TIMEOUT, jobs: int = 1, record_timing: bool = False) -> list[ResultRow]:
    return evaluate_sets(gen.pool, gen.sets, tuple(APPROACHES), timeout, jobs, record_timing)
