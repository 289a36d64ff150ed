"""Federated scheduling analysis of DAG and DAG-OT task sets.

High-utilization tasks (u > 1) get dedicated cores. The rest run
sequentially, partitioned Worst-Fit onto the remaining cores, and each core
is checked with a uniprocessor EDF test: non-preemptive for every approach
except the preemptive baseline ``B-P``.
"""

from __future__ import annotations

import enum
import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .collapse import AnalysisTimeout, dagot_reduce, serialize_low_util
from .taskgraph import Task, critical_path, workload

DEFAULT_TIMEOUT = 600.0

APPROACHES: dict[str, tuple[str | None, bool]] = {
    # name: (collapse ordering, preemptive low-util EDF)
    "B-NP": (None, False),
    "B-P": (None, True),
    "OT-A": ("arbitrary", False),
    "OT-G": ("benefit", False),
    "OT-L": ("penalty", False),
}
HEURISTIC_APPROACHES = ("OT-A", "OT-G", "OT-L")


class Reason(str, enum.Enum):
    OK = "ok"
    CRITICAL_PATH = "critical_path_exceeds_deadline"
    INSUFFICIENT_CORES = "insufficient_cores"
    PARTITION_FAILURE = "partition_failure"
    TIMEOUT = "timeout"


class ContractError(ValueError):
    pass


@dataclass(frozen=True)
class TaskSet:
    tasks: tuple[Task, ...]
    cores: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not self.tasks:
            raise ValueError("task set must be nonempty")
        if self.cores < 1:
            raise ValueError(f"system needs at least one core, got {self.cores}")

    @property
    def utilization(self) -> float:
        return sum(t.utilization for t in self.tasks)


@dataclass(frozen=True)
class SeqTask:
    """A serialized task as seen by a uniprocessor test."""

    wcet: float
    period: float
    index: int = 0

    @property
    def utilization(self) -> float:
        return self.wcet / self.period


@dataclass
class Allocation:
    high: dict[int, int]
    m_high: int
    m_low: int
    partitions: list[list[int]] = field(default_factory=list)


@dataclass
class Verdict:
    approach: str
    schedulable: bool
    reason: Reason
    allocation: Allocation | None = None
    per_task: list[dict[str, Any]] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        alloc = self.allocation
        return {
            "approach": self.approach,
            "schedulable": self.schedulable,
            "reason": self.reason.value,
            "m_high": alloc.m_high if alloc else None,
            "m_low": alloc.m_low if alloc else None,
            "per_task": self.per_task,
        }


def classify(tasks: TaskSet | Sequence[Task]) -> tuple[list[Task], list[Task]]:
    tasks = tasks.tasks if isinstance(tasks, TaskSet) else tasks
    high = [t for t in tasks if t.utilization > 1]
    low = [t for t in tasks if not t.utilization > 1]
    return high, low


def cores_needed(C: float, L: float, D: float) -> int | None:
    """``ceil((C - L) / (D - L))`` with a floor of one; None when no core count suffices."""
    if L > D or (L == D and C > L):
        return None
    if L == D:
        return 1
    # exact rational ceiling of the given floats
    m = math.ceil((Fraction(C) - Fraction(L)) / (Fraction(D) - Fraction(L)))
    return max(1, m)


def allocate_cores(task: Task) -> int | None:
    return cores_needed(workload(task.graph), critical_path(task.graph)[1], task.deadline)


def edf_p_test(tasks: Sequence[SeqTask]) -> bool:
    """Preemptive EDF with implicit deadlines: exact iff total utilization <= 1."""
    return sum((Fraction(t.wcet) / Fraction(t.period) for t in tasks), Fraction(0)) <= 1


def to_integer_time(task: SeqTask) -> SeqTask:
    """Pessimistic integer rounding: WCET up, period down."""
    return SeqTask(math.ceil(task.wcet), math.floor(task.period), task.index)


def edf_np_test(tasks: Sequence[SeqTask]) -> bool:
    """Non-preemptive EDF test for sporadic tasks on integer time.

    Accepts iff utilization is at most one and, with tasks sorted by period,
    every task ``i`` can absorb the blocking of one job of ``i`` in any window
    ``T_1 < L < T_i``::

        L >= C_i + sum_{j < i} floor((L - 1) / T_j) * C_j

    The right side only steps up at ``L = k * T_j + 1``, so those points and
    ``L = T_1 + 1`` are the only windows checked.
    """
    for t in tasks:
        if t.wcet != int(t.wcet) or t.period != int(t.period):
            raise ContractError("non-preemptive EDF test requires integer WCETs and periods")
        if t.period <= 0 or t.wcet < 0:
            raise ContractError("periods must be positive and WCETs nonnegative")
    if not edf_p_test(tasks):
        return False
    ts = sorted(((int(t.wcet), int(t.period)) for t in tasks), key=lambda ct: ct[1])
    if len(ts) < 2:
        return True
    T1 = ts[0][1]
    for i in range(1, len(ts)):
        Ci, Ti = ts[i]
        if Ti - T1 < 2:
            continue
        points = {T1 + 1}
        for _, Tj in ts[:i]:
            k = T1 // Tj + 1
            while k * Tj + 1 < Ti:
                points.add(k * Tj + 1)
                k += 1
        prefix = ts[:i]
        for L in sorted(points):
            if L <= T1 or L >= Ti:
                continue
            demand = Ci + sum(((L - 1) // Tj) * Cj for Cj, Tj in prefix)
            if demand > L:
                return False
    return True


def worst_fit_partition(
    low: Sequence[SeqTask],
    m_low: int,
    test: Callable[[Sequence[SeqTask]], bool],
    expires_at: float | None = None,
) -> list[list[SeqTask]] | None:
    """Assign tasks, heaviest first, to the least-utilized core that still passes ``test``."""
    if not low:
        return [[] for _ in range(max(m_low, 0))]
    if m_low <= 0:
        return None
    cores: list[list[SeqTask]] = [[] for _ in range(m_low)]
    load = [Fraction(0)] * m_low
    for task in sorted(low, key=lambda t: (-Fraction(t.wcet) / Fraction(t.period), t.index)):
        if expires_at is not None and time.monotonic() > expires_at:
            raise AnalysisTimeout("partitioning exceeded its time budget")
        best = None
        for k in sorted(range(m_low), key=lambda k: (load[k], k)):
            if test(cores[k] + [task]):
                best = k
                break
        if best is None:
            return None
        cores[best].append(task)
        load[best] += Fraction(task.wcet) / Fraction(task.period)
    return cores


@dataclass(frozen=True)
class Prepared:
    """A task ready for allocation: possibly collapsed, with its class fixed."""

    task: Task
    high: bool
    collapsed_pairs: tuple[tuple[int, int], ...] = ()


def derive_seed(seed: int | str, *parts: object) -> str:
    return ":".join(str(p) for p in (seed, *parts))


def prepare(
    tasks: Sequence[Task],
    approach: str,
    seed: int | str = 0,
    expires_at: float | None = None,
) -> list[Prepared]:
    """Classify on the uncollapsed model, then collapse with the approach's ordering."""
    ordering, _ = APPROACHES[approach]
    out = []
    for i, task in enumerate(tasks):
        high = task.utilization > 1
        if ordering is None:
            out.append(Prepared(task, high))
            continue
        task_seed = derive_seed(seed, "collapse", i)
        if high:
            red = dagot_reduce(task.graph, task.deadline, ordering, task_seed, expires_at)
            collapsed = Task(task.period, red.graph, task.name)
        else:
            ser = serialize_low_util(task, ordering, task_seed, expires_at)
            red, collapsed = ser.reduction, ser.task
        out.append(Prepared(collapsed, high, tuple(red.collapsed_pairs)))
    return out


def schedulability(
    prepared: Sequence[Prepared],
    cores: int,
    approach: str,
    expires_at: float | None = None,
) -> Verdict:
    _, preemptive = APPROACHES[approach]
    per_task: list[dict[str, Any]] = []
    high_alloc: dict[int, int] = {}
    infeasible = False
    low_jobs: list[SeqTask] = []
    for i, p in enumerate(prepared):
        entry: dict[str, Any] = {"id": p.task.name or str(i), "m_i": None, "collapsed_pairs": [list(x) for x in p.collapsed_pairs]}
        if p.high:
            m_i = allocate_cores(p.task)
            entry["m_i"] = m_i
            if m_i is None:
                infeasible = True
            else:
                high_alloc[i] = m_i
        else:
            low_jobs.append(SeqTask(workload(p.task.graph), p.task.period, i))
        per_task.append(entry)
    m_high = sum(high_alloc.values())
    allocation = Allocation(high_alloc, m_high, cores - m_high)
    if infeasible:
        return Verdict(approach, False, Reason.CRITICAL_PATH, allocation, per_task)
    if m_high > cores:
        return Verdict(approach, False, Reason.INSUFFICIENT_CORES, allocation, per_task)
    if preemptive:
        test, jobs = edf_p_test, low_jobs
    else:
        test, jobs = edf_np_test, [to_integer_time(j) for j in low_jobs]
    if any(j.wcet > j.period for j in jobs):
        return Verdict(approach, False, Reason.PARTITION_FAILURE, allocation, per_task)
    parts = worst_fit_partition(jobs, allocation.m_low, test, expires_at)
    if parts is None:
        return Verdict(approach, False, Reason.PARTITION_FAILURE, allocation, per_task)
    allocation.partitions = [[j.index for j in core] for core in parts]
    return Verdict(approach, True, Reason.OK, allocation, per_task)


def analyze(
    taskset: TaskSet,
    approach: str,
    seed: int | str = 0,
    timeout: float | None = DEFAULT_TIMEOUT,
) -> Verdict:
    """Federated schedulability of ``taskset`` under one of :data:`APPROACHES`."""
    if approach not in APPROACHES:
        raise ValueError(f"unknown approach {approach!r}; expected one of {sorted(APPROACHES)}")
    expires_at = None if timeout is None else time.monotonic() + timeout
    try:
        prepared = prepare(taskset.tasks, approach, seed, expires_at)
        return schedulability(prepared, taskset.cores, approach, expires_at)
    except AnalysisTimeout:
        return Verdict(approach, False, Reason.TIMEOUT)
