"""Node collapse for DAG-OT tasks.

Two nodes running the same executable object may be collapsed into one node
that runs both sets of threads on one core. Collapsing lowers the workload
(WCETO functions are concave) but can lengthen the critical path or close a
cycle, so :func:`dagot_reduce` only applies collapses that keep the graph
acyclic, keep a feasible critical path feasible, and do not worsen the
real-valued core allocation.
"""

from __future__ import annotations

import math
import random
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field

from .taskgraph import Node, StructureError, Task, TaskGraph
from .wceto import WcetoRangeError

ORDERINGS = ("arbitrary", "benefit", "penalty")


class CollapseError(ValueError):
    """Requested collapse of nodes that are not candidates."""


class OracleLimitError(RuntimeError):
    """Exhaustive search refused: too many candidate pairs."""


class AnalysisTimeout(RuntimeError):
    """Wall-clock budget exhausted."""


@dataclass(frozen=True)
class CandidatePair:
    a: int
    b: int
    delta: float = 0.0
    penalty: float | None = None

    @property
    def key(self) -> tuple[int, int]:
        return (self.a, self.b)


class UnionFind:
    """Disjoint sets over node ids; the representative of a merged set is fixed by the caller."""

    def __init__(self, items: Iterable[int] = ()) -> None:
        self._parent: dict[int, int] = {x: x for x in items}

    def find(self, x: int) -> int:
        parent = self._parent
        parent.setdefault(x, x)
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, keep: int, absorb: int) -> int:
        """Merge the set of ``absorb`` into the set of ``keep``; returns the representative."""
        rk, ra = self.find(keep), self.find(absorb)
        if rk != ra:
            self._parent[ra] = rk
        return rk

    def groups(self) -> dict[int, list[int]]:
        """``{representative: [absorbed ids...]}`` for every nontrivial set."""
        out: dict[int, list[int]] = {}
        for x in sorted(self._parent):
            r = self.find(x)
            if r != x:
                out.setdefault(r, []).append(x)
        return out


@dataclass
class CollapsePlan:
    ordered: list[CandidatePair]
    merges: UnionFind = field(default_factory=UnionFind)
    applied: list[tuple[int, int]] = field(default_factory=list)

    def history(self) -> dict[int, list[int]]:
        return self.merges.groups()


@dataclass(frozen=True)
class Reduction:
    graph: TaskGraph
    plan: CollapsePlan
    m_before: float
    m_after: float

    @property
    def merges(self) -> dict[int, list[int]]:
        return self.plan.history()

    @property
    def collapsed_pairs(self) -> list[tuple[int, int]]:
        return list(self.plan.applied)


def real_core_allocation(C: float, L: float, D: float) -> float:
    """Unrounded federated core demand ``(C - L) / (D - L)``.

    ``L == D`` divides by zero: a chain exactly filling its deadline needs one
    core, anything with parallel work needs infinitely many.
    """
    if L == D:
        return math.inf if C > L else 1.0
    return (C - L) / (D - L)


def improves(m: float, m_hat: float) -> bool:
    if m > 0:
        return 0 < m_hat <= m
    return m_hat >= m


def _collapsible(graph: TaskGraph, v: int) -> bool:
    return graph.wceto(v).collapsible


def candidates(graph: TaskGraph) -> list[CandidatePair]:
    """All same-object node pairs ``(a, b)`` with ``a < b``, with their workload saving."""
    by_object: dict[str, list[int]] = {}
    for v, node in graph.nodes.items():
        if _collapsible(graph, v):
            by_object.setdefault(node.object, []).append(v)
    pairs = []
    for members in by_object.values():
        for i, a in enumerate(members):
            for b in members[i + 1 :]:
                pairs.append(CandidatePair(a, b, _delta(graph, a, b)))
    pairs.sort(key=lambda p: p.key)
    return pairs


def _delta(graph: TaskGraph, u: int, v: int) -> float:
    fn = graph.wceto(u)
    try:
        merged = fn(graph.nodes[u].threads + graph.nodes[v].threads)
    except WcetoRangeError:
        return -math.inf
    return graph.cost(u) + graph.cost(v) - merged


def collapse(graph: TaskGraph, u: int, v: int) -> TaskGraph:
    """Merge ``v`` into ``u``: the result keeps id ``u`` with the summed threads.

    Edges between ``u`` and ``v`` disappear; every other edge of either node is
    rewired to the merged node. The result may contain a cycle.
    """
    if u == v or u not in graph.nodes or v not in graph.nodes:
        raise CollapseError(f"cannot collapse {u} and {v}")
    nu, nv = graph.nodes[u], graph.nodes[v]
    if nu.object != nv.object:
        raise CollapseError(f"nodes {u} and {v} run different objects")
    if not _collapsible(graph, u):
        raise CollapseError(f"object {nu.object!r} is not collapsible")
    nodes = {w: n for w, n in graph.nodes.items() if w != v}
    nodes[u] = Node(nu.object, nu.threads + nv.threads)
    edges = set()
    for a, b in graph.edges:
        a = u if a == v else a
        b = u if b == v else b
        if a != b:
            edges.add((a, b))
    return TaskGraph(nodes, edges, graph.objects)


class _Workspace:
    """Mutable copy of a graph supporting cheap trial collapses.

    Keeps longest head/tail path lengths and reachability bitsets for the
    current graph, so a trial costs O(degree) plus, at worst, one pass over
    the graph for the longest path avoiding both collapsed nodes.
    """

    def __init__(self, graph: TaskGraph) -> None:
        self.objects = graph.objects
        self.obj = {v: n.object for v, n in graph.nodes.items()}
        self.threads = {v: n.threads for v, n in graph.nodes.items()}
        self.cost = {v: graph.cost(v) for v in graph.nodes}
        self.succ = {v: set(graph.succ(v)) for v in graph.nodes}
        self.pred = {v: set(graph.pred(v)) for v in graph.nodes}
        self.bit = {v: 1 << i for i, v in enumerate(graph.nodes)}
        self._refresh()

    def _refresh(self) -> None:
        indeg = {v: len(p) for v, p in self.pred.items()}
        ready = sorted((v for v, d in indeg.items() if d == 0), reverse=True)
        order = []
        while ready:
            v = ready.pop()
            order.append(v)
            for w in sorted(self.succ[v], reverse=True):
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
        if len(order) != len(self.cost):
            raise StructureError("graph contains a cycle")
        self.order = order
        cost, pred, succ = self.cost, self.pred, self.succ
        head: dict[int, float] = {}
        for v in order:
            head[v] = max((head[p] for p in pred[v]), default=0) + cost[v]
        tail: dict[int, float] = {}
        reach: dict[int, int] = {}
        for v in reversed(order):
            tail[v] = max((tail[w] for w in succ[v]), default=0) + cost[v]
            r = 0
            for w in succ[v]:
                r |= self.bit[w] | reach[w]
            reach[v] = r
        self.head, self.tail, self.reach = head, tail, reach
        self.L = max(head.values(), default=0)
        self.C = sum(cost.values())

    def merged_cost(self, u: int, v: int) -> float:
        return self.objects[self.obj[u]](self.threads[u] + self.threads[v])

    def creates_cycle(self, u: int, v: int) -> bool:
        """A path of two or more edges between ``u`` and ``v`` becomes a cycle."""
        reach, bit = self.reach, self.bit
        bu, bv = bit[u], bit[v]
        return any(reach[w] & bv for w in self.succ[u] if w != v) or any(
            reach[w] & bu for w in self.succ[v] if w != u
        )

    def _longest_avoiding(self, u: int, v: int) -> float:
        cost, pred = self.cost, self.pred
        head: dict[int, float] = {}
        best = 0
        for w in self.order:
            if w == u or w == v:
                continue
            h = max((head[p] for p in pred[w] if p in head), default=0) + cost[w]
            head[w] = h
            if h > best:
                best = h
        return best

    def trial(self, u: int, v: int) -> tuple[float, float] | None:
        """Workload and critical path after ``u`` ⋈ ``v``; None if it closes a cycle."""
        if self.creates_cycle(u, v):
            return None
        c_hat = self.merged_cost(u, v)
        pair = (u, v)
        into = max((self.head[p] for p in self.pred[u] | self.pred[v] if p not in pair), default=0)
        out = max((self.tail[q] for q in self.succ[u] | self.succ[v] if q not in pair), default=0)
        through = into + c_hat + out
        C_hat = self.C - self.cost[u] - self.cost[v] + c_hat
        L = self.L
        if through >= L:
            return C_hat, through
        margin = 1e-9 * max(1.0, abs(L))
        on_critical = any(
            self.head[w] + self.tail[w] - self.cost[w] >= L - margin for w in pair
        )
        avoiding = self._longest_avoiding(u, v) if on_critical else L
        return C_hat, max(through, avoiding)

    def apply(self, u: int, v: int) -> None:
        c_hat = self.merged_cost(u, v)
        for w in self.succ[v]:
            self.pred[w].discard(v)
            if w != u:
                self.pred[w].add(u)
        for w in self.pred[v]:
            self.succ[w].discard(v)
            if w != u:
                self.succ[w].add(u)
        self.succ[u] = (self.succ[u] | self.succ[v]) - {u, v}
        self.pred[u] = (self.pred[u] | self.pred[v]) - {u, v}
        self.threads[u] += self.threads[v]
        self.cost[u] = c_hat
        for table in (self.succ, self.pred, self.threads, self.cost, self.obj):
            del table[v]
        self._refresh()

    def to_graph(self) -> TaskGraph:
        nodes = {v: Node(self.obj[v], self.threads[v]) for v in self.obj}
        edges = [(a, b) for a, s in self.succ.items() for b in s]
        return TaskGraph(nodes, edges, self.objects)


def _benefit_check(ws: _Workspace, u: int, v: int, deadline: float) -> bool:
    try:
        result = ws.trial(u, v)
    except WcetoRangeError:
        return False
    if result is None:
        return False
    C_hat, L_hat = result
    # the trial sums in a different order than a fresh recomputation, so
    # values within rounding of a boundary are pushed to its unsafe side
    tol = 1e-9 * max(1.0, abs(C_hat))
    if C_hat - L_hat <= tol:
        L_hat = C_hat
    if ws.L <= deadline and (L_hat > deadline or (L_hat != deadline and L_hat > deadline - tol)):
        return False
    m = real_core_allocation(ws.C, ws.L, deadline)
    m_hat = real_core_allocation(C_hat, L_hat, deadline)
    return improves(m, m_hat)


def beneficial(graph: TaskGraph, u: int, v: int, deadline: float) -> bool:
    """Whether ``u`` ⋈ ``v`` stays acyclic, keeps ``L <= D``, and improves the allocation."""
    if graph.nodes[u].object != graph.nodes[v].object or not _collapsible(graph, u):
        return False
    return _benefit_check(_Workspace(graph), u, v, deadline)


def order_greatest_benefit(pairs: Sequence[CandidatePair], graph: TaskGraph) -> list[CandidatePair]:
    scored = [CandidatePair(p.a, p.b, _delta(graph, p.a, p.b), p.penalty) for p in pairs]
    return sorted(scored, key=lambda p: (-p.delta, p.a, p.b))


def penalty(ws: _Workspace, u: int, v: int) -> float:
    try:
        result = ws.trial(u, v)
    except WcetoRangeError:
        return math.inf
    if result is None:
        return math.inf
    return result[1] - ws.L


def order_least_penalty(
    pairs: Sequence[CandidatePair], graph: TaskGraph, deadline: float | None = None
) -> list[CandidatePair]:
    """Ascending critical-path extension, each measured against ``graph`` itself.

    Pairs whose collapse would close a cycle get an infinite penalty. The
    deadline does not affect the penalty; it is accepted for symmetry with
    the other orderings.
    """
    ws = _Workspace(graph)
    scored = [CandidatePair(p.a, p.b, p.delta, penalty(ws, p.a, p.b)) for p in pairs]
    return sorted(scored, key=lambda p: (p.penalty, p.a, p.b))


def order_arbitrary(pairs: Sequence[CandidatePair], seed: int | str | None) -> list[CandidatePair]:
    shuffled = sorted(pairs, key=lambda p: p.key)
    random.Random(seed).shuffle(shuffled)
    return shuffled


def order_pairs(
    pairs: Sequence[CandidatePair],
    graph: TaskGraph,
    ordering: str | Callable[[Sequence[CandidatePair]], list[CandidatePair]],
    deadline: float,
    seed: int | str | None = 0,
) -> list[CandidatePair]:
    if callable(ordering):
        return list(ordering(pairs))
    if ordering == "benefit":
        return order_greatest_benefit(pairs, graph)
    if ordering == "penalty":
        return order_least_penalty(pairs, graph, deadline)
    if ordering == "arbitrary":
        return order_arbitrary(pairs, seed)
    raise ValueError(f"unknown ordering {ordering!r}; expected one of {ORDERINGS}")


def dagot_reduce(
    graph: TaskGraph,
    deadline: float,
    ordering: str | Callable[[Sequence[CandidatePair]], list[CandidatePair]] = "benefit",
    seed: int | str | None = 0,
    expires_at: float | None = None,
) -> Reduction:
    """Greedy dedicated-core reduction.

    Candidates are found and ordered once. Each pair is then resolved to the
    current representatives of its endpoints (earlier collapses may have
    absorbed them) and collapsed when beneficial.
    """
    ordered = order_pairs(candidates(graph), graph, ordering, deadline, seed)
    plan = CollapsePlan(ordered, UnionFind(graph.nodes))
    ws = _Workspace(graph)
    m_before = real_core_allocation(ws.C, ws.L, deadline)
    for pair in ordered:
        if expires_at is not None and time.monotonic() > expires_at:
            raise AnalysisTimeout("collapse exceeded its time budget")
        u, v = plan.merges.find(pair.a), plan.merges.find(pair.b)
        if u == v:
            continue
        if _benefit_check(ws, u, v, deadline):
            ws.apply(u, v)
            plan.merges.union(u, v)
            plan.applied.append((u, v))
    m_after = real_core_allocation(ws.C, ws.L, deadline)
    return Reduction(ws.to_graph(), plan, m_before, m_after)


@dataclass(frozen=True)
class SerializedTask:
    task: Task
    order: list[int]
    reduction: Reduction

    @property
    def wcet(self) -> float:
        return sum(self.task.graph.cost(v) for v in self.order)

    @property
    def feasible(self) -> bool:
        return self.wcet <= self.task.deadline


def serialize_low_util(
    task: Task,
    ordering: str | Callable = "benefit",
    seed: int | str | None = 0,
    expires_at: float | None = None,
) -> SerializedTask:
    """Collapse every beneficial pair, then run nodes one at a time in topological order."""
    reduction = dagot_reduce(task.graph, task.deadline, ordering, seed, expires_at)
    collapsed = Task(task.period, reduction.graph, task.name)
    return SerializedTask(collapsed, list(reduction.graph.topological_order()), reduction)


def _allocation(graph: TaskGraph, deadline: float) -> float:
    from .taskgraph import critical_path, workload

    C, L = workload(graph), critical_path(graph)[1]
    if C - L <= 1e-9 * max(1.0, abs(C)):
        L = C  # a chain up to rounding
    return real_core_allocation(C, L, deadline)


def optimal_collapse_oracle(
    graph: TaskGraph, deadline: float, limit: int = 8
) -> tuple[TaskGraph, float]:
    """Least positive real allocation over every acyclic sequence of collapses.

    Exhaustive and exponential; meant for checking heuristics on tiny graphs.
    Reachable states are identified by the partition of original nodes, so
    different orders reaching the same partition are explored once.
    """
    from .taskgraph import detect_cycle

    pairs = candidates(graph)
    if len(pairs) > limit:
        raise OracleLimitError(f"{len(pairs)} candidate pairs exceed the limit of {limit}")

    def canon(uf: UnionFind) -> frozenset:
        return frozenset(frozenset([r, *members]) for r, members in uf.groups().items())

    best_graph, best_m = graph, _allocation(graph, deadline)
    start = UnionFind(graph.nodes)
    seen = {canon(start)}
    stack = [(graph, start)]
    while stack:
        g, uf = stack.pop()
        for p in pairs:
            u, v = uf.find(p.a), uf.find(p.b)
            if u == v:
                continue
            try:
                h = collapse(g, u, v)
            except WcetoRangeError:
                continue
            if detect_cycle(h.nodes, h.edges):
                continue
            nxt = UnionFind(graph.nodes)
            for r, members in uf.groups().items():
                for x in members:
                    nxt.union(r, x)
            nxt.union(u, v)
            key = canon(nxt)
            if key in seen:
                continue
            seen.add(key)
            m = _allocation(h, deadline)
            if m > 0 and (best_m <= 0 or m < best_m):
                best_graph, best_m = h, m
            stack.append((h, nxt))
    return best_graph, best_m
