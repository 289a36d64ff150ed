"""DAG-OT task graphs: structure, critical path, workload, utilization."""

from __future__ import annotations

import heapq
import json
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import Any

from .wceto import EMPTY, Empty, WcetoFn
from . import wceto as _wceto

SOURCE_OBJECT = "<source>"
SINK_OBJECT = "<sink>"


class StructureError(ValueError):
    """The graph violates a structural requirement (cycle, dangling edge, ...)."""


@dataclass(frozen=True)
class Node:
    object: str
    threads: int = 1

    def __post_init__(self) -> None:
        if self.threads < 1:
            raise StructureError(f"threads must be >= 1, got {self.threads}")


class TaskGraph:
    """Immutable DAG whose nodes name an executable object and a thread count.

    ``objects`` binds every object name to its WCETO function, so nodes that
    share an object share one function. Construction only checks referential
    integrity; :meth:`validate` checks acyclicity and the single source/sink
    shape. Collapses may build cyclic intermediate graphs on purpose.
    """

    __slots__ = ("_nodes", "_edges", "_objects", "_succ", "_pred", "_cost", "_topo", "_cp", "_workload")

    def __init__(
        self,
        nodes: Mapping[int, Node],
        edges: Iterable[tuple[int, int]],
        objects: Mapping[str, WcetoFn],
    ) -> None:
        self._nodes = {v: nodes[v] for v in sorted(nodes)}
        self._edges = frozenset((int(a), int(b)) for a, b in edges)
        self._objects = dict(objects)
        succ: dict[int, list[int]] = {v: [] for v in self._nodes}
        pred: dict[int, list[int]] = {v: [] for v in self._nodes}
        for a, b in self._edges:
            if a not in succ or b not in succ:
                raise StructureError(f"edge ({a}, {b}) references a missing node")
            if a == b:
                raise StructureError(f"self-loop on node {a}")
            succ[a].append(b)
            pred[b].append(a)
        self._succ = {v: tuple(sorted(s)) for v, s in succ.items()}
        self._pred = {v: tuple(sorted(p)) for v, p in pred.items()}
        for v, node in self._nodes.items():
            if node.object not in self._objects:
                raise StructureError(f"node {v} uses unknown object {node.object!r}")
        self._cost = {v: self._objects[n.object](n.threads) for v, n in self._nodes.items()}
        self._topo: tuple[int, ...] | None = None
        self._cp: tuple[list[int], float] | None = None
        self._workload: float | None = None

    @property
    def nodes(self) -> Mapping[int, Node]:
        return self._nodes

    @property
    def edges(self) -> frozenset[tuple[int, int]]:
        return self._edges

    @property
    def objects(self) -> Mapping[str, WcetoFn]:
        return self._objects

    def succ(self, v: int) -> tuple[int, ...]:
        return self._succ[v]

    def pred(self, v: int) -> tuple[int, ...]:
        return self._pred[v]

    def cost(self, v: int) -> float:
        return self._cost[v]

    def wceto(self, v: int) -> WcetoFn:
        return self._objects[self._nodes[v].object]

    def is_pseudo(self, v: int) -> bool:
        return isinstance(self.wceto(v), Empty)

    @property
    def sources(self) -> list[int]:
        return [v for v, p in self._pred.items() if not p]

    @property
    def sinks(self) -> list[int]:
        return [v for v, s in self._succ.items() if not s]

    @property
    def source(self) -> int:
        (s,) = self.sources
        return s

    @property
    def sink(self) -> int:
        (t,) = self.sinks
        return t

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self._edges)

    def topological_order(self) -> tuple[int, ...]:
        """Kahn's order, smallest ready id first; raises on cycles."""
        if self._topo is None:
            indeg = {v: len(p) for v, p in self._pred.items()}
            ready = [v for v, d in indeg.items() if d == 0]
            heapq.heapify(ready)
            order = []
            while ready:
                v = heapq.heappop(ready)
                order.append(v)
                for w in self._succ[v]:
                    indeg[w] -= 1
                    if indeg[w] == 0:
                        heapq.heappush(ready, w)
            if len(order) != len(self._nodes):
                raise StructureError("graph contains a cycle")
            self._topo = tuple(order)
        return self._topo

    def validate(self) -> None:
        if detect_cycle(self._nodes, self._edges):
            raise StructureError("graph contains a cycle")
        if len(self.sources) != 1 or len(self.sinks) != 1:
            raise StructureError(
                f"expected one source and one sink, found {len(self.sources)} and {len(self.sinks)}"
            )

    def threads_per_object(self) -> dict[str, int]:
        totals: dict[str, int] = {}
        for node in self._nodes.values():
            totals[node.object] = totals.get(node.object, 0) + node.threads
        return totals

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TaskGraph):
            return NotImplemented
        return (
            self._nodes == other._nodes
            and self._edges == other._edges
            and self._objects == other._objects
        )

    def __hash__(self) -> int:
        return hash((tuple(self._nodes.items()), self._edges))

    def __repr__(self) -> str:
        return f"TaskGraph(|V|={len(self._nodes)}, |E|={len(self._edges)})"

    def to_json(self) -> dict[str, Any]:
        return {
            "nodes": [{"id": v, "object": n.object, "threads": n.threads} for v, n in self._nodes.items()],
            "edges": [list(e) for e in self.sorted_edges()],
            "objects": {name: fn.to_json() for name, fn in sorted(self._objects.items())},
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> TaskGraph:
        nodes = {int(n["id"]): Node(str(n["object"]), int(n.get("threads", 1))) for n in data["nodes"]}
        objects = {name: _wceto.from_json(fn) for name, fn in data["objects"].items()}
        return cls(nodes, [tuple(e) for e in data["edges"]], objects)


@dataclass(frozen=True)
class Task:
    """Implicit-deadline sporadic DAG task."""

    period: float
    graph: TaskGraph
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")

    @property
    def deadline(self) -> float:
        return self.period

    @property
    def workload(self) -> float:
        return workload(self.graph)

    @property
    def critical_path_length(self) -> float:
        return critical_path(self.graph)[1]

    @property
    def utilization(self) -> float:
        return utilization(self)

    def to_json(self) -> dict[str, Any]:
        data = self.graph.to_json()
        data["period"] = self.period
        data["deadline"] = self.deadline
        if self.name:
            data["name"] = self.name
        return data

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> Task:
        period = data["period"]
        if "deadline" in data and data["deadline"] != period:
            raise StructureError("only implicit deadlines (deadline == period) are supported")
        return cls(period, TaskGraph.from_json(data), str(data.get("name", "")))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def detect_cycle(nodes: Iterable[int], edges: Iterable[tuple[int, int]]) -> bool:
    """Iterative depth-first search for a directed cycle."""
    succ: dict[int, list[int]] = {v: [] for v in nodes}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
        succ.setdefault(b, [])
    white, grey, black = 0, 1, 2
    colour = dict.fromkeys(succ, white)
    for root in succ:
        if colour[root] != white:
            continue
        colour[root] = grey
        stack = [(root, iter(succ[root]))]
        while stack:
            v, it = stack[-1]
            for w in it:
                if colour[w] == grey:
                    return True
                if colour[w] == white:
                    colour[w] = grey
                    stack.append((w, iter(succ[w])))
                    break
            else:
                colour[v] = black
                stack.pop()
    return False


def augment_source_sink(
    nodes: Mapping[int, Node],
    edges: Iterable[tuple[int, int]],
    objects: Mapping[str, WcetoFn],
) -> TaskGraph:
    """Add zero-cost source/sink nodes where the graph has several of either."""
    edges = set(edges)
    if detect_cycle(nodes, edges):
        raise StructureError("graph contains a cycle")
    nodes = dict(nodes)
    objects = dict(objects)
    has_pred = {b for _, b in edges}
    has_succ = {a for a, _ in edges}
    sources = [v for v in sorted(nodes) if v not in has_pred]
    sinks = [v for v in sorted(nodes) if v not in has_succ]
    next_id = max(nodes, default=-1) + 1
    if len(sources) > 1:
        objects[SOURCE_OBJECT] = EMPTY
        nodes[next_id] = Node(SOURCE_OBJECT)
        edges.update((next_id, v) for v in sources)
        next_id += 1
    if len(sinks) > 1:
        objects[SINK_OBJECT] = EMPTY
        nodes[next_id] = Node(SINK_OBJECT)
        edges.update((v, next_id) for v in sinks)
    graph = TaskGraph(nodes, edges, objects)
    graph.validate()
    return graph


def longest_paths(graph: TaskGraph) -> tuple[dict[int, float], dict[int, int | None]]:
    """Longest path ending at each node and the predecessor that achieves it."""
    head: dict[int, float] = {}
    back: dict[int, int | None] = {}
    for v in graph.topological_order():
        best, arg = 0, None
        for p in graph.pred(v):
            # pred tuples are sorted, so strict > keeps the smallest id on ties
            if arg is None or head[p] > best:
                best, arg = head[p], p
        head[v] = best + graph.cost(v)
        back[v] = arg
    return head, back


def critical_path(graph: TaskGraph) -> tuple[list[int], float]:
    """Maximum-weight source-to-sink path and its length."""
    if graph._cp is None:
        graph._cp = _critical_path(graph)
    path, length = graph._cp
    return list(path), length


def _critical_path(graph: TaskGraph) -> tuple[list[int], float]:
    if not graph.nodes:
        return [], 0
    head, back = longest_paths(graph)
    end = None
    for t in graph.sinks:
        if end is None or head[t] > head[end]:
            end = t
    path = [end]
    while back[path[-1]] is not None:
        path.append(back[path[-1]])
    path.reverse()
    return path, head[end]


def workload(graph: TaskGraph) -> float:
    if graph._workload is None:
        graph._workload = sum(graph.cost(v) for v in graph.nodes)
    return graph._workload


def utilization(task: Task) -> float:
    return workload(task.graph) / task.period
