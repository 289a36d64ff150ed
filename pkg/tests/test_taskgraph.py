import random

import pytest
from hypothesis import given, settings, strategies as st

from dagot.taskgraph import (
    Node,
    StructureError,
    Task,
    TaskGraph,
    augment_source_sink,
    critical_path,
    detect_cycle,
    utilization,
    workload,
)
from dagot.wceto import LinearGrowth

import worked
from oracles import brute_force_longest, is_path, path_length, random_task


def _graph(costs, edges):
    objects = {f"o{v}": LinearGrowth(c, 1.0) for v, c in costs.items()}
    return TaskGraph({v: Node(f"o{v}") for v in costs}, edges, objects)


def test_dag_task_example():
    task, ids = worked.dag_task()
    path, L = critical_path(task.graph)
    assert L == 60
    assert path == [ids["s"], ids["u"], ids["t"]]
    assert workload(task.graph) == 70


def test_single_node():
    g = _graph({1: 7}, [])
    assert critical_path(g) == ([1], 7)
    assert workload(g) == 7


def test_ties_prefer_smallest_id():
    g = _graph({1: 1, 2: 5, 3: 5, 4: 1}, [(1, 2), (1, 3), (2, 4), (3, 4)])
    assert critical_path(g)[0] == [1, 2, 4]
    g = _graph({1: 1, 3: 5, 2: 5, 4: 1}, [(1, 3), (1, 2), (3, 4), (2, 4)])
    assert critical_path(g)[0] == [1, 2, 4]


def test_utilization():
    task, _ = worked.dag_task()
    assert utilization(Task(35, task.graph)) == 2.0
    g = _graph({1: 52}, [])
    assert Task(104, g).utilization == 0.5


def test_detect_cycle():
    assert detect_cycle([1, 2], [(1, 2), (2, 1)])
    assert not detect_cycle([1, 2, 3, 4], [(1, 2), (1, 3), (3, 4)])
    assert detect_cycle([1, 2, 3], [(1, 2), (2, 3), (3, 1)])
    assert not detect_cycle([], [])


def test_validate_rejects_cycles_and_multiple_sources():
    with pytest.raises(StructureError):
        _graph({1: 1, 2: 1}, [(1, 2), (2, 1)]).validate()
    with pytest.raises(StructureError):
        _graph({1: 1, 2: 1, 3: 1}, [(1, 3), (2, 3)]).validate()
    with pytest.raises(StructureError):
        _graph({1: 1}, [(1, 2)])
    with pytest.raises(StructureError):
        _graph({1: 1}, [(1, 1)])
    with pytest.raises(StructureError):
        Node("a", 0)


def test_augment_two_sources():
    costs = {1: 3, 2: 4, 3: 5}
    objects = {f"o{v}": LinearGrowth(c, 1.0) for v, c in costs.items()}
    nodes = {v: Node(f"o{v}") for v in costs}
    g = augment_source_sink(nodes, [(1, 3), (2, 3)], objects)
    s = g.source
    assert s == 4 and g.is_pseudo(s) and g.cost(s) == 0
    assert set(g.succ(s)) == {1, 2}
    assert g.sink == 3
    assert workload(g) == 12 and critical_path(g)[1] == 9


def test_augment_identity_and_three_sinks():
    objects = {"a": LinearGrowth(1, 1.0)}
    g = augment_source_sink({1: Node("a"), 2: Node("a")}, [(1, 2)], objects)
    assert g == TaskGraph({1: Node("a"), 2: Node("a")}, [(1, 2)], objects)
    nodes = {v: Node("a") for v in range(1, 5)}
    g = augment_source_sink(nodes, [(1, 2), (1, 3), (1, 4)], objects)
    assert len(g.nodes) == 5
    assert len(g.pred(g.sink)) == 3


def test_augment_rejects_cycle():
    objects = {"a": LinearGrowth(1, 1.0)}
    with pytest.raises(StructureError):
        augment_source_sink({1: Node("a"), 2: Node("a")}, [(1, 2), (2, 1)], objects)


def test_task_json_round_trip():
    task, _ = worked.occlusion()
    again = Task.from_json(task.to_json())
    assert again == task
    assert again.dumps() == task.dumps()
    data = task.to_json()
    data["deadline"] = data["period"] / 2
    with pytest.raises(StructureError):
        Task.from_json(data)


def test_topological_order_respects_edges():
    task, _ = worked.occlusion()
    g = task.graph
    pos = {v: i for i, v in enumerate(g.topological_order())}
    assert all(pos[a] < pos[b] for a, b in g.edges)


def test_threads_per_object():
    task, _ = worked.node_collapse()
    assert task.graph.threads_per_object()["a"] == 2


def test_critical_path_matches_enumeration():
    rng = random.Random(4)
    for _ in range(100):
        g = random_task(rng, n_range=(2, 10)).graph
        path, L = critical_path(g)
        assert L == brute_force_longest(g)
        assert is_path(g, path) and path_length(g, path) == L
        assert path[0] == g.source and path[-1] == g.sink


def _reaches(g, a, b):
    stack, seen = [a], set()
    while stack:
        v = stack.pop()
        if v == b:
            return True
        for w in g.succ(v):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return False


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_path_never_exceeds_workload(seed):
    g = random_task(random.Random(seed), n_range=(2, 14)).graph
    L, C = critical_path(g)[1], workload(g)
    assert L <= C
    assert critical_path(g) == critical_path(g)
    costly = [v for v in g.topological_order() if g.cost(v) > 0]
    on_one_path = all(_reaches(g, a, b) for a, b in zip(costly, costly[1:]))
    assert (L == C) == on_one_path


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_augmentation_preserves_lengths(seed):
    rng = random.Random(seed)
    n = rng.randint(2, 10)
    edges = {(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1) if rng.random() < 0.3}
    objects = {f"o{v}": LinearGrowth(rng.randint(1, 50), 1.0) for v in range(1, n + 1)}
    nodes = {v: Node(f"o{v}") for v in range(1, n + 1)}
    g = augment_source_sink(nodes, edges, objects)
    raw = TaskGraph(nodes, edges, objects)
    assert workload(g) == workload(raw)
    assert critical_path(g)[1] == brute_force_longest(raw)
