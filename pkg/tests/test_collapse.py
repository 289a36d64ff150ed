import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from dagot.collapse import (
    ORDERINGS,
    CandidatePair,
    CollapseError,
    OracleLimitError,
    UnionFind,
    _Workspace,
    beneficial,
    candidates,
    collapse,
    dagot_reduce,
    improves,
    optimal_collapse_oracle,
    order_arbitrary,
    order_greatest_benefit,
    order_least_penalty,
    real_core_allocation,
    serialize_low_util,
)
from dagot.taskgraph import Node, Task, TaskGraph, critical_path, detect_cycle, workload
from dagot.wceto import LinearGrowth, Table

import worked
from oracles import random_task


def _alloc(g, D):
    return real_core_allocation(workload(g), critical_path(g)[1], D)


# worked examples


def test_node_collapse_workload():
    task, ids = worked.node_collapse()
    assert candidates(task.graph) == [CandidatePair(ids["u"], ids["v"], 8)]
    h = collapse(task.graph, ids["u"], ids["v"])
    assert workload(task.graph) == 43 and workload(h) == 35
    assert h.nodes[ids["u"]].threads == 2 and ids["v"] not in h.nodes


def test_critical_path_reduction():
    task, ids = worked.critical_path_reduction()
    h = collapse(task.graph, ids["u"], ids["v"])
    assert critical_path(task.graph)[1] == 50 and critical_path(h)[1] == 40
    ranked = order_least_penalty(candidates(task.graph), task.graph, task.deadline)
    assert ranked[0].penalty == -10


def test_critical_path_extension():
    task, ids = worked.critical_path_extension()
    h = collapse(task.graph, ids["u"], ids["v"])
    assert critical_path(task.graph)[1] == 34 and critical_path(h)[1] == 38
    (pair,) = order_least_penalty(candidates(task.graph), task.graph)
    assert pair.penalty == 4


def test_occlusion_tables():
    task, ids = worked.occlusion()
    g, D = task.graph, task.deadline
    assert (workload(g), critical_path(g)[1], _alloc(g, D)) == (52, 32, 2.5)
    uv = collapse(g, ids["u"], ids["v"])
    assert (workload(uv), critical_path(uv)[1]) == (50, 33)
    assert _alloc(uv, D) == pytest.approx(17 / 7, abs=1e-9)
    xy = collapse(g, ids["x"], ids["y"])
    assert (workload(xy), critical_path(xy)[1]) == (49, 29)
    assert _alloc(xy, D) == pytest.approx(20 / 11, abs=1e-9)
    assert beneficial(g, ids["u"], ids["v"], D)
    assert beneficial(g, ids["x"], ids["y"], D)
    # either collapse occludes the other by pushing L past D
    assert not beneficial(uv, ids["x"], ids["y"], D)
    assert not beneficial(xy, ids["u"], ids["v"], D)


def test_occlusion_order_matters():
    task, ids = worked.occlusion()
    g, D = task.graph, task.deadline
    uv_first = lambda pairs: sorted(pairs, key=lambda p: p.a != ids["u"])  # noqa: E731
    xy_first = lambda pairs: sorted(pairs, key=lambda p: p.a != ids["x"])  # noqa: E731
    assert dagot_reduce(g, D, uv_first).m_after == pytest.approx(17 / 7)
    assert dagot_reduce(g, D, xy_first).m_after == pytest.approx(20 / 11)
    for ordering in ("benefit", "penalty"):
        red = dagot_reduce(g, D, ordering)
        assert red.collapsed_pairs == [(ids["x"], ids["y"])]
        assert red.m_after == pytest.approx(20 / 11)
    best_graph, best_m = optimal_collapse_oracle(g, D)
    assert best_m == pytest.approx(20 / 11, abs=1e-9)


def test_cycle_occlusion():
    task, ids = worked.cycle_occlusion()
    g, D = task.graph, task.deadline
    assert beneficial(g, ids["u"], ids["v"], D)
    uv = collapse(g, ids["u"], ids["v"])
    assert not beneficial(uv, ids["x"], ids["y"], D)
    both = collapse(uv, ids["x"], ids["y"])
    assert detect_cycle(both.nodes, both.edges)


# operators


def test_candidates():
    task, _ = worked.dag_task()
    assert candidates(task.graph) == []
    objects = {"a": LinearGrowth(5, 0.5)}
    g = TaskGraph({1: Node("a"), 2: Node("a"), 3: Node("a")}, [(1, 2), (1, 3)], objects)
    assert [p.key for p in candidates(g)] == [(1, 2), (1, 3), (2, 3)]


def test_pseudo_and_linear_objects_are_not_candidates():
    task, _ = worked.dag_task()
    rng = random.Random(1)
    t = random_task(rng, objects=(1, 1))
    for p in candidates(t.graph):
        assert not t.graph.is_pseudo(p.a)
    objects = {"a": LinearGrowth(5, 1.5)}
    g = TaskGraph({1: Node("a"), 2: Node("a")}, [(1, 2)], objects)
    assert candidates(g) == []


def test_collapse_errors():
    task, ids = worked.node_collapse()
    with pytest.raises(CollapseError):
        collapse(task.graph, ids["s"], ids["t"])
    with pytest.raises(CollapseError):
        collapse(task.graph, ids["u"], ids["u"])
    with pytest.raises(CollapseError):
        collapse(task.graph, ids["u"], 99)


def test_collapse_drops_internal_edges():
    task, ids = worked.critical_path_reduction()
    h = collapse(task.graph, ids["u"], ids["v"])
    u = ids["u"]
    assert (u, u) not in h.edges
    assert set(h.pred(u)) == {ids["s"]} and set(h.succ(u)) == {ids["t"]}


@pytest.mark.parametrize(
    "C, L, D, expected",
    [(52, 32, 40, 2.5), (50, 33, 40, 17 / 7), (49, 29, 40, 20 / 11), (10, 10, 10, 1.0), (12, 10, 10, math.inf)],
)
def test_real_core_allocation(C, L, D, expected):
    assert real_core_allocation(C, L, D) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize(
    "m, m_hat, expected",
    [(2.5, 17 / 7, True), (-1.0, -0.5, True), (2.0, 2.6, False), (2.0, 2.0, True), (2.0, 0.0, False), (-1.0, -2.0, False)],
)
def test_improves(m, m_hat, expected):
    assert improves(m, m_hat) is expected


def test_beneficial_rejects_deadline_overrun():
    task, ids = worked.critical_path_extension()
    # L = 34 fits D = 36, but the collapse gives 38
    assert not beneficial(task.graph, ids["u"], ids["v"], 36)


def test_collapse_into_a_chain_is_not_an_improvement():
    # m drops to exactly zero, which the strict lower bound rejects
    task, ids = worked.critical_path_extension()
    assert _alloc(collapse(task.graph, ids["u"], ids["v"]), 100) == 0
    assert not beneficial(task.graph, ids["u"], ids["v"], 100)


def test_beneficial_does_not_mutate():
    task, ids = worked.occlusion()
    before = task.graph.to_json()
    beneficial(task.graph, ids["u"], ids["v"], 40)
    assert task.graph.to_json() == before


def test_order_greatest_benefit():
    spec = {"s": 1, "a1": ("a", [10, 12]), "a2": ("a", [10, 12]), "b1": ("b", [5, 7]),
            "b2": ("b", [5, 7]), "t": 1}
    task, ids = worked.build(spec, [("s", "a1"), ("s", "a2"), ("s", "b1"), ("s", "b2"),
                                    ("a1", "t"), ("a2", "t"), ("b1", "t"), ("b2", "t")])
    ranked = order_greatest_benefit(candidates(task.graph), task.graph)
    assert [p.delta for p in ranked] == [8, 3]
    objects = {"a": LinearGrowth(5, 1.0), "b": LinearGrowth(5, 0.5)}
    g = TaskGraph({1: Node("a"), 2: Node("a"), 3: Node("b"), 4: Node("b")}, [(1, 2), (3, 4)], objects)
    ranked = order_greatest_benefit(candidates(g), g)
    assert [p.key for p in ranked] == [(3, 4), (1, 2)] and ranked[-1].delta == 0


def test_order_least_penalty_off_critical_path_is_zero():
    spec = {"s": 1, "x1": ("a", [2, 3]), "x2": ("a", [2, 3]), "w": 30, "t": 1}
    task, _ = worked.build(spec, [("s", "x1"), ("s", "x2"), ("s", "w"), ("x1", "t"), ("x2", "t"), ("w", "t")])
    (pair,) = order_least_penalty(candidates(task.graph), task.graph)
    assert pair.penalty == 0


def test_order_arbitrary_is_seeded():
    pairs = [CandidatePair(i, i + 100) for i in range(30)]
    assert order_arbitrary(pairs, 3) == order_arbitrary(list(reversed(pairs)), 3)
    assert order_arbitrary(pairs, 3) != order_arbitrary(pairs, 4)
    assert order_arbitrary(pairs[:1], 9) == pairs[:1]


def test_unknown_ordering():
    task, _ = worked.node_collapse()
    with pytest.raises(ValueError):
        dagot_reduce(task.graph, 100, "fastest")


def test_reduce_without_candidates():
    task, _ = worked.dag_task()
    red = dagot_reduce(task.graph, 100)
    assert red.graph == task.graph and red.merges == {}


def test_union_find():
    uf = UnionFind(range(6))
    uf.union(1, 2)
    uf.union(3, 1)
    assert uf.find(2) == 3 and uf.find(1) == 3
    assert uf.find(uf.find(2)) == uf.find(2)
    assert uf.groups() == {3: [1, 2]}


def test_serialize_low_util():
    shared = ("a", [10, 12])
    task, ids = worked.build(
        {"s": 5, "u": shared, "v": shared, "w": 3, "t": 18},
        [("s", "u"), ("s", "v"), ("s", "w"), ("u", "t"), ("v", "t"), ("w", "t")],
        period=100,
    )
    ser = serialize_low_util(task)
    g = ser.task.graph
    assert ser.reduction.collapsed_pairs == [(ids["u"], ids["v"])]
    assert ser.wcet == workload(g) == 38
    assert set(ser.order) == set(g.nodes)
    pos = {v: i for i, v in enumerate(ser.order)}
    assert all(pos[a] < pos[b] for a, b in g.edges)
    assert ser.feasible


def test_serialize_chain_without_candidates():
    task, ids = worked.build({"a": 3, "b": 4, "c": 5}, [("a", "b"), ("b", "c")], period=20)
    ser = serialize_low_util(task)
    assert ser.order == [ids["a"], ids["b"], ids["c"]] and ser.wcet == 12


def test_oracle_limit_and_identity():
    task, _ = worked.dag_task()
    g, m = optimal_collapse_oracle(task.graph, 100)
    assert g == task.graph and m == _alloc(task.graph, 100)
    objects = {"a": LinearGrowth(2, 0.5)}
    nodes = {v: Node("a") for v in range(1, 7)}
    big = TaskGraph(nodes, [(1, v) for v in range(2, 7)], objects)
    with pytest.raises(OracleLimitError):
        optimal_collapse_oracle(big, 100)


# fast trial path versus a real collapse


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_workspace_trial_matches_collapse(seed):
    rng = random.Random(seed)
    task = random_task(rng, n_range=(3, 12), objects=(1, 3))
    g = task.graph
    ws = _Workspace(g)
    for p in candidates(g):
        h = collapse(g, p.a, p.b)
        result = ws.trial(p.a, p.b)
        if detect_cycle(h.nodes, h.edges):
            assert result is None
        else:
            C_hat, L_hat = result
            assert C_hat == pytest.approx(workload(h), rel=1e-12)
            assert L_hat == pytest.approx(critical_path(h)[1], rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(ORDERINGS))
def test_reduce_invariants(seed, ordering):
    rng = random.Random(seed)
    task = random_task(rng, n_range=(3, 16), objects=(1, 4))
    g, D = task.graph, task.deadline
    red = dagot_reduce(g, D, ordering, seed)
    h = red.graph
    h.validate()
    C, L = workload(g), critical_path(g)[1]
    C_hat, L_hat = workload(h), critical_path(h)[1]
    assert C_hat <= C + 1e-9
    if L <= D:
        assert L_hat <= D
    m, m_hat = _alloc(g, D), _alloc(h, D)
    assert m_hat == pytest.approx(red.m_after)
    if m > 0:
        assert 0 < m_hat <= m * (1 + 1e-9)
    assert h.threads_per_object() == g.threads_per_object()
    # replaying the recorded collapses on the input reproduces the output
    replay = g
    for u, v in red.collapsed_pairs:
        replay = collapse(replay, u, v)
    assert replay == h
