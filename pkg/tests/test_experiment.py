from dagot.experiment import evaluate_sets
from dagot.generator import SetSpec, TaskPool
from dagot.taskgraph import Task

import worked


def _pool(seconds=None):
    task, _ = worked.occlusion()
    from dagot.collapse import dagot_reduce

    pools = {name: [Task(task.period, dagot_reduce(task.graph, task.deadline, name).graph)]
             for name in ("arbitrary", "benefit", "penalty")}
    return TaskPool([task], pools["arbitrary"], pools["benefit"], pools["penalty"],
                    seconds or {name: [0.0] for name in pools})


SETS = [SetSpec(0, 4, 2.0, (0,)), SetSpec(1, 2, 2.0, (0,))]


def test_rows_and_metrics():
    rows = evaluate_sets(_pool(), SETS)
    assert [(r.set_id, r.approach) for r in rows][:5] == [
        (0, "B-NP"), (0, "B-P"), (0, "OT-A"), (0, "OT-G"), (0, "OT-L")
    ]
    by = {(r.set_id, r.approach): r for r in rows}
    assert by[0, "B-NP"].m_high == 3 and by[0, "B-NP"].delta_m == 0
    assert by[0, "OT-G"].m_high == 2 and by[0, "OT-G"].delta_m == 1
    assert by[0, "OT-G"].delta_C == 3 and by[0, "OT-G"].delta_L == -3
    assert not by[1, "B-NP"].schedulable and by[1, "OT-L"].schedulable
    assert all(r.elapsed_ms is None for r in rows)


def test_timeout_spreads_across_heuristics():
    seconds = {"arbitrary": [0.0], "benefit": [5.0], "penalty": [0.0]}
    rows = evaluate_sets(_pool(seconds), SETS[:1], timeout=1.0)
    by = {r.approach: r for r in rows}
    for a in ("OT-A", "OT-G", "OT-L"):
        assert by[a].reason == "timeout" and not by[a].schedulable
    assert by["B-NP"].reason == "ok"


def test_parallel_matches_serial():
    serial = evaluate_sets(_pool(), SETS * 3, jobs=1)
    parallel = evaluate_sets(_pool(), SETS * 3, jobs=2)
    assert serial == parallel


def test_record_timing():
    rows = evaluate_sets(_pool(), SETS[:1], record_timing=True)
    assert all(r.elapsed_ms is not None and r.elapsed_ms >= 0 for r in rows)
