"""Synthetic DAG task generation.

Pipeline: random graph shapes -> executable objects and WCETOs -> periods
from target utilizations -> filtration of always-infeasible tasks ->
collapsed pools per ordering -> task-set assembly. Every random draw comes
from a generator seeded by ``(seed, stage, index)``, so each stage is
reproducible on its own and independent of execution order.
"""

from __future__ import annotations

import json
import random
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .collapse import dagot_reduce
from .federated import cores_needed, derive_seed
from .taskgraph import Node, Task, TaskGraph, augment_source_sink, critical_path, workload
from .wceto import LinearGrowth

POOL_ORDERINGS = {"arbitrary": "arbitrary", "benefit": "benefit", "penalty": "penalty"}
POOLS = ("baseline", *POOL_ORDERINGS)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GenConfig:
    nodes_per_graph: tuple[int, ...] = (16, 32, 64)
    edge_prob: tuple[float, ...] = (0.02, 0.06, 0.12)
    graph_iters: int = 10
    objects_per_task: tuple[int, ...] = (4, 8, 16)
    growth_cap: tuple[float, ...] = (0.2, 0.6, 1.0)
    wcet_range: tuple[int, int] = (1, 50)
    task_utils: tuple[float, ...] = (0.25, 0.5, 2.0, 4.0, 8.0, 16.0)
    set_utils: tuple[float, ...] = (0.5, 1, 2, 4, 8, 12, 16, 20, 24, 28, 32, 36)
    core_counts: tuple[int, ...] = (4, 8, 12, 16, 20, 24, 28, 32)
    sets_per_point: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("nodes_per_graph", "edge_prob", "objects_per_task", "growth_cap",
                     "wcet_range", "task_utils", "set_utils", "core_counts"):
            value = tuple(getattr(self, name))
            object.__setattr__(self, name, value)
            if not value:
                raise ConfigError(f"{name} must be nonempty")
        if any(not 0 <= p <= 1 for p in self.edge_prob):
            raise ConfigError("edge probabilities must lie in [0, 1]")
        if any(n < 2 for n in self.nodes_per_graph):
            raise ConfigError("graphs need at least two nodes")
        if any(o < 1 for o in self.objects_per_task):
            raise ConfigError("tasks need at least one object")
        if any(not 0.2 <= f for f in self.growth_cap):
            raise ConfigError("growth factor caps must be at least 0.2")
        lo, hi = self.wcet_range
        if not 1 <= lo <= hi:
            raise ConfigError(f"bad WCET range {self.wcet_range}")
        if any(u <= 0 for u in (*self.task_utils, *self.set_utils)):
            raise ConfigError("utilizations must be positive")
        if any(c < 1 for c in self.core_counts):
            raise ConfigError("core counts must be positive")
        if self.graph_iters < 1 or self.sets_per_point < 1:
            raise ConfigError("graph_iters and sets_per_point must be positive")

    def to_json(self) -> dict[str, Any]:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> GenConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> GenConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class GraphShape:
    """Edge structure with real nodes ``1..n`` and any added empty source/sink."""

    n: int
    edges: frozenset[tuple[int, int]]
    pseudo: frozenset[int] = frozenset()


def gen_graph(n: int, p: float, rng: random.Random) -> GraphShape:
    """Each pair ``i < j`` gets edge ``i -> j`` when a uniform draw is <= p."""
    if n < 2:
        raise ValueError("need at least two nodes")
    edges = {(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1) if rng.random() <= p}
    placeholder = {"_": LinearGrowth(1, 1.0)}
    g = augment_source_sink({v: Node("_") for v in range(1, n + 1)}, edges, placeholder)
    return GraphShape(n, g.edges, frozenset(v for v in g.nodes if v > n))


def assign_execution(
    shape: GraphShape,
    n_objects: int,
    cap: float,
    rng: random.Random,
    wcet_range: tuple[int, int] = (1, 50),
) -> TaskGraph:
    lo, hi = wcet_range
    objects: dict[str, Any] = {}
    for k in range(1, n_objects + 1):
        objects[f"o{k}"] = LinearGrowth(rng.randint(lo, hi), rng.uniform(0.2, cap))
    names = list(objects)
    nodes = {v: Node(rng.choice(names)) for v in range(1, shape.n + 1)}
    real_edges = [(a, b) for a, b in shape.edges if a not in shape.pseudo and b not in shape.pseudo]
    return augment_source_sink(nodes, real_edges, objects)


def assign_timing(graph: TaskGraph, u_target: float, name: str = "") -> Task:
    if u_target <= 0:
        raise ValueError("target utilization must be positive")
    return Task(workload(graph) / u_target, graph, name)


def trivially_infeasible(task: Task) -> bool:
    C, L = workload(task.graph), critical_path(task.graph)[1]
    m = cores_needed(C, L, task.deadline)
    return m is None or m > len(task.graph.nodes)


@dataclass
class TaskPool:
    baseline: list[Task] = field(default_factory=list)
    arbitrary: list[Task] = field(default_factory=list)
    benefit: list[Task] = field(default_factory=list)
    penalty: list[Task] = field(default_factory=list)
    collapse_seconds: dict[str, list[float]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.baseline)

    def pool(self, name: str) -> list[Task]:
        return getattr(self, name)


def collapse_variants(task: Task, seed: int | str) -> dict[str, tuple[Task, float]]:
    out = {}
    for pool, ordering in POOL_ORDERINGS.items():
        t0 = time.perf_counter()
        red = dagot_reduce(task.graph, task.deadline, ordering, derive_seed(seed, pool))
        out[pool] = (Task(task.period, red.graph, task.name), time.perf_counter() - t0)
    return out


def _filter_one(args: tuple[Task, str]) -> tuple[bool, dict[str, tuple[Task, float]]]:
    task, seed = args
    variants = collapse_variants(task, seed)
    keep = not trivially_infeasible(task) or any(
        not trivially_infeasible(t) for t, _ in variants.values()
    )
    return keep, variants


def filter_tasks(tasks: Sequence[Task], seed: int | str = 0, jobs: int = 1) -> TaskPool:
    """Drop tasks that stay trivially infeasible under the baseline and every ordering."""
    work = [(t, derive_seed(seed, "collapse", t.name or i)) for i, t in enumerate(tasks)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_filter_one, work, chunksize=8))
    else:
        results = [_filter_one(w) for w in work]
    pool = TaskPool(collapse_seconds={name: [] for name in POOL_ORDERINGS})
    for task, (keep, variants) in zip(tasks, results):
        if not keep:
            continue
        pool.baseline.append(task)
        for name, (t, secs) in variants.items():
            pool.pool(name).append(t)
            pool.collapse_seconds[name].append(secs)
    return pool


def assemble(
    utils: Sequence[float], target: float, count: int, rng: random.Random
) -> list[list[int]]:
    """Draw pool indices with replacement until the baseline utilization reaches ``target``."""
    if not utils:
        raise ValueError("cannot assemble from an empty pool")
    sets = []
    for _ in range(count):
        chosen, total = [], 0.0
        while total < target:
            i = rng.randrange(len(utils))
            chosen.append(i)
            total += utils[i]
        sets.append(chosen)
    return sets


@dataclass(frozen=True)
class SetSpec:
    set_id: int
    cores: int
    target_U: float
    indices: tuple[int, ...]


def graph_shapes(config: GenConfig) -> list[GraphShape]:
    shapes = []
    for n in config.nodes_per_graph:
        for p in config.edge_prob:
            for s in range(config.graph_iters):
                rng = random.Random(derive_seed(config.seed, "graph", len(shapes)))
                shapes.append(gen_graph(n, p, rng))
    return shapes


def executable_graphs(config: GenConfig, shapes: Iterable[GraphShape]) -> list[TaskGraph]:
    graphs = []
    for shape in shapes:
        for o in config.objects_per_task:
            for cap in config.growth_cap:
                rng = random.Random(derive_seed(config.seed, "exec", len(graphs)))
                graphs.append(assign_execution(shape, o, cap, rng, config.wcet_range))
    return graphs


def timed_tasks(config: GenConfig, graphs: Iterable[TaskGraph]) -> list[Task]:
    tasks = []
    for g in graphs:
        for u in config.task_utils:
            tasks.append(assign_timing(g, u, f"t{len(tasks)}"))
    return tasks


def assemble_sets(config: GenConfig, pool: TaskPool) -> list[SetSpec]:
    utils = [t.utilization for t in pool.baseline]
    specs = []
    for c in config.core_counts:
        for U in config.set_utils:
            rng = random.Random(derive_seed(config.seed, "assemble", c, U))
            for idx in assemble(utils, U, config.sets_per_point, rng):
                specs.append(SetSpec(len(specs), c, U, tuple(idx)))
    return specs


@dataclass
class Generated:
    config: GenConfig
    pool: TaskPool
    sets: list[SetSpec]
    counts: dict[str, int]


def generate(config: GenConfig, jobs: int = 1, log=None) -> Generated:
    shapes = graph_shapes(config)
    graphs = executable_graphs(config, shapes)
    tasks = timed_tasks(config, graphs)
    if log:
        log(f"generated {len(shapes)} graphs, {len(graphs)} executable tasks, {len(tasks)} timed tasks")
    pool = filter_tasks(tasks, config.seed, jobs)
    if log:
        log(f"filtration kept {len(pool)} of {len(tasks)} tasks")
    sets = assemble_sets(config, pool) if len(pool) else []
    counts = {
        "graphs": len(shapes),
        "executable": len(graphs),
        "timed": len(tasks),
        "filtered": len(pool),
        "sets": len(sets),
    }
    return Generated(config, pool, sets, counts)


def save(gen: Generated, out: str | Path, extra_manifest: dict[str, Any] | None = None) -> Path:
    out = Path(out)
    for name in POOLS:
        d = out / name
        d.mkdir(parents=True, exist_ok=True)
        for i, task in enumerate(gen.pool.pool(name)):
            (d / f"{i:06d}.json").write_text(json.dumps(task.to_json(), sort_keys=True) + "\n", encoding="utf-8")
    sets = [
        {"set_id": s.set_id, "cores": s.cores, "target_U": s.target_U, "indices": list(s.indices)}
        for s in gen.sets
    ]
    (out / "sets.json").write_text(json.dumps(sets, sort_keys=True) + "\n", encoding="utf-8")
    manifest = {
        "config": gen.config.to_json(),
        "seed": gen.config.seed,
        "counts": gen.counts,
        "pools": list(POOLS),
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load(directory: str | Path) -> tuple[TaskPool, list[SetSpec], dict[str, Any]]:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    pool = TaskPool()
    for name in POOLS:
        files = sorted((directory / name).glob("*.json"))
        pool.pool(name).extend(Task.from_json(json.loads(f.read_text(encoding="utf-8"))) for f in files)
    raw = json.loads((directory / "sets.json").read_text(encoding="utf-8"))
    sets = [SetSpec(s["set_id"], s["cores"], s["target_U"], tuple(s["indices"])) for s in raw]
    return pool, sets, manifest
