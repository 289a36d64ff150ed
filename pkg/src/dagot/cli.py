"""``dagot`` command-line interface.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from . import __version__
from . import generator
from .collapse import ORDERINGS, dagot_reduce
from .experiment import evaluate_sets
from .federated import APPROACHES, DEFAULT_TIMEOUT, allocate_cores, cores_needed, derive_seed
from .generator import ConfigError, GenConfig
from .metrics import (
    aggregate,
    buckets_of_width,
    pool_savings,
    results_csv,
    summary_csv,
    task_metrics,
)
from .simulator import TIE_BREAKS, simulate, summary
from .taskgraph import StructureError, Task, critical_path
from .wceto import WcetoRangeError

log = logging.getLogger("dagot")


class UsageError(Exception):
    """Bad input: exit code 2."""


def _dump(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n"


def _json_default(value: Any) -> Any:
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _finite(x: float) -> float | None:
    return x if x == x and abs(x) != float("inf") else None


def _jobs(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("DAGOT_JOBS")
    if not env:
        return 1
    try:
        return max(1, int(env))
    except ValueError:
        raise UsageError(f"DAGOT_JOBS must be an integer, got {env!r}") from None


def _load_config(path: str, seed: int | None) -> GenConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    if seed is not None:
        data["seed"] = seed
    try:
        return GenConfig.from_json(data)
    except (ConfigError, TypeError, ValueError) as exc:
        raise UsageError(f"bad config: {exc}") from None


def _load_task(path: str) -> Task:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        task = Task.from_json(data)
        task.graph.validate()
    except FileNotFoundError:
        raise UsageError(f"task file not found: {path}") from None
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, StructureError, WcetoRangeError) as exc:
        raise UsageError(f"malformed task {path}: {exc}") from None
    return task


def _manifest(args: argparse.Namespace, config: GenConfig | None, outputs: list[str]) -> dict[str, Any]:
    manifest: dict[str, Any] = {
        "command": args.command,
        "version": __version__,
        "outputs": sorted(outputs),
    }
    if config is not None:
        canon = json.dumps(config.to_json(), sort_keys=True, separators=(",", ":"))
        manifest["config_hash"] = hashlib.sha256(canon.encode()).hexdigest()
        manifest["seed"] = config.seed
    if getattr(args, "record_timing", False):
        # kept out of default output so reruns stay byte-identical
        manifest["started_at"] = args.started_at
        manifest["finished_at"] = datetime.now(timezone.utc).isoformat()
    return manifest


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_generate(args: argparse.Namespace) -> int:
    config = _load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "run_manifest.json", _dump(_manifest(args, config, [])))
    gen = generator.generate(config, _jobs(args.jobs), log.info)
    extra = {"version": __version__}
    generator.save(gen, out, extra)
    outputs = ["manifest.json", "sets.json", *generator.POOLS]
    _write(out / "run_manifest.json", _dump(_manifest(args, config, outputs)))
    log.info("wrote %d tasks and %d sets to %s", len(gen.pool), len(gen.sets), out)
    return 0


def cmd_collapse(args: argparse.Namespace) -> int:
    task = _load_task(args.task)
    red = dagot_reduce(task.graph, task.deadline, args.order, args.seed)
    post = Task(task.period, red.graph, task.name)
    metrics = task_metrics(task, post)
    C, L = post.workload, critical_path(post.graph)[1]
    report = {
        "order": args.order,
        "seed": args.seed,
        "task": post.to_json(),
        "merges": {str(k): v for k, v in red.merges.items()},
        "collapsed_pairs": [list(p) for p in red.collapsed_pairs],
        "metrics": {
            "m_saved": metrics.m_saved,
            "delta_C": metrics.delta_C,
            "delta_L": metrics.delta_L,
        },
        "C": C,
        "L": L,
        "m_real_before": _finite(red.m_before),
        "m_real": _finite(red.m_after),
        "m": cores_needed(C, L, task.deadline),
    }
    sys.stdout.write(_dump(report))
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    try:
        pool, sets, _ = generator.load(args.sets_dir)
    except FileNotFoundError as exc:
        raise OSError(f"missing pool data: {exc.filename}") from None
    except (json.JSONDecodeError, KeyError) as exc:
        raise OSError(f"corrupt pool data in {args.sets_dir}: {exc}") from None
    approaches = args.approach or list(APPROACHES)
    if args.cores:
        wanted = set(args.cores)
        sets = [s for s in sets if s.cores in wanted]
    rows = evaluate_sets(pool, sets, approaches, args.timeout, _jobs(args.jobs), args.record_timing)
    text = results_csv(rows)
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    task = _load_task(args.task)
    m = args.cores if args.cores is not None else allocate_cores(task)
    if m is None:
        log.warning("no core count is feasible for this task; simulating on one core")
        m = 1
    if m < 1 or args.runs < 1:
        raise UsageError("--cores and --runs must be positive")
    out = Path(args.out) if args.out else None
    runs = []
    for r in range(args.runs):
        seed = derive_seed(args.seed, "sim", r)
        trace = simulate(task.graph, m, args.tiebreak, seed, args.early_completion)
        s = summary(trace, task.graph, m, task.deadline)
        s["run"] = r
        runs.append(s)
        if out is not None:
            _write(out / f"trace_{r:04d}.csv", trace.to_csv())
    violations = [s["run"] for s in runs if not s["deadline_met"]]
    report = {
        "cores": m,
        "tiebreak": args.tiebreak,
        "deadline": task.deadline,
        "runs": runs,
        "max_makespan": max(s["makespan"] for s in runs),
        "deadline_violations": violations,
    }
    for r in violations:
        log.warning("run %d missed the deadline", r)
    if out is not None:
        _write(out / "summary.json", _dump(report))
    else:
        sys.stdout.write(_dump(report))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "run_manifest.json", _dump(_manifest(args, config, [])))
    jobs = _jobs(args.jobs)
    gen = generator.generate(config, jobs, log.info)
    if not gen.sets:
        raise RuntimeError("filtration left no tasks to assemble sets from")
    generator.save(gen, out / "pools", {"version": __version__})
    log.info("analyzing %d sets", len(gen.sets))
    rows = evaluate_sets(gen.pool, gen.sets, list(APPROACHES), args.timeout, jobs, args.record_timing)
    _write(out / "results.csv", results_csv(rows))
    upper = max(config.set_utils) + args.bucket_width
    points = aggregate(rows, buckets_of_width(args.bucket_width, upper))
    _write(out / "summary.csv", summary_csv(points))
    savings = {}
    for name in generator.POOL_ORDERINGS:
        s = pool_savings(name, gen.pool.baseline, gen.pool.pool(name))
        savings[name] = {
            "high_tasks": s.high_tasks,
            "cores_before": s.cores_before,
            "cores_after": s.cores_after,
            "core_reduction": s.core_reduction,
            "workload_reduction_high": s.workload_reduction_high,
            "workload_reduction_all": s.workload_reduction_all,
            "mean_delta_L_high": s.mean_delta_L_high,
        }
    _write(out / "savings.json", _dump(savings))
    outputs = ["pools", "results.csv", "summary.csv", "savings.json"]
    _write(out / "run_manifest.json", _dump(_manifest(args, config, outputs)))
    sys.stdout.write(summary_csv(points))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dagot", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="suppress the progress log")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate task pools and task sets")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--jobs", type=int)
    p.add_argument("--record-timing", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("collapse", help="collapse one task and print the result as JSON")
    p.add_argument("task")
    p.add_argument("--order", choices=ORDERINGS, default="benefit")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_collapse)

    p = sub.add_parser("analyze", help="federated schedulability of generated sets")
    p.add_argument("sets_dir")
    p.add_argument("--approach", action="append", choices=list(APPROACHES))
    p.add_argument("--cores", type=int, action="append", help="only sets with this core count")
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="results CSV path (default: standard output)")
    p.add_argument("--record-timing", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="simulate one job on dedicated cores")
    p.add_argument("task")
    p.add_argument("--cores", type=int, help="default: the federated allocation")
    p.add_argument("--tiebreak", choices=TIE_BREAKS, default="lpf")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--early-completion", type=float, metavar="F",
                   help="run each node for a uniform fraction in [F, 1] of its bound")
    p.add_argument("--out", help="directory for traces and summary.json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="generate, collapse, analyze and summarize")
    p.add_argument("config")
    p.add_argument("--out", default="dagot-eval")
    p.add_argument("--seed", type=int)
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    p.add_argument("--bucket-width", type=float, default=4.0)
    p.add_argument("--jobs", type=int)
    p.add_argument("--record-timing", action="store_true")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.started_at = datetime.now(timezone.utc).isoformat()
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="dagot: %(message)s",
        stream=sys.stderr,
    )
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except UsageError as exc:
        print(f"dagot: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError) as exc:
        print(f"dagot: error: {exc}", file=sys.stderr)
        return 1
    log.debug("done in %.2fs", time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
