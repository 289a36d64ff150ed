"""Cache-aware node collapse for DAG-OT parallel real-time tasks."""

from .collapse import beneficial, collapse, dagot_reduce, optimal_collapse_oracle
from .federated import APPROACHES, TaskSet, Verdict, analyze, allocate_cores
from .taskgraph import Node, Task, TaskGraph, critical_path, utilization, workload
from .wceto import EMPTY, Empty, LinearGrowth, Table, fit_growth_factor

__version__ = "0.1.0"

__all__ = [
    "APPROACHES",
    "EMPTY",
    "Empty",
    "LinearGrowth",
    "Node",
    "Table",
    "Task",
    "TaskGraph",
    "TaskSet",
    "Verdict",
    "allocate_cores",
    "analyze",
    "beneficial",
    "collapse",
    "critical_path",
    "dagot_reduce",
    "fit_growth_factor",
    "optimal_collapse_oracle",
    "utilization",
    "workload",
]
