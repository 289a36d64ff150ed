"""Worst-case execution time and cache overhead (WCETO) functions.

A WCETO function maps a thread count ``eta >= 1`` to the cycles needed to run
``eta`` threads of one executable object on a single core. Functions are
concave and nondecreasing; the linear growth-factor form upper-bounds a
concave table.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Union


class WcetoRangeError(ValueError):
    """Thread count outside the domain of a WCETO function."""


@dataclass(frozen=True)
class LinearGrowth:
    """``c(eta) = c1 * (1 + factor * (eta - 1))``."""

    c1: float
    factor: float

    def __post_init__(self) -> None:
        if self.c1 <= 0:
            raise ValueError(f"c1 must be positive, got {self.c1}")
        if self.factor <= 0:
            raise ValueError(f"growth factor must be positive, got {self.factor}")

    def __call__(self, eta: int) -> float:
        if eta < 1:
            raise WcetoRangeError(f"thread count must be >= 1, got {eta}")
        if eta == 1:
            return self.c1
        return self.c1 * (1 + self.factor * (eta - 1))

    @property
    def collapsible(self) -> bool:
        return self.factor <= 1.0

    def to_json(self) -> dict:
        return {"c1": self.c1, "factor": self.factor}


@dataclass(frozen=True)
class Table:
    """Tabulated WCETO; ``values[k]`` holds ``c(k + 1)``."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ValueError("WCETO table must be nonempty")
        if not check_concave(self.values):
            raise ValueError(f"WCETO table is not increasing and concave: {self.values}")

    def __call__(self, eta: int) -> float:
        if eta < 1 or eta > len(self.values):
            raise WcetoRangeError(f"thread count {eta} outside table range 1..{len(self.values)}")
        return self.values[eta - 1]

    @property
    def collapsible(self) -> bool:
        return len(self.values) > 1 and fit_growth_factor(self.values) <= 1.0

    def to_json(self) -> dict:
        return {"values": list(self.values)}


@dataclass(frozen=True)
class Empty:
    """Zero-cost function of the structural source/sink nodes."""

    def __call__(self, eta: int) -> float:
        if eta < 1:
            raise WcetoRangeError(f"thread count must be >= 1, got {eta}")
        return 0

    @property
    def collapsible(self) -> bool:
        return False

    def to_json(self) -> dict:
        return {"empty": True}


WcetoFn = Union[LinearGrowth, Table, Empty]

EMPTY = Empty()


def evaluate(fn: WcetoFn, eta: int) -> float:
    return fn(eta)


def check_concave(values) -> bool:
    """True iff ``values`` is strictly increasing with nonpositive second differences."""
    values = list(values)
    if not values:
        return False
    diffs = [b - a for a, b in zip(values, values[1:])]
    if any(d <= 0 for d in diffs):
        return False
    return all(d2 <= d1 for d1, d2 in zip(diffs, diffs[1:]))


def fit_growth_factor(values) -> float:
    """Smallest factor whose linear bound covers every tabulated value.

    ``values[0]`` is the single-thread cost. The result can exceed 1 for
    measured tables whose growth is worse than linear; such objects are
    never collapsed.
    """
    values = list(values)
    if len(values) < 2:
        raise ValueError("need at least two tabulated thread counts")
    c1 = values[0]
    if c1 <= 0:
        raise ValueError("single-thread cost must be positive")
    return max((c - c1) / ((eta - 1) * c1) for eta, c in enumerate(values[1:], start=2))


def from_json(data: dict) -> WcetoFn:
    if data.get("empty"):
        return EMPTY
    if "values" in data:
        return Table(tuple(data["values"]))
    return LinearGrowth(data["c1"], data["factor"])


@dataclass(frozen=True)
class Benchmark:
    name: str
    growth_factor: float
    c1: float | None = None

    @property
    def collapsible(self) -> bool:
        return self.growth_factor <= 1.0

    def wceto(self, c1: float | None = None) -> LinearGrowth:
        c1 = self.c1 if c1 is None else c1
        if c1 is None:
            raise ValueError(f"benchmark {self.name!r} has no single-thread cost; pass c1")
        return LinearGrowth(c1, self.growth_factor)


def load_growth_factors(path: str | Path) -> list[Benchmark]:
    """Read a ``name,growth_factor,c1`` CSV; an empty ``c1`` cell means unknown."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            c1 = row.get("c1") or None
            rows.append(Benchmark(row["name"], float(row["growth_factor"]), float(c1) if c1 else None))
    return rows
