"""Randomization designs and realized assignments.

``V`` flags units in the experiment, ``W`` flags treated units; units outside
the experiment always get control, so ``V_i = 0`` implies ``W_i = 0``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Union

import numpy as np

from .clustering import Clustering

TWO_STAGE_MODES = ("bernoulli-clusters", "fixed-fraction")


class DesignError(ValueError):
    pass


def _check_pi(pi: float, strict: bool) -> None:
    if not 0.0 <= pi <= 1.0:
        raise DesignError(f"pi must lie in [0, 1], got {pi}")
    if strict and pi in (0.0, 1.0):
        raise DesignError("estimators need 0 < pi < 1")


def _check_p(p: float) -> None:
    if not 0.0 < p <= 1.0:
        raise DesignError(f"p must lie in (0, 1], got {p}")


@dataclass(frozen=True)
class Assignment:
    V: np.ndarray
    W: np.ndarray

    def __post_init__(self) -> None:
        V = np.asarray(self.V, dtype=np.int8)
        W = np.asarray(self.W, dtype=np.int8)
        if V.shape != W.shape:
            raise DesignError("V and W must have equal shape")
        if np.any(W > V):
            raise DesignError("a unit outside the experiment is treated")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "W", W)

    @property
    def n(self) -> int:
        return int(self.V.shape[-1])


@dataclass(frozen=True)
class FullBernoulli:
    pi: float

    def __post_init__(self) -> None:
        _check_pi(self.pi, strict=False)

    @property
    def p(self) -> float:
        return 1.0

    @property
    def name(self) -> str:
        return "full"

    def draw(self, n: int, rng: np.random.Generator) -> Assignment:
        return Assignment(np.ones(n, dtype=np.int8), rng.random(n) < self.pi)


@dataclass(frozen=True)
class SubPopBernoulli:
    p: float
    pi: float

    def __post_init__(self) -> None:
        _check_p(self.p)
        _check_pi(self.pi, strict=False)

    @property
    def name(self) -> str:
        return "subpop"

    def draw(self, n: int, rng: np.random.Generator) -> Assignment:
        V = rng.random(n) < self.p
        W = V & (rng.random(n) < self.pi)
        return Assignment(V, W)


@dataclass(frozen=True, eq=False)
class TwoStageCluster:
    """Sample clusters into the experiment, then Bernoulli(pi) within them.

    ``bernoulli-clusters`` includes each cluster independently with
    probability ``p``; ``fixed-fraction`` samples exactly ``round(p*k)``
    clusters without replacement.
    """

    p: float
    pi: float
    clustering: Clustering
    mode: str = "bernoulli-clusters"

    def __post_init__(self) -> None:
        _check_p(self.p)
        _check_pi(self.pi, strict=False)
        if self.mode not in TWO_STAGE_MODES:
            raise DesignError(f"unknown cluster sampling mode {self.mode!r}")

    @property
    def name(self) -> str:
        return "twostage"

    def draw(self, n: int, rng: np.random.Generator) -> Assignment:
        c = self.clustering
        if c.n != n:
            raise DesignError(f"clustering covers {c.n} nodes, expected {n}")
        if self.mode == "bernoulli-clusters":
            included = rng.random(c.k) < self.p
        else:
            included = np.zeros(c.k, dtype=bool)
            included[rng.choice(c.k, int(round(self.p * c.k)), replace=False)] = True
        V = included[c.assignment]
        W = V & (rng.random(n) < self.pi)
        return Assignment(V, W)


Design = Union[FullBernoulli, SubPopBernoulli, TwoStageCluster]


def draw(design: Design, n: int, rng: np.random.Generator) -> Assignment:
    return design.draw(n, rng)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, key...)``; the same key always gives the same stream."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


@dataclass(frozen=True)
class Marginals:
    p_v: float
    p_w: float
    pair_same: float
    pair_diff: float


def marginals(design: Design) -> Marginals:
    """Closed-form inclusion and treatment probabilities.

    ``pair_same``/``pair_diff`` give ``P(W_i = 1, W_j = 1)`` for distinct
    units in the same or in different clusters. Designs without clusters
    report the same value for both.
    """
    pi = design.pi
    if isinstance(design, FullBernoulli):
        return Marginals(1.0, pi, pi * pi, pi * pi)
    p = design.p
    if isinstance(design, SubPopBernoulli):
        return Marginals(p, p * pi, (p * pi) ** 2, (p * pi) ** 2)
    if design.mode != "bernoulli-clusters":
        raise DesignError("closed-form marginals exist only for bernoulli-clusters sampling")
    return Marginals(p, p * pi, p * pi * pi, (p * pi) ** 2)


def write_assignment(a: Assignment, stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["node", "V", "W"])
    for i, (v, t) in enumerate(zip(a.V.tolist(), a.W.tolist())):
        w.writerow([i, v, t])


def read_assignment(stream: IO[str]) -> Assignment:
    rows = sorted((int(r["node"]), int(r["V"]), int(r["W"])) for r in csv.DictReader(stream))
    if [r[0] for r in rows] != list(range(len(rows))):
        raise DesignError("assignment file must list nodes 0..n-1 once each")
    arr = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
    return Assignment(arr[:, 1], arr[:, 2])
