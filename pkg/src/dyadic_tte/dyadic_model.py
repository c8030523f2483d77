"""Bilinear dyadic potential-outcome model.

Every directed edge ``(i, j)`` carries an outcome

    z_ij(W) = alpha_ij + beta_ij * W_i + gamma_ij * W_j + zeta_ij * W_i * W_j

A node's outcome ``Y_j`` sums the dyads it receives and its diffusion metric
``D_j`` sums the dyads it sends. Non-edges carry ``z = 0``. A self-loop edge
``(i, i)`` is evaluated at ``(W_i, W_i)`` and counts toward both ``Y_i`` and
``D_i``.
"""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from .graph import DirectedGraph

COEFFICIENTS = ("alpha", "beta", "gamma", "zeta")


class ParamsError(ValueError):
    pass


@dataclass(frozen=True)
class ParamConfig:
    """How edge coefficients are generated.

    ``regime`` is ``uniform``, ``bernoulli`` or ``constants``. For ``uniform``
    each entry of ``values`` is a ``(low, high)`` pair (equal bounds give a
    constant); for ``bernoulli`` it is a success probability; for
    ``constants`` it is the value itself.
    """

    regime: str
    values: dict

    @classmethod
    def uniform_default(cls) -> "ParamConfig":
        return cls("uniform", {"alpha": (1.0, 1.0), "beta": (0.0, 0.5), "gamma": (0.0, 1.0), "zeta": (0.0, 0.5)})

    @classmethod
    def bernoulli_default(cls) -> "ParamConfig":
        return cls("bernoulli", {"alpha": 0.0, "beta": 0.25, "gamma": 0.5, "zeta": 0.25})

    @classmethod
    def constants(cls, alpha: float, beta: float, gamma: float, zeta: float) -> "ParamConfig":
        return cls("constants", {"alpha": alpha, "beta": beta, "gamma": gamma, "zeta": zeta})

    @classmethod
    def named(cls, name: str) -> "ParamConfig":
        table = {"uniform": cls.uniform_default, "bernoulli": cls.bernoulli_default}
        try:
            return table[name]()
        except KeyError:
            raise ParamsError(f"unknown parameter regime {name!r}") from None


@dataclass(frozen=True, eq=False)
class DyadicParams:
    """Per-edge coefficients aligned with a graph's canonical edge order."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    zeta: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        arrays = [np.ascontiguousarray(getattr(self, c), dtype=np.float64) for c in COEFFICIENTS]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise ParamsError("coefficient arrays must be 1-d and equally long")
        for name, a in zip(COEFFICIENTS, arrays):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n_edges(self) -> int:
        return int(self.alpha.size)

    def check(self, g: DirectedGraph) -> None:
        if self.n_edges != g.n_edges:
            raise ParamsError(f"params hold {self.n_edges} tuples but the graph has {g.n_edges} edges")

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for c in COEFFICIENTS:
            h.update(getattr(self, c).tobytes())
        return h.hexdigest()

    def scaled(self, c: float) -> "DyadicParams":
        return DyadicParams(*(c * getattr(self, k) for k in COEFFICIENTS), meta=dict(self.meta))


@dataclass(frozen=True)
class OutcomeVectors:
    Y: np.ndarray
    D: np.ndarray


def generate_params(g: DirectedGraph, config: ParamConfig, seed: int) -> DyadicParams:
    """Draw one coefficient tuple per edge, coefficient by coefficient in edge order."""
    rng = np.random.default_rng(seed)
    m = g.n_edges
    out = {}
    for name in COEFFICIENTS:
        spec = config.values[name]
        if config.regime == "uniform":
            lo, hi = spec
            out[name] = np.full(m, float(lo)) if lo == hi else rng.uniform(lo, hi, m)
        elif config.regime == "bernoulli":
            out[name] = (rng.random(m) < spec).astype(np.float64)
        elif config.regime == "constants":
            out[name] = np.full(m, float(spec))
        else:
            raise ParamsError(f"unknown regime {config.regime!r}")
    return DyadicParams(**out, meta={"regime": config.regime, "values": config.values, "seed": seed})


def z_value(g: DirectedGraph, params: DyadicParams, i: int, j: int, w_i: int, w_j: int) -> float:
    """Outcome of edge ``(i, j)`` under treatments ``(w_i, w_j)``."""
    try:
        e = g.edge_index(i, j)
    except KeyError:
        raise ParamsError(f"({i}, {j}) is not bound to a coefficient tuple") from None
    return float(params.alpha[e] + params.beta[e] * w_i + params.gamma[e] * w_j + params.zeta[e] * w_i * w_j)


def edge_outcomes(g: DirectedGraph, params: DyadicParams, W: np.ndarray) -> np.ndarray:
    """``z`` for every edge; ``W`` may be ``(n,)`` or a batch ``(reps, n)``."""
    W = np.asarray(W, dtype=np.float64)
    ws = W[..., g.src]
    wd = W[..., g.dst]
    return params.alpha + params.beta * ws + params.gamma * wd + params.zeta * (ws * wd)


def outcomes(g: DirectedGraph, params: DyadicParams, W) -> OutcomeVectors:
    W = np.asarray(W)
    if W.shape != (g.n,):
        raise ValueError(f"W must have shape ({g.n},), got {W.shape}")
    params.check(g)
    z = edge_outcomes(g, params, W)
    return OutcomeVectors(np.bincount(g.dst, z, g.n), np.bincount(g.src, z, g.n))


def true_tte(g: DirectedGraph, params: DyadicParams) -> float:
    """Total treatment effect: mean over nodes of ``Y(1) − Y(0)``, via the edge sum."""
    params.check(g)
    if g.n == 0:
        return 0.0
    return float(np.sum(params.beta + params.gamma + params.zeta)) / g.n


def read_params(stream: IO[str], g: DirectedGraph) -> DyadicParams:
    """Read ``src,dst,alpha,beta,gamma,zeta`` rows (dense node ids)."""
    reader = csv.DictReader(stream)
    missing_cols = {"src", "dst", *COEFFICIENTS} - set(reader.fieldnames or [])
    if missing_cols:
        raise ParamsError(f"parameter file lacks columns {sorted(missing_cols)}")
    vals = np.full((g.n_edges, 4), np.nan)
    seen = np.zeros(g.n_edges, dtype=bool)
    for row in reader:
        i, j = int(row["src"]), int(row["dst"])
        try:
            e = g.edge_index(i, j)
        except (KeyError, IndexError):
            raise ParamsError(f"parameter row for ({i}, {j}) which is not an edge") from None
        vals[e] = [float(row[c]) for c in COEFFICIENTS]
        seen[e] = True
    if not seen.all():
        absent = [(int(g.src[e]), int(g.dst[e])) for e in np.flatnonzero(~seen)]
        preview = ", ".join(map(str, absent[:10]))
        raise ParamsError(f"{len(absent)} edge(s) without coefficients: {preview}{' ...' if len(absent) > 10 else ''}")
    return DyadicParams(*vals.T, meta={"regime": "file"})


def write_params(g: DirectedGraph, params: DyadicParams, stream: IO[str]) -> None:
    params.check(g)
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["src", "dst", *COEFFICIENTS])
    cols = [getattr(params, c).tolist() for c in COEFFICIENTS]
    for e, (s, d) in enumerate(zip(g.src.tolist(), g.dst.tolist())):
        w.writerow([s, d, *(repr(c[e]) for c in cols)])


def write_outcomes(out: OutcomeVectors, stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["node", "Y", "D"])
    for i, (y, d) in enumerate(zip(out.Y.tolist(), out.D.tolist())):
        w.writerow([i, repr(y), repr(d)])
