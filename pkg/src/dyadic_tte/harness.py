"""Monte Carlo engine, parameter sweeps and synthetic graphs.

Rep ``r`` of grid point ``g`` always draws from the substream
``(seed, g, r)`` and reps are processed in fixed-size chunks, so results do
not depend on how many worker processes run the chunks.
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Sequence

import networkx as nx
import numpy as np
from scipy import sparse

from . import __version__
from .clustering import Clustering
from .designs import Design, FullBernoulli, SubPopBernoulli, TwoStageCluster, substream
from .dyadic_model import DyadicParams, true_tte
from .estimators import Z95, estimate_batch
from .graph import DirectedGraph
from .theory import TheoryError, expected

REP_CHUNK = 64
MC_ESTIMATORS = ("tau1", "tau2", "tau", "dim")
SWEEP_COLUMNS = (
    "design", "grid_value", "estimator", "tau_true", "emp_mean", "emp_se", "bias", "rel_bias",
    "theory_bias_exact", "theory_bias_paper", "z", "reps", "degenerate", "seed",
)


class OutcomeOperator:
    """Batched ``Y``/``D`` evaluation through sparse products.

    Expanding the bilinear dyad model per node gives

        Y = a_in  + g_in * W  + W @ B + W * (W @ Z)
        D = a_out + b_out * W + W @ G.T + W * (W @ Z.T)

    with ``B``, ``G``, ``Z`` the n x n matrices holding ``beta``, ``gamma``,
    ``zeta`` at ``(src, dst)``. A loop ``(i, i)`` sits on the diagonal and
    picks up ``W_i * W_i = W_i`` as it should.
    """

    def __init__(self, g: DirectedGraph, params: DyadicParams) -> None:
        params.check(g)
        n = g.n

        def mat(vals):
            return sparse.csr_matrix((vals, (g.src, g.dst)), shape=(n, n))

        self.a_in = np.bincount(g.dst, params.alpha, n)
        self.g_in = np.bincount(g.dst, params.gamma, n)
        self.a_out = np.bincount(g.src, params.alpha, n)
        self.b_out = np.bincount(g.src, params.beta, n)
        self.B = mat(params.beta)
        self.Gt = mat(params.gamma).T.tocsr()
        self.Z = mat(params.zeta)
        self.Zt = self.Z.T.tocsr()

    def __call__(self, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        W = np.asarray(W, dtype=np.float64)
        Y = self.a_in + self.g_in * W + np.asarray(W @ self.B) + W * np.asarray(W @ self.Z)
        D = self.a_out + self.b_out * W + np.asarray(W @ self.Gt) + W * np.asarray(W @ self.Zt)
        return Y, D


def _run_chunk(op: OutcomeOperator, n: int, design: Design, seed: int, stream: int,
               lo: int, hi: int) -> dict[str, np.ndarray]:
    V = np.empty((hi - lo, n), dtype=np.int8)
    W = np.empty((hi - lo, n), dtype=np.int8)
    for k, r in enumerate(range(lo, hi)):
        a = design.draw(n, substream(seed, stream, r))
        V[k], W[k] = a.V, a.W
    Y, D = op(W)
    return estimate_batch(Y, D, V, W, design.p, design.pi)


def simulate(g: DirectedGraph, params: DyadicParams, design: Design, reps: int, seed: int,
             stream: int = 0, workers: int = 1) -> dict[str, np.ndarray]:
    """Per-rep estimates, in rep order, for ``reps`` independent draws."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    op = OutcomeOperator(g, params)
    bounds = [(lo, min(lo + REP_CHUNK, reps)) for lo in range(0, reps, REP_CHUNK)]
    if workers <= 1 or len(bounds) == 1:
        parts = [_run_chunk(op, g.n, design, seed, stream, lo, hi) for lo, hi in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_run_chunk, op, g.n, design, seed, stream, lo, hi) for lo, hi in bounds]
            parts = [f.result() for f in futs]
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


@dataclass
class EstimatorSummary:
    mean: float
    se: float
    bias: float
    rel_bias: float | None
    theory_bias_exact: float | None
    theory_bias_paper: float | None
    z: float | None
    n_used: int


@dataclass
class McSummary:
    design: str
    p: float
    pi: float
    reps: int
    seed: int
    stream: int
    tau_true: float
    degenerate: int
    wall_time: float
    estimators: dict = field(default_factory=dict)
    ci_coverage: float | None = None

    def __getitem__(self, name: str) -> EstimatorSummary:
        return self.estimators[name]

    def as_dict(self) -> dict:
        return asdict(self)


def summarize(draws: dict[str, np.ndarray], tau: float, theory=None) -> dict[str, EstimatorSummary]:
    out = {}
    for name in MC_ESTIMATORS:
        x = draws[name]
        x = x[np.isfinite(x)]
        if x.size == 0:
            continue
        mean = float(np.mean(x))
        se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else float("nan")
        bias = mean - tau
        tb_exact = tb_aggregate = z = None
        if theory is not None and name != "dim":
            tb_exact = theory.bias(name)
            tb_aggregate = theory.aggregate_bias if name == "tau" else theory.bias(name, "aggregate")
            if se > 0:
                z = (bias - tb_exact) / se
            elif se == 0:
                z = 0.0 if bias == tb_exact else math.copysign(math.inf, bias - tb_exact)
        rel = bias / tau if tau != 0 else None
        out[name] = EstimatorSummary(mean, se, bias, rel, tb_exact, tb_aggregate, z, int(x.size))
    return out


def _theory_for(g, params, design):
    try:
        return expected(g, params, design)
    except TheoryError:
        return None


def monte_carlo(g: DirectedGraph, params: DyadicParams, design: Design, reps: int, seed: int,
                stream: int = 0, workers: int = 1) -> McSummary:
    t0 = time.perf_counter()
    draws = simulate(g, params, design, reps, seed, stream, workers)
    tau = true_tte(g, params)
    theory = _theory_for(g, params, design)
    coverage = None
    ok = np.isfinite(draws["var_tau"])
    if theory is not None and ok.any():
        half = Z95 * np.sqrt(draws["var_tau"][ok])
        target = theory.exact["tau"]
        t = draws["tau"][ok]
        coverage = float(np.mean((t - half <= target) & (target <= t + half)))
    return McSummary(
        design=design.name, p=design.p, pi=design.pi, reps=reps, seed=seed, stream=stream,
        tau_true=tau, degenerate=int(draws["degenerate"].sum()),
        wall_time=time.perf_counter() - t0,
        estimators=summarize(draws, tau, theory), ci_coverage=coverage,
    )


@dataclass
class SweepSpec:
    """A grid of designs sharing graph, parameters and seed.

    ``design`` is ``full``, ``subpop`` or ``twostage``; ``vary`` names the
    swept probability (``pi`` or ``p``) and the other one is held at the
    fixed value.
    """

    design: str
    grid: Sequence[float]
    reps: int
    seed: int
    vary: str = ""
    pi: float = 0.5
    p: float = 1.0
    clustering: Clustering | None = None
    mode: str = "bernoulli-clusters"

    def __post_init__(self) -> None:
        if not self.grid:
            raise ValueError("sweep grid is empty")
        if self.design not in ("full", "subpop", "twostage"):
            raise ValueError(f"unknown design family {self.design!r}")
        if not self.vary:
            self.vary = "pi" if self.design == "full" else "p"
        if self.vary not in ("pi", "p") or (self.design == "full" and self.vary == "p"):
            raise ValueError(f"cannot vary {self.vary!r} for design {self.design!r}")
        if self.design == "twostage" and self.clustering is None:
            raise ValueError("two-stage sweep needs a clustering")

    def make_design(self, value: float) -> Design:
        pi = value if self.vary == "pi" else self.pi
        p = value if self.vary == "p" else self.p
        if self.design == "full":
            return FullBernoulli(pi)
        if self.design == "subpop":
            return SubPopBernoulli(p, pi)
        return TwoStageCluster(p, pi, self.clustering, self.mode)

    def describe(self) -> dict:
        d = {k: getattr(self, k) for k in ("design", "vary", "pi", "p", "reps", "seed", "mode")}
        d["grid"] = list(self.grid)
        if self.clustering is not None:
            d["clusters"] = self.clustering.k
        return d


def sweep(g: DirectedGraph, params: DyadicParams, spec: SweepSpec, workers: int = 1) -> list[McSummary]:
    return [
        monte_carlo(g, params, spec.make_design(v), spec.reps, spec.seed, stream=i, workers=workers)
        for i, v in enumerate(spec.grid)
    ]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def sweep_rows(spec: SweepSpec, summaries: Sequence[McSummary]) -> list[dict]:
    rows = []
    for value, s in zip(spec.grid, summaries):
        for name, e in s.estimators.items():
            rows.append({
                "design": s.design, "grid_value": float(value), "estimator": name, "tau_true": s.tau_true,
                "emp_mean": e.mean, "emp_se": e.se, "bias": e.bias, "rel_bias": e.rel_bias,
                "theory_bias_exact": e.theory_bias_exact, "theory_bias_paper": e.theory_bias_paper,
                "z": e.z, "reps": e.n_used, "degenerate": s.degenerate, "seed": s.seed,
            })
    return rows


def rows_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def manifest(g: DirectedGraph, params: DyadicParams | None, spec: dict, seed: int | None) -> dict:
    return {
        "created": datetime.now(timezone.utc).isoformat(),
        "graph_sha256": g.fingerprint(),
        "graph_meta": {k: v for k, v in g.meta.items() if isinstance(v, (int, float, str, bool))},
        "params_sha256": params.fingerprint() if params is not None else None,
        "spec": spec,
        "seed": seed,
        "versions": {"dyadic_tte": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }


def write_manifest(path, info: dict) -> None:
    with open(path, "w") as fh:
        json.dump(info, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def generate_synthetic(kind: str, n: int, avg_degree: float, seed: int, exponent: float = 2.5) -> DirectedGraph:
    """Symmetrized random graph with roughly ``avg_degree`` neighbours per node.

    ``erdos_renyi`` is G(n, avg_degree/(n-1)). ``config_powerlaw`` draws a
    Pareto degree sequence with the given exponent, scaled to the target
    mean and capped at ``n - 1``, and wires it with the configuration model;
    loops and parallel edges are dropped, so the realised mean is a little
    below target.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if not 0 <= avg_degree < n:
        raise ValueError(f"average degree {avg_degree} infeasible for n={n}")
    if avg_degree == 0:
        return DirectedGraph(n, np.empty(0, np.int64), np.empty(0, np.int64), np.arange(n),
                             meta={"kind": kind, "seed": seed})
    if kind == "erdos_renyi":
        G = nx.fast_gnp_random_graph(n, avg_degree / (n - 1), seed=seed)
    elif kind == "config_powerlaw":
        rng = np.random.default_rng(seed)
        shape = exponent - 1.0
        if shape <= 1.0:
            raise ValueError("exponent must exceed 2 for a finite mean degree")
        tail = (1.0 - rng.random(n)) ** (-1.0 / shape)

        def seq(scale):
            return np.minimum(np.round(scale * tail), n - 1)

        # the cap at n - 1 trims the mean; find the scale that restores it
        lo, hi = 0.0, float(avg_degree)
        while seq(hi).mean() < avg_degree and hi < 1e6:
            hi *= 2.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if seq(mid).mean() < avg_degree else (lo, mid)
        deg = seq(hi).astype(np.int64)
        if deg.sum() % 2:
            deg[int(np.argmax(deg))] -= 1
        G = nx.Graph(nx.configuration_model(deg.tolist(), seed=seed))
        G.remove_edges_from(list(nx.selfloop_edges(G)))
    else:
        raise ValueError(f"unknown graph kind {kind!r}")
    und = np.asarray(sorted(G.edges()), dtype=np.int64).reshape(-1, 2)
    src = np.concatenate([und[:, 0], und[:, 1]])
    dst = np.concatenate([und[:, 1], und[:, 0]])
    return DirectedGraph(n, src, dst, np.arange(n), meta={"kind": kind, "seed": seed, "symmetrized": True})
