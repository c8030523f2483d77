"""Closed-form expectations and biases of the HT estimators.

For a non-loop edge ``(i, j)`` every design enters only through

    f_ij = P(W_j = 1 | W_i = 1),

which is ``pi`` for a full-population experiment, ``p*pi`` for a
sub-population one, and ``pi`` or ``p*pi`` under two-stage cluster sampling
depending on whether ``i`` and ``j`` share a cluster. Then

    E[tau1] = (1/n) Σ (gamma + f zeta)
    E[tau2] = (1/n) Σ (beta  + f zeta)

A loop ``(i, i)`` adds ``beta + gamma + zeta`` to both, whatever the design.

Besides these per-edge ("exact") forms, each report carries an aggregate
form written with sums over all edges; for the two-stage design it uses one
overlap scalar σ̄ in place of the per-edge indicator. A second two-stage
variant (``extended``) carries extra ``beta σ̄`` / ``gamma σ̄`` terms; it is
reported so the enumeration oracle can show which form holds.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clustering import Clustering, overlap_stats, same_cluster
from .designs import Design, FullBernoulli, SubPopBernoulli, TwoStageCluster
from .dyadic_model import DyadicParams, true_tte
from .graph import DirectedGraph

ESTIMATORS = ("tau1", "tau2", "tau")
SIGMA_CHOICES = ("node", "edge", "zeta")


class TheoryError(ValueError):
    pass


@dataclass(frozen=True)
class TheoryReport:
    design: str
    pi: float
    p: float
    n: int
    tau_true: float
    exact: dict
    aggregate: dict
    aggregate_bias: float
    sum_beta: float
    sum_gamma: float
    sum_zeta: float
    sigma: float | None = None
    sigma_kind: str | None = None
    sigma_node: float | None = None
    sigma_edge: float | None = None
    sigma_zeta: float | None = None
    extended: dict | None = None
    extra: dict = field(default_factory=dict)

    def bias(self, estimator: str, form: str = "exact") -> float:
        return getattr(self, form)[estimator] - self.tau_true

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["bias_exact"] = {e: self.bias(e) for e in ESTIMATORS}
        d["bias_aggregate"] = {e: self.bias(e, "aggregate") for e in ESTIMATORS}
        return d


def _sums(g: DirectedGraph, params: DyadicParams) -> tuple[np.ndarray, float, float, float]:
    params.check(g)
    off = ~g.self_loop_mask
    return off, float(params.beta[off].sum()), float(params.gamma[off].sum()), float(params.zeta[off].sum())


def _exact(g: DirectedGraph, params: DyadicParams, f: np.ndarray) -> dict:
    off = ~g.self_loop_mask
    loop = float((params.beta + params.gamma + params.zeta)[~off].sum())
    fz = float((f[off] * params.zeta[off]).sum())
    t1 = (float(params.gamma[off].sum()) + fz + loop) / g.n
    t2 = (float(params.beta[off].sum()) + fz + loop) / g.n
    return {"tau1": t1, "tau2": t2, "tau": t1 + t2}


def _aggregate(n: int, sb: float, sg: float, sz: float, r: float) -> dict:
    """Aggregate form with a single interaction factor ``r`` multiplying Σζ."""
    t1 = (sg + r * sz) / n
    t2 = (sb + r * sz) / n
    return {"tau1": t1, "tau2": t2, "tau": t1 + t2}


def expected_full(g: DirectedGraph, params: DyadicParams, pi: float) -> TheoryReport:
    if not 0.0 < pi < 1.0:
        raise TheoryError("need 0 < pi < 1")
    _, sb, sg, sz = _sums(g, params)
    exact = _exact(g, params, np.full(g.n_edges, pi))
    return TheoryReport(
        design="full", pi=pi, p=1.0, n=g.n, tau_true=true_tte(g, params),
        exact=exact, aggregate=_aggregate(g.n, sb, sg, sz, pi),
        aggregate_bias=(2.0 * pi - 1.0) * sz / g.n,
        sum_beta=sb, sum_gamma=sg, sum_zeta=sz,
    )


def expected_subpop(g: DirectedGraph, params: DyadicParams, p: float, pi: float) -> TheoryReport:
    if not 0.0 < pi < 1.0 or not 0.0 < p <= 1.0:
        raise TheoryError("need 0 < p <= 1 and 0 < pi < 1")
    _, sb, sg, sz = _sums(g, params)
    exact = _exact(g, params, np.full(g.n_edges, p * pi))
    return TheoryReport(
        design="subpop", pi=pi, p=p, n=g.n, tau_true=true_tte(g, params),
        exact=exact, aggregate=_aggregate(g.n, sb, sg, sz, p * pi),
        aggregate_bias=-(1.0 - 2.0 * p * pi) * sz / g.n,
        sum_beta=sb, sum_gamma=sg, sum_zeta=sz,
    )


def expected_twostage(
    g: DirectedGraph,
    params: DyadicParams,
    p: float,
    pi: float,
    clustering: Clustering,
    sigma: str = "node",
    mode: str = "bernoulli-clusters",
) -> TheoryReport:
    """Two-stage cluster design with clusters included independently w.p. ``p``.

    ``sigma`` picks the overlap scalar substituted into the aggregate form:
    the node-averaged σ̄ (``node``), the share of within-cluster edges
    (``edge``), or that share weighted by ``zeta`` (``zeta``).
    """
    if mode != "bernoulli-clusters":
        raise TheoryError("closed forms hold for bernoulli-clusters sampling only; use Monte Carlo")
    if not 0.0 < pi < 1.0 or not 0.0 < p <= 1.0:
        raise TheoryError("need 0 < p <= 1 and 0 < pi < 1")
    if sigma not in SIGMA_CHOICES:
        raise TheoryError(f"sigma must be one of {SIGMA_CHOICES}")
    _, sb, sg, sz = _sums(g, params)
    s = same_cluster(g, clustering)
    exact = _exact(g, params, np.where(s, pi, p * pi))

    ov = overlap_stats(g, clustering, params.zeta) if (~g.self_loop_mask).any() else None
    values = {
        "node": ov.sigma_bar_node if ov else None,
        "edge": ov.sigma_edge if ov else None,
        "zeta": ov.sigma_edge_zeta if ov else None,
    }
    sig = values[sigma]
    if sig is None:
        # no non-loop edges or Σζ = 0: the aggregate terms vanish anyway
        sig = 0.0
    r = pi * (sig + (1.0 - sig) * p)
    aggregate = _aggregate(g.n, sb, sg, sz, r)
    extended = {
        "tau1": (sig * sb + sg + (sig + (1.0 - sig) * p * pi) * sz) / g.n,
        "tau2": (sb + sig * sg + (sig + (1.0 - sig) * p * pi) * sz) / g.n,
    }
    extended["tau"] = extended["tau1"] + extended["tau2"]
    return TheoryReport(
        design="twostage", pi=pi, p=p, n=g.n, tau_true=true_tte(g, params),
        exact=exact, aggregate=aggregate,
        aggregate_bias=-(1.0 - 2.0 * p * pi) * (1.0 - sig) * sz / g.n,
        sum_beta=sb, sum_gamma=sg, sum_zeta=sz,
        sigma=sig, sigma_kind=sigma,
        sigma_node=values["node"], sigma_edge=values["edge"], sigma_zeta=values["zeta"],
        extended=extended,
        extra={"k": clustering.k},
    )


def expected(g: DirectedGraph, params: DyadicParams, design: Design, sigma: str = "node") -> TheoryReport:
    if isinstance(design, FullBernoulli):
        return expected_full(g, params, design.pi)
    if isinstance(design, SubPopBernoulli):
        return expected_subpop(g, params, design.p, design.pi)
    if isinstance(design, TwoStageCluster):
        return expected_twostage(g, params, design.p, design.pi, design.clustering, sigma, design.mode)
    raise TheoryError(f"unsupported design {design!r}")


def self_loop_bias(g: DirectedGraph, params: DyadicParams) -> float:
    """Bias of ``tau`` at ``pi = 0.5`` contributed by self-loop dyads: (1/n) Σ_i (β_ii + γ_ii + ζ_ii)."""
    params.check(g)
    loops = g.self_loop_mask
    if not g.allow_self_loops or not loops.any():
        raise TheoryError("graph carries no self-loop dyads")
    return float((params.beta + params.gamma + params.zeta)[loops].sum()) / g.n


@dataclass(frozen=True)
class DominanceRecord:
    bias_tau: float
    bias_tau1: float
    in_scope: bool
    holds: bool


def bias_dominance(g: DirectedGraph, params: DyadicParams, p: float, pi: float) -> DominanceRecord:
    """Compare |bias(tau)| with |bias(tau1)| under a sub-population design.

    With nonnegative ``beta`` and ``zeta`` and ``p*pi <= 2/3`` the combined
    estimator is never worse; a violation inside that scope raises.
    """
    rep = expected_subpop(g, params, p, pi)
    b, b1 = rep.bias("tau"), rep.bias("tau1")
    in_scope = bool(np.all(params.beta >= 0) and np.all(params.zeta >= 0) and p * pi <= 2.0 / 3.0 + 1e-15)
    holds = abs(b) <= abs(b1) + 1e-12 * max(1.0, abs(b1))
    if in_scope and not holds:
        raise TheoryError(f"dominance violated in scope: |{b}| > |{b1}|")
    return DominanceRecord(b, b1, in_scope, holds)
