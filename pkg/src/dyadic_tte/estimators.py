"""Horvitz-Thompson estimators on aggregated dyadic data, plus difference in means.

All array functions reduce over the last axis, so a ``(reps, n)`` stack of
outcomes and assignments yields one estimate per rep.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .designs import Assignment, Design

Z95 = float(norm.ppf(0.975))


class DegenerateGroupError(ValueError):
    """The treated or control group inside the experiment is empty."""


def _check(p: float, pi: float) -> None:
    if not 0.0 < pi < 1.0:
        raise ValueError(f"HT estimators need 0 < pi < 1, got {pi}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")


def ht(values, V, W, p: float, pi: float):
    """(1/n)[Σ V W x / (p π) − Σ V (1 − W) x / (p (1 − π))]."""
    _check(p, pi)
    x = np.asarray(values, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    n = x.shape[-1]
    treated = (V * W * x).sum(axis=-1)
    control = (V * (1.0 - W) * x).sum(axis=-1)
    return (treated / (p * pi) - control / (p * (1.0 - pi))) / n


def ht_upstream(Y, assignment: Assignment, p: float, pi: float):
    """HT estimate from received outcomes ``Y``."""
    return ht(Y, assignment.V, assignment.W, p, pi)


def ht_diffusion(D, assignment: Assignment, p: float, pi: float):
    """HT estimate from the diffusion metric ``D``."""
    return ht(D, assignment.V, assignment.W, p, pi)


def ht_total(Y, D, assignment: Assignment, p: float, pi: float):
    return ht_upstream(Y, assignment, p, pi) + ht_diffusion(D, assignment, p, pi)


def diff_in_means(Y, assignment: Assignment) -> float:
    Y = np.asarray(Y, dtype=np.float64)
    t = (assignment.V == 1) & (assignment.W == 1)
    c = (assignment.V == 1) & (assignment.W == 0)
    if not t.any() or not c.any():
        raise DegenerateGroupError("difference in means needs treated and control units in the experiment")
    return float(Y[t].mean() - Y[c].mean())


def estimate_batch(Y, D, V, W, p: float, pi: float) -> dict[str, np.ndarray]:
    """All point estimates and the heuristic variance of ``tau`` for a stack of draws.

    DIM is NaN where a group is empty; ``var_tau`` is NaN unless both groups
    hold at least two units.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    D = np.atleast_2d(np.asarray(D, dtype=np.float64))
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    n = Y.shape[-1]
    tau1 = ht(Y, V, W, p, pi)
    tau2 = ht(D, V, W, p, pi)

    t = V * W
    c = V * (1.0 - W)
    n_t = t.sum(axis=-1)
    n_c = c.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        dim = (t * Y).sum(axis=-1) / n_t - (c * Y).sum(axis=-1) / n_c
        S = Y + D
        mean_t = (t * S).sum(axis=-1) / n_t
        mean_c = (c * S).sum(axis=-1) / n_c
        ss_t = (t * (S - mean_t[:, None]) ** 2).sum(axis=-1)
        ss_c = (c * (S - mean_c[:, None]) ** 2).sum(axis=-1)
        var_t = ss_t / (n_t - 1)
        var_c = ss_c / (n_c - 1)
    degenerate = (n_t == 0) | (n_c == 0)
    dim = np.where(degenerate, np.nan, dim)
    var_ok = (n_t >= 2) & (n_c >= 2)
    var_tau = n_t * var_t / (n * p * pi) ** 2 + n_c * var_c / (n * p * (1.0 - pi)) ** 2
    var_tau = np.where(var_ok, var_tau, np.nan)
    return {
        "tau1": tau1,
        "tau2": tau2,
        "tau": tau1 + tau2,
        "dim": dim,
        "var_tau": var_tau,
        "n_treated": n_t.astype(np.int64),
        "n_control": n_c.astype(np.int64),
        "n_in_experiment": V.sum(axis=-1).astype(np.int64),
        "degenerate": degenerate,
    }


@dataclass(frozen=True)
class EstimateReport:
    tau1: float
    tau2: float
    tau: float
    dim: float | None
    n_treated: int
    n_control: int
    n_in_experiment: int
    var_tau: float | None
    ci_low: float | None
    ci_high: float | None
    degenerate: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def report(Y, D, assignment: Assignment, design: Design) -> EstimateReport:
    """Point estimates for one draw with a heuristic 95% normal interval for ``tau``.

    The variance plugs the within-group sample variances of ``S = Y + D``
    into the Bernoulli HT variance and ignores cross-unit covariance. Treat
    the interval as a rough guide, not a calibrated one.
    """
    r = estimate_batch(Y, D, assignment.V, assignment.W, design.p, design.pi)
    tau = float(r["tau"][0])
    var = float(r["var_tau"][0])
    has_var = bool(np.isfinite(var))
    half = Z95 * np.sqrt(var) if has_var else None
    dim = float(r["dim"][0])
    return EstimateReport(
        tau1=float(r["tau1"][0]),
        tau2=float(r["tau2"][0]),
        tau=tau,
        dim=dim if np.isfinite(dim) else None,
        n_treated=int(r["n_treated"][0]),
        n_control=int(r["n_control"][0]),
        n_in_experiment=int(r["n_in_experiment"][0]),
        var_tau=var if has_var else None,
        ci_low=tau - half if has_var else None,
        ci_high=tau + half if has_var else None,
        degenerate=bool(r["degenerate"][0]),
    )
