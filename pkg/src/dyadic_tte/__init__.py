"""Total-treatment-effect estimation from aggregated dyadic data under network interference."""

__version__ = "0.1.0"

from .clustering import Clustering, louvain, modularity, overlap_stats
from .designs import Assignment, FullBernoulli, SubPopBernoulli, TwoStageCluster, draw, marginals
from .dyadic_model import DyadicParams, ParamConfig, generate_params, outcomes, true_tte, z_value
from .estimators import diff_in_means, ht_diffusion, ht_total, ht_upstream, report
from .graph import DirectedGraph, parse_edge_list, stats

__all__ = [
    "Assignment", "Clustering", "DirectedGraph", "DyadicParams", "FullBernoulli", "ParamConfig",
    "SubPopBernoulli", "TwoStageCluster", "diff_in_means", "draw", "generate_params", "ht_diffusion",
    "ht_total", "ht_upstream", "louvain", "marginals", "modularity", "outcomes", "overlap_stats",
    "parse_edge_list", "report", "stats", "true_tte", "z_value",
]
