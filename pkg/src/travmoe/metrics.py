"""Evaluation metrics: path-aligned error, map error, path quality ratio, savings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .experts import ExpertSpec, expert_flop_cost
from .gating import GatingTrace
from .grid import GridError, TravMap, mse
from .planner import PrimitivePlanner, Trajectory


class MetricError(GridError):
    pass


@dataclass(frozen=True)
class ScenarioMetrics:
    e_p: float
    e_m: float
    q_p: float
    flops_used: float
    flops_full: float
    savings_fraction: float
    experts_activated: int


def metric_e_p(t_est: TravMap, t_gt: TravMap, planner: PrimitivePlanner) -> float:
    """Mean over candidates of the squared gap in traversability score."""
    if t_est.shape != t_gt.shape:
        raise MetricError("map shapes differ")
    if not planner.paths:
        raise MetricError("no projectable primitives")
    est = planner.trav_scores(t_est)
    gt = planner.trav_scores(t_gt)
    return float(np.sum((est - gt) ** 2) / len(gt))


def metric_e_m(t_est: TravMap, t_gt: TravMap) -> float:
    return mse(t_est, t_gt)


def normalized_objective(planner: PrimitivePlanner, traj: Trajectory, t: TravMap) -> float:
    """Planner objective of candidate ``traj`` on ``t``, rescaled by 1 + lambda into [0, 1]."""
    costs = planner.candidate_costs(t)
    return float(costs[planner.index_of(traj)]) / (1.0 + planner.config.lam)


def path_quality_ratio(f_est: float, f_gt: float) -> float:
    """eta(est) / eta(gt) with eta = 1 - f."""
    eta_gt = 1.0 - f_gt
    if eta_gt <= 0.0:
        raise MetricError("ground-truth path quality is zero; Q_p undefined")
    return (1.0 - f_est) / eta_gt


def metric_q_p(est_path: Trajectory | None, planner: PrimitivePlanner, t_gt: TravMap) -> float:
    """Quality of ``est_path`` relative to the optimal candidate, both scored on ``t_gt``."""
    gt_best = planner.plan(t_gt).best
    if gt_best is None:
        raise MetricError("no feasible ground-truth path")
    f_gt = normalized_objective(planner, gt_best, t_gt)
    if est_path is None:
        return 0.0
    return path_quality_ratio(normalized_objective(planner, est_path, t_gt), f_gt)


@dataclass(frozen=True)
class Savings:
    flops_used: float
    flops_full: float
    savings_fraction: float


def savings(trace: GatingTrace, roster: Sequence[ExpertSpec]) -> Savings:
    costs = {s.name: expert_flop_cost(s) for s in roster}
    used = sum(costs[name] for name in trace.activated)
    full = sum(costs.values())
    frac = 1.0 - used / full if full > 0 else 0.0
    return Savings(used, full, frac)
