"""Scripted router providers.

No learned gating here: weights either come straight from a scenario file,
are synthesized from a world's semantics using each class's assigned expert
family, or are drawn at random for verification sweeps.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from .experts import CLASS_TIERS, ExpertKind, ExpertSpec
from .gating import DEFAULT_OMEGA_MIN, RouterOutput
from .grid import GridDims, GridError, WeightMap
from .world import DOMAINS, World


def expert_family(spec: ExpertSpec) -> str:
    """"M" for model-based experts, "NN" for the learned stand-ins."""
    fam = spec.params.get("family")
    if fam is not None:
        return str(fam)
    return "M" if spec.kind in (ExpertKind.GEOMETRIC, ExpertKind.CONSTANT) else "NN"


def _domain_vector(true_index: int, m: int, confidence: float) -> list[float]:
    if m == 1:
        return [1.0]
    rest = (1.0 - confidence) / (m - 1)
    return [confidence if i == true_index else rest for i in range(m)]


def scripted_router(
    dims: GridDims,
    domain_weights: Sequence[float],
    terrain_weights: Sequence[Sequence[float]],
    omega_min: float = DEFAULT_OMEGA_MIN,
) -> RouterOutput:
    """Uniform per-expert weight maps from a table of scalars."""
    dw = np.asarray(domain_weights, dtype=np.float64)
    if dw.sum() <= 0:
        raise GridError("domain weights sum to zero")
    stacks = tuple(
        tuple(WeightMap(np.full(dims.shape, max(float(w), omega_min))) for w in row)
        for row in terrain_weights
    )
    return RouterOutput(tuple(dw / dw.sum()), stacks)


def ground_truth_router(
    world: World,
    roster: Sequence[Sequence[ExpertSpec]],
    confidence: float = 0.97,
    assigned_weight: float = 0.95,
    omega_min: float = DEFAULT_OMEGA_MIN,
) -> RouterOutput:
    """Router that knows the world's domain and each pixel's class family.

    The true domain gets ``confidence``; inside each domain, experts of the
    family assigned to a pixel's class share ``assigned_weight`` and the others
    share the remainder.
    """
    if not 0.0 <= confidence <= 1.0 or not 0.0 <= assigned_weight <= 1.0:
        raise GridError("confidence and assigned_weight must lie in [0, 1]")
    m = len(roster)
    true_index = DOMAINS.index(world.domain_tag) if m == len(DOMAINS) else 0
    dw = _domain_vector(true_index, m, confidence)
    vocab = world.semantics.vocabulary
    is_m = np.array([CLASS_TIERS[n][1] == "M" for n in vocab])[world.semantics.labels]
    stacks = []
    for specs in roster:
        fams = [expert_family(s) for s in specs]
        n_m = sum(f == "M" for f in fams)
        n_nn = len(fams) - n_m
        maps = []
        for fam in fams:
            mine = is_m if fam == "M" else ~is_m
            n_same = n_m if fam == "M" else n_nn
            n_other = len(fams) - n_same
            hit = assigned_weight / n_same
            miss = (1.0 - assigned_weight) / n_other if n_other else 0.0
            w = np.where(mine, hit, miss if n_other else hit)
            maps.append(WeightMap(np.maximum(w, omega_min)))
        stacks.append(tuple(maps))
    return RouterOutput(tuple(dw), tuple(stacks))


def random_router(
    rng: np.random.Generator,
    dims: GridDims,
    counts: Sequence[int],
    omega_min: float = DEFAULT_OMEGA_MIN,
) -> RouterOutput:
    """Smooth random positive weight fields; occasionally one expert dominates."""
    dw = rng.dirichlet(np.ones(len(counts)))
    stacks = []
    sigma = max(1.0, min(dims.shape) / 5.0)
    for n in counts:
        maps = []
        boost = int(rng.integers(n)) if rng.random() < 0.3 else -1
        for j in range(n):
            field = gaussian_filter(rng.normal(size=dims.shape), sigma, mode="reflect")
            field = field / (np.abs(field).max() or 1.0)
            w = np.exp(rng.uniform(0.5, 3.0) * field) * rng.uniform(0.05, 1.0)
            if j == boost:
                w = w * rng.uniform(5.0, 50.0)
            maps.append(WeightMap(np.maximum(w, omega_min)))
        stacks.append(tuple(maps))
    return RouterOutput(tuple(dw), tuple(stacks))
