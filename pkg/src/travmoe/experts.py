"""Deterministic stand-in experts and the semantic cost table.

Experts turn world inputs (elevation, semantics, ground truth) into a
TravMap. Each carries a declared FLOP cost used for queue ordering and
savings accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

import numpy as np

from .grid import ElevationGrid, GridError, SemanticGrid, TravMap, VocabularyError

DEFAULT_FLOP_COST = 1.0

# Semantic vocabulary, grouped by cost tier. The last element of each tuple is
# the expert family that handles the class best: "M" (model-based) or "NN".
CLASS_TIERS: dict[str, tuple[str, str]] = {
    "sidewalk": ("c_free", "M"),
    "floor": ("c_free", "M"),
    "crosswalk": ("c_free", "M"),
    "bike_lane": ("c_free", "M"),
    "gravel": ("c_mid1", "NN"),
    "sand": ("c_mid1", "NN"),
    "snow": ("c_mid1", "NN"),
    "low_grass": ("c_mid1", "NN"),
    "road": ("c_mid2", "NN"),
    "parking": ("c_mid2", "NN"),
    "tall_grass": ("c_mid3", "NN"),
    "bush": ("c_mid3", "NN"),
    "dirt": ("c_mid3", "NN"),
    "person": ("c_obs", "M"),
    "curb": ("c_obs", "M"),
    "wall": ("c_obs", "M"),
    "obstacle": ("c_obs", "M"),
}
VOCABULARY: tuple[str, ...] = tuple(CLASS_TIERS)
TIERS = ("c_free", "c_mid1", "c_mid2", "c_mid3", "c_obs")


def assigned_family(name: str) -> str:
    try:
        return CLASS_TIERS[name][1]
    except KeyError:
        raise VocabularyError(f"unknown semantic class {name!r}") from None


@dataclass(frozen=True)
class TravCostTable:
    """Traversability value per cost tier; classes map onto tiers."""

    c_free: float = 1.0
    c_mid1: float = 0.7
    c_mid2: float = 0.6
    c_mid3: float = 0.4
    c_obs: float = 0.0
    overrides: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        tiers = [getattr(self, t) for t in TIERS]
        if any(not 0.0 <= v <= 1.0 for v in tiers):
            raise GridError(f"cost tiers must lie in [0, 1]: {tiers}")
        mids = tiers[1:4]
        if not all(self.c_free > m > self.c_obs for m in mids):
            raise GridError("cost tiers must satisfy c_free > c_mid* > c_obs")
        for name, v in self.overrides.items():
            if name not in CLASS_TIERS:
                raise VocabularyError(f"unknown semantic class {name!r}")
            if not 0.0 <= v <= 1.0:
                raise GridError(f"override for {name!r} outside [0, 1]")

    def value(self, name: str) -> float:
        if name in self.overrides:
            return float(self.overrides[name])
        try:
            tier = CLASS_TIERS[name][0]
        except KeyError:
            raise VocabularyError(f"unknown semantic class {name!r}") from None
        return float(getattr(self, tier))

    def lookup(self, vocabulary) -> np.ndarray:
        """Value array aligned with ``vocabulary`` ids."""
        return np.array([self.value(n) for n in vocabulary], dtype=np.float64)


class ExpertKind(str, Enum):
    GEOMETRIC = "geometric"
    SEMANTIC_TABLE = "semantic_table"
    NOISY_ORACLE = "noisy_oracle"
    CONSTANT = "constant"


@dataclass(frozen=True)
class ExpertId:
    domain_index: int
    terrain_index: int
    name: str

    def check(self, num_domains: int, num_terrains: int) -> None:
        if not (1 <= self.domain_index <= num_domains and 1 <= self.terrain_index <= num_terrains):
            raise GridError(
                f"expert {self.name!r} index ({self.domain_index}, {self.terrain_index}) "
                f"outside {num_domains}x{num_terrains}"
            )


@dataclass(frozen=True)
class ExpertSpec:
    id: ExpertId
    kind: ExpertKind
    flop_cost: float = DEFAULT_FLOP_COST
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", ExpertKind(self.kind))
        if not (self.flop_cost >= 0 and math.isfinite(self.flop_cost)):
            raise GridError(f"flop_cost must be finite and >= 0, got {self.flop_cost}")

    @property
    def name(self) -> str:
        return self.id.name


def expert_flop_cost(spec: ExpertSpec) -> float:
    return float(spec.flop_cost)


@dataclass(frozen=True)
class GeometricParams:
    max_slope: float = math.radians(30.0)
    max_step: float = 0.2

    def __post_init__(self):
        if not (self.max_slope > 0 and self.max_step > 0):
            raise GridError("geometric thresholds must be positive")


def _linear_penalty(measure: np.ndarray, threshold: float) -> np.ndarray:
    # 1 up to threshold, linear down to 0 at twice the threshold.
    return np.clip((2.0 * threshold - measure) / threshold, 0.0, 1.0)


def slope_angles(elev: ElevationGrid) -> np.ndarray:
    """Terrain slope in radians; central differences, one-sided at borders."""
    h = elev.heights
    cs = elev.cell_size
    gy = np.gradient(h, cs, axis=0) if h.shape[0] > 1 else np.zeros_like(h)
    gx = np.gradient(h, cs, axis=1) if h.shape[1] > 1 else np.zeros_like(h)
    return np.arctan(np.hypot(gx, gy))


def max_neighbor_step(elev: ElevationGrid) -> np.ndarray:
    """Largest absolute height difference to any 4-neighbour."""
    h = elev.heights
    step = np.zeros_like(h)
    dv = np.abs(np.diff(h, axis=0))
    dh = np.abs(np.diff(h, axis=1))
    step[1:, :] = np.maximum(step[1:, :], dv)
    step[:-1, :] = np.maximum(step[:-1, :], dv)
    step[:, 1:] = np.maximum(step[:, 1:], dh)
    step[:, :-1] = np.maximum(step[:, :-1], dh)
    return step


def geometric_estimate(elev: ElevationGrid, params: GeometricParams | None = None) -> TravMap:
    params = params or GeometricParams()
    slope_score = _linear_penalty(slope_angles(elev), params.max_slope)
    step_score = _linear_penalty(max_neighbor_step(elev), params.max_step)
    return TravMap(np.minimum(slope_score, step_score))


def semantic_estimate(sem: SemanticGrid, table: TravCostTable | None = None) -> TravMap:
    table = table or TravCostTable()
    return TravMap(table.lookup(sem.vocabulary)[sem.labels])


def noisy_oracle_estimate(gt: TravMap, noise_std: float, seed: int) -> TravMap:
    if noise_std < 0:
        raise GridError(f"noise_std must be >= 0, got {noise_std}")
    if noise_std == 0:
        return gt
    rng = np.random.default_rng(seed)
    noisy = gt.values + rng.normal(0.0, noise_std, size=gt.shape)
    return TravMap(np.clip(noisy, 0.0, 1.0))


def constant_estimate(shape: tuple[int, int], value: float) -> TravMap:
    return TravMap(np.full(shape, float(value)))


def evaluate_expert(spec: ExpertSpec, world, seed: int = 0) -> TravMap:
    """Run one expert against a world (anything with elevation/semantics/gt_trav).

    ``seed`` only matters for the noisy oracle; it is combined with the
    expert's own ``seed`` parameter so two oracles on one world differ.
    """
    p = spec.params
    if spec.kind is ExpertKind.GEOMETRIC:
        gp = GeometricParams(
            max_slope=float(p.get("max_slope", GeometricParams.max_slope)),
            max_step=float(p.get("max_step", GeometricParams.max_step)),
        )
        return geometric_estimate(world.elevation, gp)
    if spec.kind is ExpertKind.SEMANTIC_TABLE:
        table = p.get("table")
        if table is not None and not isinstance(table, TravCostTable):
            table = TravCostTable(**table)
        return semantic_estimate(world.semantics, table)
    if spec.kind is ExpertKind.NOISY_ORACLE:
        s = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(p.get("seed", 0)) & 0xFFFFFFFF])
        return noisy_oracle_estimate(
            world.gt_trav, float(p.get("noise_std", 0.1)), int(s.generate_state(1)[0])
        )
    if spec.kind is ExpertKind.CONSTANT:
        return constant_estimate(world.gt_trav.shape, float(p.get("value", 1.0)))
    raise GridError(f"unsupported expert kind {spec.kind!r}")
