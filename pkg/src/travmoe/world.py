"""Synthetic worlds: elevation + semantics, ground truth, and world files."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
import yaml
from scipy.ndimage import gaussian_filter

from .experts import (
    VOCABULARY,
    GeometricParams,
    TravCostTable,
    geometric_estimate,
    semantic_estimate,
)
from .grid import (
    ElevationGrid,
    GridDims,
    GridError,
    SemanticGrid,
    TravMap,
    check_same_dims,
)
from .planner import PROFILE_HORIZONS, GridFrame, PlannerConfig, Pose, graph_plan

WORLD_FORMAT = "travmoe-world/1"
REACH_THETA = 0.25
MIN_DIM = 8
# Horizon spans this fraction of the shorter grid side at the profile's cell size.
HORIZON_FRACTION = 0.5


class WorldGenerationError(GridError):
    pass


class Domain(str, Enum):
    INDOOR = "indoor"
    STRUCTURED_OUTDOOR = "structured_outdoor"
    UNSTRUCTURED_OUTDOOR = "unstructured_outdoor"


DOMAINS = tuple(Domain)


@dataclass(frozen=True)
class World:
    elevation: ElevationGrid
    semantics: SemanticGrid
    gt_trav: TravMap
    start: Pose
    goal: tuple[float, float, float]
    domain_tag: Domain
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "domain_tag", Domain(self.domain_tag))
        object.__setattr__(self, "goal", tuple(float(v) for v in self.goal))
        check_same_dims(self.elevation, self.semantics, self.gt_trav)

    @property
    def dims(self) -> GridDims:
        return self.elevation.dims

    @property
    def cell_size(self) -> float:
        return self.elevation.cell_size

    @property
    def frame(self) -> GridFrame:
        return GridFrame(self.cell_size)

    @property
    def start_cell(self) -> tuple[int, int]:
        return self.frame.cell_of(self.start.x, self.start.y)

    @property
    def goal_cell(self) -> tuple[int, int]:
        return self.frame.cell_of(self.goal[0], self.goal[1])

    def default_horizon(self) -> float:
        return PROFILE_HORIZONS[self.domain_tag.value]


def ground_truth_traversability(
    sem: SemanticGrid,
    elev: ElevationGrid,
    table: TravCostTable | None = None,
    geo_params: GeometricParams | None = None,
) -> TravMap:
    """Pixelwise minimum of the semantic lookup and the geometric rule."""
    check_same_dims(sem, elev)
    s = semantic_estimate(sem, table)
    g = geometric_estimate(elev, geo_params)
    return TravMap(np.minimum(s.values, g.values))


def profile_cell_size(profile: Domain, dims: GridDims) -> float:
    return PROFILE_HORIZONS[Domain(profile).value] / (HORIZON_FRACTION * min(dims.height, dims.width))


# -- profile painters -----------------------------------------------------------
# Each returns (heights, label names) for a fresh random layout.


def _ids(*names: str) -> list[int]:
    return [VOCABULARY.index(n) for n in names]


def _paint_indoor(rng: np.random.Generator, h: int, w: int, cs: float):
    floor, wall, obstacle, person = _ids("floor", "wall", "obstacle", "person")
    labels = np.full((h, w), floor)
    heights = np.zeros((h, w))
    # Three cells minimum: cells beside the wall fail the step rule, the middle one stays open.
    gap = max(3, w // 6)
    # Horizontal walls with door gaps, kept off the start/goal bands.
    n_walls = 1 if h < 16 else int(rng.integers(1, 3))
    rows = rng.choice(np.arange(h // 3, h - h // 3), size=min(n_walls, max(1, h - 2 * (h // 3))), replace=False)
    for r in rows:
        labels[r, :] = wall
        heights[r, :] = 1.0
        for _ in range(int(rng.integers(1, 3))):
            c0 = int(rng.integers(0, w - gap + 1))
            labels[r, c0:c0 + gap] = floor
            heights[r, c0:c0 + gap] = 0.0
    # Furniture blocks.
    for _ in range(int(rng.integers(1, 2 + (h * w) // 200))):
        bh, bw = int(rng.integers(1, max(2, h // 6))), int(rng.integers(1, max(2, w // 6)))
        r0, c0 = int(rng.integers(0, h - bh + 1)), int(rng.integers(0, w - bw + 1))
        labels[r0:r0 + bh, c0:c0 + bw] = obstacle
        heights[r0:r0 + bh, c0:c0 + bw] = rng.uniform(0.4, 0.9)
    # People: tall single cells.
    for _ in range(int(rng.integers(0, 2 + (h * w) // 300))):
        r, c = int(rng.integers(0, h)), int(rng.integers(0, w))
        labels[r, c] = person
        heights[r, c] = 1.7
    # Low-profile clutter that geometry barely sees.
    for _ in range(int(rng.integers(0, 2 + (h * w) // 250))):
        r, c = int(rng.integers(0, h)), int(rng.integers(0, w))
        if labels[r, c] == floor:
            labels[r, c] = obstacle
            heights[r, c] = 0.03
    return heights, labels


def _paint_structured(rng: np.random.Generator, h: int, w: int, cs: float):
    sidewalk, curb, road, crosswalk, bike, parking, low_grass, tall_grass, person = _ids(
        "sidewalk", "curb", "road", "crosswalk", "bike_lane", "parking", "low_grass", "tall_grass", "person"
    )
    labels = np.full((h, w), sidewalk)
    heights = np.zeros((h, w))
    band = max(1, h // 5)
    top_curb = band + int(rng.integers(0, max(1, h // 8)))
    bottom_curb = h - 1 - band - int(rng.integers(0, max(1, h // 8)))
    if bottom_curb - top_curb < 3:
        bottom_curb = min(h - 2, top_curb + 3)
    curb_drop = rng.uniform(0.12, 0.18)
    labels[top_curb, :] = curb
    labels[bottom_curb, :] = curb
    labels[top_curb + 1:bottom_curb, :] = road
    heights[top_curb + 1:bottom_curb, :] = -curb_drop
    heights[top_curb, :] = -curb_drop / 2
    heights[bottom_curb, :] = -curb_drop / 2
    if bottom_curb - top_curb > 4:
        lane = top_curb + 1 + int(rng.integers(0, bottom_curb - top_curb - 1))
        labels[lane, :] = bike
    if rng.random() < 0.5:
        c0 = int(rng.integers(0, w // 2))
        labels[top_curb + 1:bottom_curb, c0:c0 + max(2, w // 5)] = parking
    # Raised crosswalks cut through both curbs.
    cw = max(2, w // 8)
    for _ in range(int(rng.integers(1, 3))):
        c0 = int(rng.integers(0, w - cw + 1))
        labels[top_curb:bottom_curb + 1, c0:c0 + cw] = crosswalk
        heights[top_curb:bottom_curb + 1, c0:c0 + cw] = 0.0
    # Grass verges on the sidewalks: flat, so only semantics flags them.
    for _ in range(int(rng.integers(1, 4))):
        rr = int(rng.integers(0, h))
        if labels[rr, 0] != sidewalk:
            continue
        c0 = int(rng.integers(0, w - 1))
        labels[rr, c0:c0 + max(2, w // 5)] = low_grass if rng.random() < 0.5 else tall_grass
    for _ in range(int(rng.integers(0, 2 + (h * w) // 300))):
        r, c = int(rng.integers(0, h)), int(rng.integers(0, w))
        if labels[r, c] == sidewalk:
            labels[r, c] = person
            heights[r, c] = 1.7
    return heights, labels


def _paint_unstructured(rng: np.random.Generator, h: int, w: int, cs: float):
    classes = _ids("low_grass", "dirt", "gravel", "tall_grass", "bush", "sand")
    obstacle = VOCABULARY.index("obstacle")
    sigma = max(1.0, min(h, w) / 6.0)
    raw = gaussian_filter(rng.normal(size=(h, w)), sigma, mode="reflect")
    gy, gx = np.gradient(raw, cs)
    peak = float(np.max(np.hypot(gx, gy))) or 1.0
    target = math.tan(math.radians(rng.uniform(15.0, 45.0)))
    heights = raw * (target / peak)
    field = gaussian_filter(rng.normal(size=(h, w)), sigma, mode="reflect")
    cuts = np.quantile(field, [0.3, 0.5, 0.65, 0.85, 0.95])
    labels = np.array(classes)[np.searchsorted(cuts, field)]
    for _ in range(int(rng.integers(1, 2 + (h * w) // 150))):
        r, c = int(rng.integers(0, h)), int(rng.integers(0, w))
        labels[r, c] = obstacle
        heights[r, c] += rng.uniform(0.3, 0.8)
    return heights, labels


_PAINTERS = {
    Domain.INDOOR: _paint_indoor,
    Domain.STRUCTURED_OUTDOOR: _paint_structured,
    Domain.UNSTRUCTURED_OUTDOOR: _paint_unstructured,
}


def _place_endpoints(rng: np.random.Generator, gt: TravMap, attempts: int = 40):
    h, w = gt.shape
    band = max(1, h // 4)
    lo_c, hi_c = w // 4, w - w // 4
    ok = gt.values >= REACH_THETA
    starts = [(r, c) for r in range(h - band, h) for c in range(lo_c, hi_c) if ok[r, c]]
    goals = [(r, c) for r in range(0, band) for c in range(w) if ok[r, c]]
    if not starts or not goals:
        return None
    cfg = PlannerConfig(theta=REACH_THETA)
    for _ in range(attempts):
        s = starts[int(rng.integers(len(starts)))]
        g = goals[int(rng.integers(len(goals)))]
        if graph_plan(gt, s, g, cfg).feasible:
            return s, g
    return None


def generate_world(
    seed: int,
    profile: Domain | str = Domain.INDOOR,
    dims: GridDims | tuple[int, int] = GridDims(32, 32),
    retries: int = 20,
) -> World:
    """Deterministic synthetic world for ``seed`` and ``profile``."""
    profile = Domain(profile)
    if not isinstance(dims, GridDims):
        dims = GridDims(*dims)
    if dims.height < MIN_DIM or dims.width < MIN_DIM:
        raise WorldGenerationError(f"worlds need at least {MIN_DIM}x{MIN_DIM} cells, got {dims.shape}")
    cs = profile_cell_size(profile, dims)
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, DOMAINS.index(profile)])
    for _ in range(retries):
        heights, labels = _PAINTERS[profile](rng, dims.height, dims.width, cs)
        elev = ElevationGrid(heights, cs)
        sem = SemanticGrid(labels, VOCABULARY)
        gt = ground_truth_traversability(sem, elev)
        ends = _place_endpoints(rng, gt)
        if ends is None:
            continue
        (sr, sc), (gr, gc) = ends
        frame = GridFrame(cs)
        sx, sy = frame.center_of(sr, sc)
        gx, gy = frame.center_of(gr, gc)
        start = Pose(sx, sy, float(heights[sr, sc]), math.atan2(gy - sy, gx - sx))
        return World(elev, sem, gt, start, (gx, gy, float(heights[gr, gc])), profile, int(seed))
    raise WorldGenerationError(f"no reachable start/goal for seed {seed} ({profile.value}) after {retries} layouts")


# -- world files -----------------------------------------------------------------


def world_to_dict(world: World) -> dict:
    return {
        "format": WORLD_FORMAT,
        "seed": int(world.seed),
        "domain_tag": world.domain_tag.value,
        "dims": [world.dims.height, world.dims.width],
        "cell_size": float(world.cell_size),
        "start": {
            "x": float(world.start.x),
            "y": float(world.start.y),
            "z": float(world.start.z),
            "yaw": float(world.start.yaw),
        },
        "goal": [float(v) for v in world.goal],
        "vocabulary": list(world.semantics.vocabulary),
        "elevation": [[float(v) for v in row] for row in world.elevation.heights],
        "semantics": [[int(v) for v in row] for row in world.semantics.labels],
    }


def world_from_dict(data: dict) -> World:
    if data.get("format") != WORLD_FORMAT:
        raise GridError(f"unsupported world format {data.get('format')!r}")
    dims = GridDims(*data["dims"])
    elev = ElevationGrid(data["elevation"], data["cell_size"])
    sem = SemanticGrid(data["semantics"], data.get("vocabulary", VOCABULARY))
    if elev.shape != dims.shape or sem.shape != dims.shape:
        raise GridError(f"grid rows disagree with declared dims {dims.shape}")
    s = data["start"]
    return World(
        elev,
        sem,
        ground_truth_traversability(sem, elev),
        Pose(float(s["x"]), float(s["y"]), float(s.get("z", 0.0)), float(s.get("yaw", 0.0))),
        tuple(data["goal"]),
        Domain(data["domain_tag"]),
        int(data.get("seed", 0)),
    )


def save_world(world: World, path: str | Path) -> None:
    text = yaml.safe_dump(world_to_dict(world), default_flow_style=None, sort_keys=False, width=1 << 16)
    Path(path).write_text(text, encoding="utf-8")


def load_world(path: str | Path) -> World:
    with open(path, encoding="utf-8") as fh:
        return world_from_dict(yaml.safe_load(fh))
