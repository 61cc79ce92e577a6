"""Motion-primitive planner and the grid-graph oracle planner.

Both planners expose ``cost(t)`` (the optimal cost C on a TravMap) and
``plan(t)``; both are monotone non-increasing in the map, which is what the
lazy-gating bound relies on.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import GridError, TravMap

INFEASIBLE = math.inf

# Maximum-planning-distance defaults per domain, meters.
PROFILE_HORIZONS = {
    "indoor": 2.0,
    "structured_outdoor": 8.0,
    "unstructured_outdoor": 4.0,
}


class PlannerError(GridError):
    pass


class ProjectionError(PlannerError):
    pass


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    z: float = 0.0
    yaw: float = 0.0

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class GridFrame:
    """Maps metric x/y to (row, col): col = floor((x - ox)/cs), row = floor((y - oy)/cs)."""

    cell_size: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.cell_size > 0:
            raise PlannerError("cell_size must be positive")

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return (
            int(math.floor((y - self.origin[1]) / self.cell_size)),
            int(math.floor((x - self.origin[0]) / self.cell_size)),
        )

    def center_of(self, row: int, col: int) -> tuple[float, float]:
        return (
            self.origin[0] + (col + 0.5) * self.cell_size,
            self.origin[1] + (row + 0.5) * self.cell_size,
        )


@dataclass(frozen=True)
class Trajectory:
    waypoints: np.ndarray  # (L, 3), meters
    id: int = 0

    def __post_init__(self):
        w = np.array(self.waypoints, dtype=np.float64)
        if w.ndim != 2 or w.shape[1] != 3 or len(w) < 1:
            raise PlannerError(f"trajectory needs >= 1 waypoint of shape (3,), got {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "waypoints", w)

    def __len__(self):
        return len(self.waypoints)


@dataclass(frozen=True)
class PrimitiveSet:
    trajectories: tuple[Trajectory, ...]
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        if not self.trajectories:
            raise PlannerError("primitive set is empty")

    def __len__(self):
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)


@dataclass(frozen=True)
class PlannerConfig:
    lam: float = 1.0
    horizon: float = 2.0
    theta: float = 0.0
    aux_step_cost: float = 0.0

    def __post_init__(self):
        if self.lam < 0 or self.aux_step_cost < 0:
            raise PlannerError("lambda and aux_step_cost must be >= 0")
        if not self.horizon > 0:
            raise PlannerError("horizon must be positive")
        if not 0.0 <= self.theta <= 1.0:
            raise PlannerError("theta must lie in [0, 1]")


@dataclass(frozen=True)
class PlanResult:
    best: Trajectory | None
    cost: float
    per_candidate_costs: tuple[float, ...] = ()
    path: tuple[tuple[int, int], ...] | None = None

    @property
    def feasible(self) -> bool:
        return self.best is not None or self.path is not None


# -- primitives -------------------------------------------------------------


def arc_points(start: Pose, curvature: float, arc_lengths: np.ndarray) -> np.ndarray:
    """Points on a constant-curvature arc leaving ``start`` along its heading."""
    s = np.asarray(arc_lengths, dtype=np.float64)
    yaw = start.yaw
    if curvature == 0.0:
        x = start.x + s * math.cos(yaw)
        y = start.y + s * math.sin(yaw)
    else:
        k = curvature
        x = start.x + (np.sin(yaw + k * s) - math.sin(yaw)) / k
        y = start.y - (np.cos(yaw + k * s) - math.cos(yaw)) / k
    return np.column_stack([x, y, np.full_like(s, start.z)])


def default_curvatures(count: int, horizon: float) -> list[float]:
    """Symmetric fan; the outermost arcs turn the heading by 90 degrees."""
    if count == 1:
        return [0.0]
    k_max = (math.pi / 2.0) / horizon
    return [float(k) for k in np.linspace(-k_max, k_max, count)]


def generate_primitives(
    start: Pose,
    config: PlannerConfig,
    count: int = 9,
    curvatures: Sequence[float] | None = None,
    spacing: float | None = None,
) -> PrimitiveSet:
    """Fan of arcs of length ``config.horizon``.

    ``spacing`` is the sample step along the arc; pass at most the grid cell
    size so projections visit adjacent cells. The start point itself is not a
    waypoint.
    """
    if count < 1:
        raise PlannerError("primitive count must be >= 1")
    if curvatures is None:
        curvatures = default_curvatures(count, config.horizon)
    if len(curvatures) != count:
        raise PlannerError(f"expected {count} curvatures, got {len(curvatures)}")
    spacing = spacing or config.horizon / 20.0
    n = max(1, int(math.ceil(config.horizon / spacing)))
    s = np.linspace(config.horizon / n, config.horizon, n)
    trajs = [Trajectory(arc_points(start, float(k), s), id=i) for i, k in enumerate(curvatures)]
    return PrimitiveSet(tuple(trajs), config.horizon)


def project_trajectory(traj: Trajectory, frame: GridFrame, shape: tuple[int, int]) -> tuple[tuple[int, int], ...]:
    """Cells visited by the waypoints, consecutive duplicates collapsed."""
    h, w = shape
    cells: list[tuple[int, int]] = []
    for x, y, _ in traj.waypoints:
        r, c = frame.cell_of(x, y)
        if not (0 <= r < h and 0 <= c < w):
            raise ProjectionError(f"waypoint ({x:.3f}, {y:.3f}) of trajectory {traj.id} leaves the grid")
        if not cells or cells[-1] != (r, c):
            cells.append((r, c))
    return tuple(cells)


# -- cost terms ---------------------------------------------------------------


def j_trav(path: Sequence[tuple[int, int]], t: TravMap) -> float:
    """Mean untraversability over the projected cells."""
    if len(path) == 0:
        raise PlannerError("j_trav of an empty path")
    rows, cols = zip(*path)
    return float(np.mean(1.0 - t.values[list(rows), list(cols)]))


def j_dis(traj: Trajectory, robot, goal, horizon: float) -> float:
    """Normalized lack of progress toward the goal, clamped to [0, 1]."""
    if not horizon > 0:
        raise PlannerError("horizon must be positive")
    robot = np.asarray(robot, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    closest = np.min(np.linalg.norm(traj.waypoints - goal, axis=1))
    raw = 1.0 - (np.linalg.norm(robot - goal) - closest) / horizon
    return float(min(1.0, max(0.0, raw)))


def _as_point(p) -> np.ndarray:
    if isinstance(p, Pose):
        return p.position
    return np.asarray(p, dtype=np.float64)


@dataclass
class PrimitivePlanner:
    """Scores a fixed primitive fan; candidates leaving the grid are dropped.

    Projections and distance terms do not depend on the map, so they are
    computed once and ``cost`` is a cheap vectorized pass.
    """

    prims: PrimitiveSet
    frame: GridFrame
    shape: tuple[int, int]
    robot: object
    goal: object
    config: PlannerConfig = field(default_factory=PlannerConfig)

    def __post_init__(self):
        robot, goal = _as_point(self.robot), _as_point(self.goal)
        self._ids: list[int] = []
        self._trajs: list[Trajectory] = []
        self._paths: list[tuple[tuple[int, int], ...]] = []
        dis = []
        for traj in sorted(self.prims, key=lambda tr: tr.id):
            try:
                path = project_trajectory(traj, self.frame, self.shape)
            except ProjectionError:
                continue
            self._trajs.append(traj)
            self._paths.append(path)
            dis.append(j_dis(traj, robot, goal, self.config.horizon))
        self._dis = np.array(dis)
        # Flat cell index per path plus the owning-candidate index, for a
        # single bincount per evaluation.
        if self._paths:
            w = self.shape[1]
            self._flat = np.concatenate([[r * w + c for r, c in p] for p in self._paths])
            self._owner = np.concatenate([[i] * len(p) for i, p in enumerate(self._paths)])
            self._lengths = np.array([len(p) for p in self._paths], dtype=np.float64)

    @property
    def candidates(self) -> list[Trajectory]:
        return list(self._trajs)

    @property
    def paths(self) -> list[tuple[tuple[int, int], ...]]:
        return list(self._paths)

    def index_of(self, traj: Trajectory) -> int:
        for i, cand in enumerate(self._trajs):
            if cand.id == traj.id:
                return i
        raise PlannerError(f"trajectory {traj.id} is not a projectable candidate of this planner")

    def trav_scores(self, t: TravMap) -> np.ndarray:
        """j_trav of every projectable candidate."""
        if not self._paths:
            return np.zeros(0)
        untrav = 1.0 - t.values.ravel()[self._flat]
        return np.bincount(self._owner, weights=untrav, minlength=len(self._paths)) / self._lengths

    def candidate_costs(self, t: TravMap) -> np.ndarray:
        if t.shape != tuple(self.shape):
            raise PlannerError(f"map shape {t.shape} does not match planner shape {self.shape}")
        return self.trav_scores(t) + self.config.lam * self._dis

    def cost(self, t: TravMap) -> float:
        costs = self.candidate_costs(t)
        return float(costs.min()) if len(costs) else INFEASIBLE

    def plan(self, t: TravMap) -> PlanResult:
        costs = self.candidate_costs(t)
        if not len(costs):
            return PlanResult(None, INFEASIBLE, ())
        i = int(np.argmin(costs))  # first minimum, candidates kept in id order
        return PlanResult(self._trajs[i], float(costs[i]), tuple(float(c) for c in costs), self._paths[i])

    def score_trajectory(self, traj: Trajectory, t: TravMap) -> float:
        """Objective of one specific candidate on ``t``."""
        path = project_trajectory(traj, self.frame, self.shape)
        return j_trav(path, t) + self.config.lam * j_dis(traj, _as_point(self.robot), _as_point(self.goal), self.config.horizon)


def plan(t: TravMap, prims: PrimitiveSet, robot, goal, config: PlannerConfig, frame: GridFrame) -> PlanResult:
    return PrimitivePlanner(prims, frame, t.shape, robot, goal, config).plan(t)


# -- graph oracle -------------------------------------------------------------


def graph_plan(t: TravMap, src: tuple[int, int], dst: tuple[int, int], config: PlannerConfig) -> PlanResult:
    """Exact min of sum (1 - T(v))^2 + aux * (|path| - 1) over 4-connected paths
    from ``src`` to ``dst`` whose every vertex has T >= theta.

    Dijkstra over vertex costs; all costs are non-negative so the first pop of
    ``dst`` is optimal.
    """
    h, w = t.shape
    for name, (r, c) in (("src", src), ("dst", dst)):
        if not (0 <= r < h and 0 <= c < w):
            raise PlannerError(f"{name} {(r, c)} outside {h}x{w} grid")
    vals = t.values
    theta = config.theta
    if vals[src] < theta or vals[dst] < theta:
        return PlanResult(None, INFEASIBLE)
    node_cost = (1.0 - vals) ** 2 + config.aux_step_cost
    feasible = vals >= theta

    s = src[0] * w + src[1]
    d = dst[0] * w + dst[1]
    dist = {s: (1.0 - vals[src]) ** 2}
    parent = {s: -1}
    heap = [(dist[s], s)]
    done = set()
    while heap:
        du, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == d:
            break
        r, c = divmod(u, w)
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < h and 0 <= nc < w and feasible[nr, nc]:
                v = nr * w + nc
                if v in done:
                    continue
                nd = du + node_cost[nr, nc]
                if nd < dist.get(v, INFEASIBLE):
                    dist[v] = nd
                    parent[v] = u
                    heapq.heappush(heap, (nd, v))
    if d not in done:
        return PlanResult(None, INFEASIBLE)
    path = []
    u = d
    while u != -1:
        path.append(divmod(u, w))
        u = parent[u]
    path.reverse()
    return PlanResult(None, float(dist[d]), (), tuple(path))


def path_cost(path: Sequence[tuple[int, int]], t: TravMap, config: PlannerConfig) -> float:
    """Graph objective of a given vertex sequence; +inf if any vertex is below theta."""
    vals = t.values
    total = 0.0
    for r, c in path:
        if vals[r, c] < config.theta:
            return INFEASIBLE
        total += (1.0 - vals[r, c]) ** 2
    return total + config.aux_step_cost * (len(path) - 1)


@dataclass
class GraphPlanner:
    src: tuple[int, int]
    dst: tuple[int, int]
    config: PlannerConfig = field(default_factory=PlannerConfig)

    def cost(self, t: TravMap) -> float:
        return graph_plan(t, self.src, self.dst, self.config).cost

    def plan(self, t: TravMap) -> PlanResult:
        return graph_plan(t, self.src, self.dst, self.config)


def cost_gap(a: float, b: float) -> float:
    """|a - b| with equal infinities treated as no gap."""
    if a == b:
        return 0.0
    return abs(a - b)


def cost_delta(c_upper: float, c_lower: float) -> float:
    """c_upper - c_lower, infinite whenever the pessimistic cost is infinite."""
    if math.isinf(c_upper):
        return INFEASIBLE
    return c_upper - c_lower
