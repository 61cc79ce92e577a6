"""Scenario batches, randomized bound-verification sweeps and CSV output."""

from __future__ import annotations

import copy
import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import yaml

from .experts import (
    ExpertId,
    ExpertKind,
    ExpertSpec,
    TravCostTable,
    evaluate_expert,
)
from .fusion import FusionState, fuse_batch, fuse_step, lower_expectation, upper_expectation
from .gating import (
    GatingConfig,
    GatingTrace,
    build_queue,
    check_termination,
    hierarchical_route,
    lazy_gating,
)
from .grid import GridDims, GridError, TravMap
from .metrics import ScenarioMetrics, metric_e_m, metric_e_p, metric_q_p, savings
from .planner import (
    GraphPlanner,
    PlannerConfig,
    PrimitivePlanner,
    cost_gap,
    generate_primitives,
    path_cost,
)
from .routers import ground_truth_router, random_router, scripted_router
from .world import DOMAINS, Domain, World, WorldGenerationError, generate_world, load_world

log = logging.getLogger(__name__)

METRICS_HEADER = (
    "scenario_id",
    "domain",
    "e_p",
    "e_m",
    "q_p",
    "flops_used",
    "flops_full",
    "savings_fraction",
    "experts_activated",
)
TRACE_HEADER = ("scenario_id", "k", "expert", "delta", "cost", "flops_cumulative", "terminated")
TOL = 1e-9
PRIMITIVE_COUNT = 9

# Declared costs per domain: the cheap geometric expert and the learned one.
TABLE_COSTS = {"geometric": 0.13, "indoor": 246.31, "structured_outdoor": 48.3, "unstructured_outdoor": 18.69}


class ScenarioError(GridError):
    pass


def default_roster() -> list[list[dict]]:
    return [
        [
            {"name": "geo-indoor", "kind": "geometric", "flop_cost": TABLE_COSTS["geometric"]},
            {"name": "seg-indoor", "kind": "noisy_oracle", "flop_cost": TABLE_COSTS["indoor"],
             "params": {"noise_std": 0.05, "seed": 1}},
        ],
        [
            {"name": "geo-structured", "kind": "geometric", "flop_cost": TABLE_COSTS["geometric"]},
            {"name": "seg-structured", "kind": "semantic_table", "flop_cost": TABLE_COSTS["structured_outdoor"]},
        ],
        [
            {"name": "geo-unstructured", "kind": "geometric", "flop_cost": TABLE_COSTS["geometric"]},
            {"name": "seg-unstructured", "kind": "noisy_oracle", "flop_cost": TABLE_COSTS["unstructured_outdoor"],
             "params": {"noise_std": 0.08, "seed": 3}},
        ],
    ]


def parse_roster(raw: Sequence[Sequence[dict]]) -> list[list[ExpertSpec]]:
    if not raw or not all(raw):
        raise ScenarioError("roster must list at least one expert per domain")
    m, n = len(raw), max(len(d) for d in raw)
    roster = []
    for di, domain in enumerate(raw, start=1):
        specs = []
        for ti, e in enumerate(domain, start=1):
            params = dict(e.get("params", {}))
            spec = ExpertSpec(
                ExpertId(di, ti, str(e.get("name", f"expert-{di}-{ti}"))),
                ExpertKind(e["kind"]),
                float(e.get("flop_cost", 1.0)),
                params,
            )
            spec.id.check(m, n)
            specs.append(spec)
        roster.append(specs)
    names = [s.name for d in roster for s in d]
    if len(set(names)) != len(names):
        raise ScenarioError(f"expert names must be unique: {names}")
    return roster


@dataclass
class ScenarioSpec:
    """One scenario family; ``repetitions`` runs it on consecutive world seeds."""

    name: str
    world: dict = field(default_factory=lambda: {"seed": 0, "profile": "indoor", "dims": [32, 32]})
    roster: list = field(default_factory=default_roster)
    router: dict = field(default_factory=lambda: {"type": "ground_truth"})
    planner: dict = field(default_factory=dict)
    gating: dict = field(default_factory=dict)
    repetitions: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ScenarioError("repetitions must be >= 1")
        if not self.roster:
            raise ScenarioError("roster must be non-empty")

    @classmethod
    def from_dict(cls, data: dict, defaults: dict | None = None) -> "ScenarioSpec":
        merged = copy.deepcopy(defaults or {})
        for k, v in data.items():
            if isinstance(v, dict) and isinstance(merged.get(k), dict):
                merged[k] = {**merged[k], **v}
            else:
                merged[k] = v
        known = {"name", "world", "roster", "router", "planner", "gating", "repetitions"}
        unknown = set(merged) - known
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        if "name" not in merged:
            raise ScenarioError("scenario needs a name")
        return cls(**merged)


def load_specs(path: str | Path) -> list[ScenarioSpec]:
    """Scenario file: ``{defaults: {...}, scenarios: [{...}, ...]}`` in YAML."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    defaults = data.get("defaults", {})
    specs = []
    for raw in data.get("scenarios", []):
        raw = dict(raw)
        world = raw.get("world", {})
        if isinstance(world, dict) and "file" in world and not Path(world["file"]).is_absolute():
            raw["world"] = {**world, "file": str(path.parent / world["file"])}
        specs.append(ScenarioSpec.from_dict(raw, defaults))
    return specs


def default_specs(count: int = 4, dims: Sequence[int] = (32, 32)) -> list[ScenarioSpec]:
    return [
        ScenarioSpec(
            name=d.value,
            world={"seed": 100 * (i + 1), "profile": d.value, "dims": list(dims)},
            repetitions=count,
        )
        for i, d in enumerate(DOMAINS)
    ]


# -- one scenario ---------------------------------------------------------------


@dataclass
class ScenarioRow:
    scenario_id: str
    domain: str
    metrics: ScenarioMetrics
    q_p_full: float  # without lazy gating
    cost_stop: float  # C(T_k) where gating stopped
    cost_queue_final: float  # C(T_K) over every queued expert
    delta_stop: float
    terminated_early: bool
    trace: GatingTrace
    fused: TravMap
    fused_full: TravMap
    fused_queue_final: TravMap


def build_world(spec: ScenarioSpec, rep: int, base_seed: int) -> World:
    w = spec.world
    if "file" in w:
        return load_world(w["file"])
    seed = int(base_seed) + int(w.get("seed", 0)) + rep
    return generate_world(seed, Domain(w.get("profile", "indoor")), GridDims(*w.get("dims", (32, 32))))


def build_router(spec: ScenarioSpec, world: World, roster, gcfg: GatingConfig):
    r = dict(spec.router)
    kind = r.pop("type", "ground_truth")
    if kind == "ground_truth":
        return ground_truth_router(world, roster, omega_min=gcfg.omega_min, **r)
    if kind == "scripted":
        return scripted_router(world.dims, r["domain_weights"], r["terrain_weights"], gcfg.omega_min)
    raise ScenarioError(f"unknown router type {kind!r}")


def planner_config(spec: ScenarioSpec, world: World) -> PlannerConfig:
    p = spec.planner
    horizon = p.get("horizon") or world.default_horizon()
    return PlannerConfig(
        lam=float(p.get("lam", 1.0)),
        horizon=float(horizon),
        theta=float(p.get("theta", 0.0)),
        aux_step_cost=float(p.get("aux_step_cost", 0.0)),
    )


def primitive_planner(world: World, cfg: PlannerConfig, count: int = PRIMITIVE_COUNT) -> PrimitivePlanner:
    prims = generate_primitives(world.start, cfg, count=count, spacing=world.cell_size / 2.0)
    return PrimitivePlanner(prims, world.frame, world.dims.shape, world.start, world.goal, cfg)


def run_one(
    spec: ScenarioSpec,
    rep: int,
    base_seed: int = 0,
    planner_kind: str = "primitive",
    epsilon: float | None = None,
) -> ScenarioRow:
    world = build_world(spec, rep, base_seed)
    gkw = dict(spec.gating)
    if epsilon is not None:
        gkw["epsilon"] = epsilon
    gcfg = GatingConfig(**gkw)
    roster = parse_roster(spec.roster)
    router = build_router(spec, world, roster, gcfg)
    pcfg = planner_config(spec, world)
    prim = primitive_planner(world, pcfg, int(spec.planner.get("count", PRIMITIVE_COUNT)))
    if planner_kind == "graph":
        gate_planner = GraphPlanner(world.start_cell, world.goal_cell, pcfg)
    elif planner_kind == "primitive":
        gate_planner = prim
    else:
        raise ScenarioError(f"unknown planner {planner_kind!r}")

    cache: dict[str, TravMap] = {}

    def evaluate(s: ExpertSpec) -> TravMap:
        if s.name not in cache:
            cache[s.name] = evaluate_expert(s, world, seed=world.seed)
        return cache[s.name]

    queue = build_queue(hierarchical_route(router, roster, gcfg))
    lazy = lazy_gating(queue, evaluate, gate_planner, gcfg)
    activated = list(lazy.trace.activated)

    # Offline references: every queued expert, and every expert without pruning.
    fused_queue = fuse_batch([evaluate(e.spec) for e in queue], queue.weights)
    everything = hierarchical_route(router, roster, GatingConfig(gcfg.epsilon, gcfg.omega_min, 0.0))
    fused_full = fuse_batch([evaluate(s) for s, _ in everything], [w for _, w in everything])

    flat_roster = [s for d in roster for s in d]
    sv = savings(lazy.trace, flat_roster)
    est = prim.plan(lazy.fused).best
    metrics = ScenarioMetrics(
        e_p=metric_e_p(lazy.fused, world.gt_trav, prim),
        e_m=metric_e_m(lazy.fused, world.gt_trav),
        q_p=metric_q_p(est, prim, world.gt_trav),
        flops_used=sv.flops_used,
        flops_full=sv.flops_full,
        savings_fraction=sv.savings_fraction,
        experts_activated=len(activated),
    )
    last = lazy.trace.steps[-1]
    return ScenarioRow(
        scenario_id=f"{spec.name}-{rep:03d}",
        domain=world.domain_tag.value,
        metrics=metrics,
        q_p_full=metric_q_p(prim.plan(fused_full).best, prim, world.gt_trav),
        cost_stop=last.cost,
        cost_queue_final=gate_planner.cost(fused_queue),
        delta_stop=last.delta,
        terminated_early=lazy.trace.terminated_early,
        trace=lazy.trace,
        fused=lazy.fused,
        fused_full=fused_full,
        fused_queue_final=fused_queue,
    )


@dataclass
class RunReport:
    rows: list[ScenarioRow] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)

    def aggregates(self) -> dict[str, float]:
        if not self.rows:
            return {}
        keys = ("e_p", "e_m", "q_p", "flops_used", "flops_full", "savings_fraction", "experts_activated")
        return {k: float(np.mean([getattr(r.metrics, k) for r in self.rows])) for k in keys}

    @property
    def bound_checks(self) -> tuple[int, int]:
        """(passed, failed) counts of |C_stop - C_K| <= delta_stop."""
        ok = sum(cost_gap(r.cost_stop, r.cost_queue_final) <= r.delta_stop + TOL for r in self.rows)
        return ok, len(self.rows) - ok


def run_scenarios(
    specs: Iterable[ScenarioSpec],
    base_seed: int = 0,
    planner_kind: str = "primitive",
    epsilon: float | None = None,
) -> RunReport:
    report = RunReport()
    for spec in specs:
        for rep in range(spec.repetitions):
            sid = f"{spec.name}-{rep:03d}"
            try:
                report.rows.append(run_one(spec, rep, base_seed, planner_kind, epsilon))
            except (GridError, ValueError, KeyError, TypeError) as exc:
                log.warning("scenario %s failed: %s", sid, exc)
                report.failures.append((sid, str(exc)))
    report.rows.sort(key=lambda r: r.scenario_id)
    return report


# -- CSV ------------------------------------------------------------------------------


def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def emit_csv(report: RunReport, out_dir: str | Path) -> tuple[Path, Path]:
    """Write metrics.csv and trace.csv into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        mpath, tpath = out / "metrics.csv", out / "trace.csv"
        rows = sorted(report.rows, key=lambda r: r.scenario_id)
        with open(mpath, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(METRICS_HEADER)
            for r in rows:
                m = r.metrics
                w.writerow([r.scenario_id, r.domain] + [_num(getattr(m, k)) for k in METRICS_HEADER[2:]])
        with open(tpath, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            for r in rows:
                for s in r.trace.steps:
                    w.writerow([r.scenario_id, s.k, s.expert, _num(s.delta), _num(s.cost),
                                _num(s.flops_cumulative), _num(s.done)])
    except OSError as exc:
        raise OSError(f"cannot write CSV output under {out}: {exc}") from exc
    return mpath, tpath


def read_metrics_csv(path: str | Path) -> list[dict[str, Any]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in METRICS_HEADER[2:]:
            r[k] = float(r[k])
    return rows


# -- bound verification sweep ---------------------------------------------------------


@dataclass
class PlannerTally:
    checks: int = 0
    violations_bound: int = 0
    violations_monotonic: int = 0
    violations_ordering: int = 0
    violations_nesting: int = 0
    violations_early_stop: int = 0
    max_observed_gap: float = 0.0  # largest |C_k - C_K| / delta_k over finite delta_k > 0
    infinite_deltas: int = 0

    @property
    def violations(self) -> int:
        return (self.violations_bound + self.violations_monotonic + self.violations_ordering
                + self.violations_nesting + self.violations_early_stop)


@dataclass
class VerifyReport:
    trials: int
    tallies: dict[str, PlannerTally]

    @property
    def total_violations(self) -> int:
        return sum(t.violations for t in self.tallies.values())


def _random_expert(rng: np.random.Generator, index: int) -> ExpertSpec:
    kind = list(ExpertKind)[int(rng.integers(len(ExpertKind)))]
    params: dict[str, Any] = {}
    if kind is ExpertKind.GEOMETRIC:
        params = {"max_slope": float(rng.uniform(0.2, 0.8)), "max_step": float(rng.uniform(0.05, 0.4))}
    elif kind is ExpertKind.SEMANTIC_TABLE:
        mids = rng.uniform(0.15, 0.85, size=3)
        params = {"table": TravCostTable(float(rng.uniform(0.9, 1.0)), *map(float, mids), float(rng.uniform(0.0, 0.1)))}
    elif kind is ExpertKind.NOISY_ORACLE:
        params = {"noise_std": float(rng.uniform(0.0, 0.3)), "seed": int(rng.integers(1 << 30))}
    else:
        params = {"value": float(rng.uniform(0.0, 1.0))}
    return ExpertSpec(ExpertId(1, index + 1, f"e{index + 1}"), kind, float(rng.uniform(0.1, 50.0)), params)


@dataclass
class Trial:
    world: World
    specs: list[ExpertSpec]
    maps: list[TravMap]
    weights: list
    planners: dict[str, Any]


def make_trial(seed: int, trial: int, dims_range=(8, 32), experts_range=(2, 6)) -> Trial:
    rng = np.random.default_rng([int(seed), int(trial)])
    h = int(rng.integers(dims_range[0], dims_range[1] + 1))
    w = int(rng.integers(dims_range[0], dims_range[1] + 1))
    profile = DOMAINS[int(rng.integers(len(DOMAINS)))]
    for _ in range(10):
        try:
            world = generate_world(int(rng.integers(1 << 31)), profile, GridDims(h, w))
            break
        except WorldGenerationError:
            continue
    else:
        raise ScenarioError(f"trial {trial}: no usable {profile.value} world at {h}x{w}")
    k = int(rng.integers(experts_range[0], experts_range[1] + 1))
    specs = [_random_expert(rng, i) for i in range(k)]
    router = random_router(rng, world.dims, [k])
    effective = hierarchical_route(router, [specs], GatingConfig(domain_floor=0.0))
    queue = build_queue(effective)
    specs = queue.specs
    maps = [evaluate_expert(s, world, seed=world.seed) for s in specs]
    pcfg = PlannerConfig(
        lam=float(rng.uniform(0.0, 2.0)),
        horizon=world.default_horizon(),
        theta=float(rng.choice([0.0, 0.3])),
        aux_step_cost=float(rng.choice([0.0, 0.1])),
    )
    planners = {
        "primitive": primitive_planner(world, pcfg),
        "graph": GraphPlanner(world.start_cell, world.goal_cell, pcfg),
    }
    return Trial(world, specs, maps, queue.weights, planners)


def check_trial(trial: Trial, kind: str, tally: PlannerTally, epsilon: float = 0.05) -> None:
    """Run every fusion prefix and tally bound, monotonicity, ordering and nesting checks."""
    planner = trial.planners[kind]
    state = FusionState.for_weights(trial.weights)
    states = []
    for t_hat, w in zip(trial.maps, trial.weights):
        state = fuse_step(state, t_hat, w)
        states.append(state)
    c_final = planner.cost(states[-1].fused)
    prev_delta = math.inf
    stopped = False
    for st in states:
        tally.checks += 1
        lo_map, up_map = lower_expectation(st), upper_expectation(st)
        check = check_termination(st, planner, GatingConfig(epsilon=epsilon))
        c_k = planner.cost(st.fused)
        delta = check.delta
        if math.isinf(delta):
            tally.infinite_deltas += 1
        gap = cost_gap(c_k, c_final)
        if not gap <= delta + TOL:
            tally.violations_bound += 1
        if math.isfinite(delta) and delta > 0:
            tally.max_observed_gap = max(tally.max_observed_gap, gap / delta)
        if not delta <= prev_delta + TOL:
            tally.violations_monotonic += 1
        prev_delta = delta
        if not (check.c_lower <= c_k + TOL and c_k <= check.c_upper + TOL
                and check.c_lower <= c_final + TOL and c_final <= check.c_upper + TOL):
            tally.violations_ordering += 1
        if kind == "graph":
            cfg = planner.config
            ok = True
            for low, high in ((lo_map, st.fused), (st.fused, up_map)):
                res = planner.plan(low)
                if res.path is not None and math.isinf(path_cost(res.path, high, cfg)):
                    ok = False
            if not ok:
                tally.violations_nesting += 1
        if check.done and not stopped:
            stopped = True
            if not gap <= epsilon + TOL:
                tally.violations_early_stop += 1


def verify_proposition(
    trials: int = 1000,
    seed: int = 0,
    planners: Sequence[str] = ("primitive", "graph"),
    dims_range=(8, 32),
    experts_range=(2, 6),
) -> VerifyReport:
    if trials < 1:
        raise ScenarioError("num_trials must be >= 1")
    tallies = {k: PlannerTally() for k in planners}
    for i in range(trials):
        trial = make_trial(seed, i, dims_range, experts_range)
        for kind in planners:
            check_trial(trial, kind, tallies[kind])
    return VerifyReport(trials, tallies)
