"""Expert queue construction, lazy gating, two-level routing, supervision labels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .experts import ExpertSpec, expert_flop_cost
from .fusion import FusionState, fuse_step, lower_expectation, upper_expectation
from .grid import DegenerateWeightError, GridError, TravMap, WeightMap, check_same_dims
from .planner import PlanResult, cost_delta

DEFAULT_EPSILON = 0.05
DEFAULT_OMEGA_MIN = 1e-6
DEFAULT_DOMAIN_FLOOR = 0.02


class Planner(Protocol):
    def cost(self, t: TravMap) -> float: ...

    def plan(self, t: TravMap) -> PlanResult: ...


class ExpertError(RuntimeError):
    """An expert failed mid-loop; ``trace`` holds the iterations completed so far."""

    def __init__(self, message: str, trace: "GatingTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class GatingConfig:
    epsilon: float = DEFAULT_EPSILON
    omega_min: float = DEFAULT_OMEGA_MIN
    domain_floor: float = DEFAULT_DOMAIN_FLOOR

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise GridError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.omega_min < 0 or self.domain_floor < 0:
            raise GridError("omega_min and domain_floor must be >= 0")


@dataclass(frozen=True)
class QueueEntry:
    spec: ExpertSpec
    weight: WeightMap
    phi: float
    order: int  # declaration index


@dataclass(frozen=True)
class ExpertQueue:
    entries: tuple[QueueEntry, ...]

    def __post_init__(self):
        phis = [e.phi for e in self.entries]
        if any(b < a for a, b in zip(phis, phis[1:])):
            raise GridError("queue Phi scores must be non-decreasing")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def weights(self) -> list[WeightMap]:
        return [e.weight for e in self.entries]

    @property
    def specs(self) -> list[ExpertSpec]:
        return [e.spec for e in self.entries]


@dataclass(frozen=True)
class TermCheck:
    done: bool
    delta: float
    c_upper: float  # planner cost on the pessimistic map
    c_lower: float  # planner cost on the optimistic map


@dataclass(frozen=True)
class GatingStep:
    k: int
    expert: str
    fused: TravMap
    delta: float
    cost: float
    c_upper: float
    c_lower: float
    flops_cumulative: float
    done: bool = False


@dataclass
class GatingTrace:
    steps: list[GatingStep] = field(default_factory=list)
    queue_length: int = 0
    termination_step: int = 0
    terminated_early: bool = False

    @property
    def deltas(self) -> list[float]:
        return [s.delta for s in self.steps]

    @property
    def activated(self) -> list[str]:
        return [s.expert for s in self.steps]

    @property
    def flops_used(self) -> float:
        return self.steps[-1].flops_cumulative if self.steps else 0.0


@dataclass(frozen=True)
class GatingResult:
    fused: TravMap
    result: PlanResult
    trace: GatingTrace
    state: FusionState


def phi_score(spec: ExpertSpec, w: WeightMap, all_weights: Sequence[WeightMap]) -> float:
    """Compute cost discounted by the expert's share of routed weight mass."""
    total = sum(x.mass() for x in all_weights)
    if not total > 0:
        raise DegenerateWeightError("total routed weight mass is zero")
    share = min(1.0, w.mass() / total)
    return (1.0 - share) * expert_flop_cost(spec)


def build_queue(experts: Sequence[tuple[ExpertSpec, WeightMap]]) -> ExpertQueue:
    if not experts:
        raise GridError("cannot build a queue from no experts")
    weights = [w for _, w in experts]
    check_same_dims(*weights)
    entries = [QueueEntry(s, w, phi_score(s, w, weights), i) for i, (s, w) in enumerate(experts)]
    # sorted() is stable: equal scores keep declaration order.
    return ExpertQueue(tuple(sorted(entries, key=lambda e: e.phi)))


def check_termination(state: FusionState, planner: Planner, config: GatingConfig) -> TermCheck:
    c_upper = planner.cost(lower_expectation(state))
    c_lower = planner.cost(upper_expectation(state))
    delta = cost_delta(c_upper, c_lower)
    # An infeasible pessimistic plan never licenses stopping, whatever epsilon is.
    done = math.isfinite(delta) and delta <= config.epsilon
    return TermCheck(done, delta, c_upper, c_lower)


def lazy_gating(
    queue: ExpertQueue,
    evaluate: Callable[[ExpertSpec], TravMap],
    planner: Planner,
    config: GatingConfig | None = None,
) -> GatingResult:
    """Dequeue experts in Phi order, fuse each, stop once delta <= epsilon.

    ``evaluate`` runs one expert on the world; it is called only for experts
    that are actually activated.
    """
    config = config or GatingConfig()
    if len(queue) == 0:
        raise GridError("empty expert queue")
    state = FusionState.for_weights(queue.weights)
    trace = GatingTrace(queue_length=len(queue))
    flops = 0.0
    for entry in queue:
        try:
            t_hat = evaluate(entry.spec)
        except Exception as exc:
            raise ExpertError(f"expert {entry.spec.name!r} failed: {exc}", trace) from exc
        state = fuse_step(state, t_hat, entry.weight)
        flops += expert_flop_cost(entry.spec)
        check = check_termination(state, planner, config)
        trace.steps.append(
            GatingStep(
                k=state.steps_done,
                expert=entry.spec.name,
                fused=state.fused,
                delta=check.delta,
                cost=planner.cost(state.fused),
                c_upper=check.c_upper,
                c_lower=check.c_lower,
                flops_cumulative=flops,
                done=check.done,
            )
        )
        if check.done:
            break
    trace.termination_step = state.steps_done
    trace.terminated_early = state.steps_done < len(queue)
    return GatingResult(state.fused, planner.plan(state.fused), trace, state)


# -- two-level routing --------------------------------------------------------


@dataclass(frozen=True)
class RouterOutput:
    """Domain probabilities plus, per domain, one weight map per terrain expert."""

    domain_weights: tuple[float, ...]
    terrain_weight_stacks: tuple[tuple[WeightMap, ...], ...]

    def __post_init__(self):
        dw = np.asarray(self.domain_weights, dtype=np.float64)
        if dw.ndim != 1 or len(dw) == 0 or np.any(dw < 0) or not math.isclose(dw.sum(), 1.0, abs_tol=1e-9):
            raise GridError(f"domain weights must be a non-negative vector summing to 1, got {dw}")
        if len(self.terrain_weight_stacks) != len(dw):
            raise GridError("one terrain weight stack per domain required")
        object.__setattr__(self, "domain_weights", tuple(float(x) for x in dw))
        object.__setattr__(self, "terrain_weight_stacks", tuple(tuple(s) for s in self.terrain_weight_stacks))
        check_same_dims(*(w for stack in self.terrain_weight_stacks for w in stack))

    def validate_floor(self, omega_min: float) -> None:
        for stack in self.terrain_weight_stacks:
            for w in stack:
                if w.values.min() < omega_min:
                    raise DegenerateWeightError(f"terrain weight below floor {omega_min}")


def hierarchical_route(
    router: RouterOutput,
    roster: Sequence[Sequence[ExpertSpec]],
    config: GatingConfig | None = None,
) -> list[tuple[ExpertSpec, WeightMap]]:
    """Flatten domain x terrain routing into effective experts.

    Effective weight is domain_weight * terrain_weight. Domains whose weight
    falls below ``config.domain_floor`` are dropped before queueing.
    """
    config = config or GatingConfig()
    router.validate_floor(config.omega_min)
    if len(roster) != len(router.domain_weights):
        raise GridError(f"roster has {len(roster)} domains, router {len(router.domain_weights)}")
    out = []
    for wm, specs, stack in zip(router.domain_weights, roster, router.terrain_weight_stacks):
        if len(specs) != len(stack):
            raise GridError("terrain weight maps and experts disagree in count")
        if wm <= 0.0 or wm < config.domain_floor:
            continue
        for spec, w in zip(specs, stack):
            out.append((spec, WeightMap(wm * w.values)))
    if not out:
        raise DegenerateWeightError("every domain was pruned")
    return out


# -- supervision --------------------------------------------------------------


@dataclass(frozen=True)
class SupervisionLabels:
    label_map: TravMap
    selector: np.ndarray


def supervision_labels(expert_maps: Sequence[TravMap], gt: TravMap) -> SupervisionLabels:
    """Per pixel, the prediction of the expert with the smallest squared error."""
    if not expert_maps:
        raise GridError("need at least one expert map")
    check_same_dims(gt, *expert_maps)
    stack = np.stack([t.values for t in expert_maps])
    err = (stack - gt.values) ** 2
    selector = np.argmin(err, axis=0)  # first minimum on ties
    label = np.take_along_axis(stack, selector[None], axis=0)[0]
    selector.setflags(write=False)
    return SupervisionLabels(TravMap(label), selector)
