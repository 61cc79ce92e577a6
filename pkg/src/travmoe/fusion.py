"""Incremental weighted fusion and the pessimistic/optimistic completion maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import (
    DegenerateWeightError,
    GridError,
    TravMap,
    WeightMap,
    check_same_dims,
)


@dataclass(frozen=True)
class FusionState:
    """Fused map after ``steps_done`` experts.

    ``weight_total`` is the summed weight of every expert in the queue, known
    up front because the router emits all weight maps before any expert runs.
    """

    weight_prior: WeightMap
    weight_total: WeightMap
    steps_done: int = 0
    fused: TravMap | None = None

    def __post_init__(self):
        check_same_dims(self.weight_prior, self.weight_total)
        if self.steps_done < 0:
            raise GridError("steps_done must be >= 0")
        if (self.fused is None) != (self.steps_done == 0):
            raise GridError("fused map is defined iff steps_done >= 1")
        if self.fused is not None:
            check_same_dims(self.fused, self.weight_total)

    @classmethod
    def start(cls, weight_total: WeightMap) -> "FusionState":
        return cls(WeightMap.zeros(weight_total.dims), weight_total)

    @classmethod
    def for_weights(cls, weights: Sequence[WeightMap]) -> "FusionState":
        return cls.start(total_weight(weights))

    def remaining(self) -> np.ndarray:
        # Clamped: the running prior and the up-front total are summed in the
        # same order, so any negative here is rounding.
        return np.maximum(self.weight_total.values - self.weight_prior.values, 0.0)


def total_weight(weights: Sequence[WeightMap]) -> WeightMap:
    """Sequential sum, in queue order, matching the running prior exactly."""
    if not weights:
        raise GridError("need at least one weight map")
    check_same_dims(*weights)
    acc = weights[0].values.copy()
    for w in weights[1:]:
        acc = acc + w.values
    return WeightMap(acc, allow_zero=True)


def fuse_step(state: FusionState, t_hat: TravMap, w_k: WeightMap) -> FusionState:
    check_same_dims(t_hat, w_k, state.weight_total)
    if state.steps_done == 0:
        if np.any(w_k.values <= 0.0):
            raise DegenerateWeightError("zero weight at initialization")
        return FusionState(w_k, state.weight_total, 1, t_hat)

    prior = state.weight_prior.values
    combined = prior + w_k.values
    if np.any(combined <= 0.0):
        raise DegenerateWeightError("zero combined weight in fusion step")
    fused = (state.fused.values * prior + t_hat.values * w_k.values) / combined
    lo = np.minimum(state.fused.values, t_hat.values)
    hi = np.maximum(state.fused.values, t_hat.values)
    return FusionState(
        WeightMap(combined),
        state.weight_total,
        state.steps_done + 1,
        TravMap(np.clip(fused, lo, hi)),
    )


def fuse_batch(maps: Sequence[TravMap], weights: Sequence[WeightMap]) -> TravMap:
    """One-shot weighted combination sum(T_k * W_k) / sum(W_k)."""
    if not maps:
        raise GridError("fuse_batch needs at least one map")
    if len(maps) != len(weights):
        raise GridError(f"{len(maps)} maps but {len(weights)} weight maps")
    check_same_dims(*maps, *weights)
    num = np.zeros(maps[0].shape)
    den = np.zeros(maps[0].shape)
    for t, w in zip(maps, weights):
        num += t.values * w.values
        den += w.values
    if np.any(den <= 0.0):
        raise DegenerateWeightError("zero total weight in batch fusion")
    return TravMap(np.clip(num / den, 0.0, 1.0))


def _require_started(state: FusionState) -> None:
    if state.steps_done < 1:
        raise GridError("expectation maps need at least one fused expert")
    if np.any(state.weight_total.values <= 0.0):
        raise DegenerateWeightError("zero total weight")


def lower_expectation(state: FusionState) -> TravMap:
    """Completion where every unexecuted expert reports 0."""
    _require_started(state)
    f = state.fused.values
    rem = state.remaining()
    total = state.weight_total.values
    out = np.where(rem > 0.0, f * state.weight_prior.values / total, f)
    return TravMap(np.minimum(np.clip(out, 0.0, 1.0), f))


def upper_expectation(state: FusionState) -> TravMap:
    """Completion where every unexecuted expert reports 1."""
    _require_started(state)
    f = state.fused.values
    rem = state.remaining()
    total = state.weight_total.values
    out = np.where(rem > 0.0, (f * state.weight_prior.values + rem) / total, f)
    return TravMap(np.maximum(np.clip(out, 0.0, 1.0), f))
