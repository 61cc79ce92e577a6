import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from travmoe.fusion import (
    FusionState,
    fuse_batch,
    fuse_step,
    lower_expectation,
    total_weight,
    upper_expectation,
)
from travmoe.grid import DegenerateWeightError, GridDims, GridError, TravMap, WeightMap

from oracles import weighted_mean_loop


def _random_case(rng, k, shape=(5, 4)):
    maps = [TravMap(rng.random(shape)) for _ in range(k)]
    weights = [WeightMap(rng.random(shape) * rng.uniform(0.01, 5.0) + 1e-6) for _ in range(k)]
    return maps, weights


def _run(maps, weights):
    state = FusionState.for_weights(weights)
    states = []
    for t, w in zip(maps, weights):
        state = fuse_step(state, t, w)
        states.append(state)
    return states


def test_first_step_is_initialization():
    t = TravMap([[0.3, 0.7]])
    w = WeightMap([[2.0, 1.0]])
    s = fuse_step(FusionState.start(WeightMap([[5.0, 5.0]])), t, w)
    assert s.steps_done == 1
    assert s.fused == t
    np.testing.assert_array_equal(s.weight_prior.values, w.values)


def test_zero_weight_at_init_rejected():
    with pytest.raises(DegenerateWeightError):
        fuse_step(FusionState.start(WeightMap([[1.0, 1.0]])), TravMap([[0.5, 0.5]]), WeightMap([[1.0, 0.0]], allow_zero=True))


def test_state_invariants():
    w = WeightMap([[1.0]])
    with pytest.raises(GridError):
        FusionState(w, w, 1, None)
    with pytest.raises(GridError):
        FusionState(w, w, 0, TravMap([[0.5]]))


def test_two_step_example():
    s = _run([TravMap([[0.8]]), TravMap([[0.2]])], [WeightMap([[1.0]]), WeightMap([[3.0]])])[-1]
    # (0.8*1 + 0.2*3) / 4
    assert s.fused.values[0, 0] == pytest.approx(0.35, abs=1e-15)


def test_expectation_example():
    # fused 0.6 with prior 2 of total 4: lower 0.6*2/4, upper (0.6*2 + 2)/4
    s = FusionState(WeightMap([[2.0]]), WeightMap([[4.0]]), 1, TravMap([[0.6]]))
    assert lower_expectation(s).values[0, 0] == pytest.approx(0.3, abs=1e-15)
    assert upper_expectation(s).values[0, 0] == pytest.approx(0.8, abs=1e-15)


def test_expectations_require_a_step():
    s = FusionState.start(WeightMap([[1.0]]))
    with pytest.raises(GridError):
        lower_expectation(s)
    with pytest.raises(GridError):
        upper_expectation(s)


def test_batch_matches_scalar_loop():
    rng = np.random.default_rng(2)
    maps, weights = _random_case(rng, 4, (3, 3))
    out = fuse_batch(maps, weights)
    expected = weighted_mean_loop([m.values.tolist() for m in maps], [w.values.tolist() for w in weights])
    np.testing.assert_allclose(out.values, expected, rtol=0, atol=1e-12)


def test_batch_errors():
    t, w = TravMap([[0.5]]), WeightMap([[1.0]])
    with pytest.raises(GridError):
        fuse_batch([], [])
    with pytest.raises(GridError):
        fuse_batch([t, t], [w])
    z = WeightMap.zeros(GridDims(1, 1))
    with pytest.raises(DegenerateWeightError):
        fuse_batch([t], [z])


def test_last_step_expectations_collapse():
    rng = np.random.default_rng(9)
    maps, weights = _random_case(rng, 5)
    final = _run(maps, weights)[-1]
    assert lower_expectation(final) == final.fused
    assert upper_expectation(final) == final.fused


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_incremental_equals_batch(k, seed):
    maps, weights = _random_case(np.random.default_rng(seed), k)
    final = _run(maps, weights)[-1]
    np.testing.assert_allclose(final.fused.values, fuse_batch(maps, weights).values, rtol=0, atol=1e-9)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_bracketing_and_nesting(k, seed):
    maps, weights = _random_case(np.random.default_rng(seed), k)
    states = _run(maps, weights)
    prev_lo = prev_hi = None
    for s in states:
        lo, hi, f = lower_expectation(s).values, upper_expectation(s).values, s.fused.values
        assert np.all(lo <= f) and np.all(f <= hi)
        assert np.all((lo >= 0) & (hi <= 1))
        if prev_lo is not None:
            # intervals shrink as more experts report
            assert np.all(lo >= prev_lo - 1e-12)
            assert np.all(hi <= prev_hi + 1e-12)
        prev_lo, prev_hi = lo, hi


def test_total_weight_matches_running_prior():
    rng = np.random.default_rng(4)
    maps, weights = _random_case(rng, 6)
    final = _run(maps, weights)[-1]
    np.testing.assert_array_equal(final.weight_prior.values, total_weight(weights).values)
    assert np.all(final.remaining() == 0.0)
