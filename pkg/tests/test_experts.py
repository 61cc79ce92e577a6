import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from travmoe.experts import (
    VOCABULARY,
    ExpertId,
    ExpertKind,
    ExpertSpec,
    GeometricParams,
    TravCostTable,
    expert_flop_cost,
    geometric_estimate,
    noisy_oracle_estimate,
    semantic_estimate,
)
from travmoe.grid import ElevationGrid, GridError, SemanticGrid, TravMap, VocabularyError


def _spec(kind="constant", **kw):
    return ExpertSpec(ExpertId(1, 1, "e"), kind, **kw)


def test_flat_ground_is_fully_traversable():
    t = geometric_estimate(ElevationGrid(np.zeros((5, 6)), 0.1))
    np.testing.assert_array_equal(t.values, np.ones((5, 6)))


def test_wall_column_is_blocked():
    h = np.zeros((6, 7))
    h[:, 3] = 1.0
    t = geometric_estimate(ElevationGrid(h, 0.1), GeometricParams(max_slope=math.radians(30), max_step=0.2))
    np.testing.assert_array_equal(t.values[:, 3], 0.0)
    # Far from the wall nothing changes.
    np.testing.assert_array_equal(t.values[:, 0], 1.0)


def test_ramp_penalty_matches_linear_rule():
    # 45 degree ramp: rise of one cell size per column; step 0.1 m stays under max_step.
    cs = 0.1
    h = np.tile(np.arange(8) * cs, (5, 1))
    t = geometric_estimate(ElevationGrid(h, cs), GeometricParams(max_slope=math.radians(30), max_step=0.2))
    # (2*30 - 45) / 30
    np.testing.assert_allclose(t.values, 0.5, atol=1e-12)


def test_geometric_is_pure():
    rng = np.random.default_rng(0)
    elev = ElevationGrid(rng.normal(size=(9, 9)) * 0.1, 0.2)
    assert geometric_estimate(elev).values.tobytes() == geometric_estimate(elev).values.tobytes()


def test_semantic_single_class_lookups():
    table = TravCostTable()
    side = SemanticGrid(np.full((3, 3), VOCABULARY.index("sidewalk")), VOCABULARY)
    person = SemanticGrid(np.full((3, 3), VOCABULARY.index("person")), VOCABULARY)
    np.testing.assert_array_equal(semantic_estimate(side, table).values, 1.0)
    np.testing.assert_array_equal(semantic_estimate(person, table).values, 0.0)


def test_semantic_matches_scalar_loop():
    rng = np.random.default_rng(3)
    labels = rng.integers(0, len(VOCABULARY), size=(6, 5))
    table = TravCostTable(c_free=0.95, c_mid1=0.75, c_mid2=0.5, c_mid3=0.3, c_obs=0.05)
    out = semantic_estimate(SemanticGrid(labels, VOCABULARY), table)
    for i in range(6):
        for j in range(5):
            assert out.values[i, j] == table.value(VOCABULARY[labels[i, j]])


def test_semantic_unknown_label():
    with pytest.raises(VocabularyError):
        semantic_estimate(SemanticGrid([["puddle"]], ("puddle",)), TravCostTable())


def test_cost_table_ordering_enforced():
    with pytest.raises(GridError):
        TravCostTable(c_free=0.5, c_mid1=0.7)
    with pytest.raises(GridError):
        TravCostTable(c_obs=0.5, c_mid3=0.4)


def test_noisy_oracle_identity_and_determinism():
    gt = TravMap(np.random.default_rng(1).random((10, 10)))
    assert noisy_oracle_estimate(gt, 0.0, seed=5) == gt
    a = noisy_oracle_estimate(gt, 0.2, seed=5)
    b = noisy_oracle_estimate(gt, 0.2, seed=5)
    assert a.values.tobytes() == b.values.tobytes()
    assert a != noisy_oracle_estimate(gt, 0.2, seed=6)


def test_noisy_oracle_sample_std():
    gt = TravMap(np.full((100, 100), 0.5))
    out = noisy_oracle_estimate(gt, 0.1, seed=11)
    diff = out.values - gt.values
    interior = (out.values > 0.0) & (out.values < 1.0)
    assert abs(diff[interior].std() - 0.1) <= 0.02


def test_flop_costs():
    assert expert_flop_cost(_spec(flop_cost=0.13)) == 0.13
    assert expert_flop_cost(_spec("semantic_table", flop_cost=48.3)) == 48.3
    assert expert_flop_cost(_spec()) == 1.0
    with pytest.raises(GridError):
        _spec(flop_cost=-1.0)
    assert _spec("geometric").kind is ExpertKind.GEOMETRIC


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, (6, 6), elements=st.floats(-3, 3, allow_nan=False)),
    st.floats(0.01, 1.0),
    st.floats(0.05, 1.5),
    st.floats(0.01, 1.0),
)
def test_geometric_output_in_unit_interval(heights, cs, slope, step):
    t = geometric_estimate(ElevationGrid(heights, cs), GeometricParams(slope, step))
    assert t.values.min() >= 0.0 and t.values.max() <= 1.0


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (5, 5), elements=st.floats(0, 1)), st.floats(0, 2), st.integers(0, 2**31))
def test_noisy_output_in_unit_interval(gt, std, seed):
    t = noisy_oracle_estimate(TravMap(gt), std, seed)
    assert t.values.min() >= 0.0 and t.values.max() <= 1.0
