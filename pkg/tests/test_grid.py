import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from travmoe.grid import (
    DegenerateWeightError,
    ElevationGrid,
    GridDims,
    RangeError,
    SemanticGrid,
    ShapeError,
    TravMap,
    VocabularyError,
    WeightMap,
    blend,
    mse,
)

from oracles import blend_loop

unit = st.floats(0.0, 1.0, allow_nan=False)
positive = st.floats(1e-3, 10.0, allow_nan=False)


def test_dims_must_be_positive():
    assert GridDims(2, 3).shape == (2, 3)
    with pytest.raises(ShapeError):
        GridDims(0, 3)


def test_travmap_rejects_out_of_range():
    with pytest.raises(RangeError):
        TravMap([[1.5]])
    with pytest.raises(RangeError):
        TravMap([[-0.1]])
    with pytest.raises(RangeError):
        TravMap([[np.nan]])


def test_travmap_is_immutable():
    t = TravMap([[0.5, 0.5]])
    with pytest.raises(ValueError):
        t.values[0, 0] = 1.0


def test_weightmap_zero_only_when_requested():
    with pytest.raises(DegenerateWeightError):
        WeightMap([[0.0, 0.0]])
    assert WeightMap([[0.0, 0.0]], allow_zero=True).mass() == 0.0
    with pytest.raises(RangeError):
        WeightMap([[-1.0]])


def test_elevation_and_semantic_validation():
    with pytest.raises(Exception):
        ElevationGrid([[0.0]], cell_size=0.0)
    with pytest.raises(RangeError):
        ElevationGrid([[np.inf]], cell_size=1.0)
    sem = SemanticGrid([["a", "b"]], vocabulary=("a", "b"))
    assert sem.labels.tolist() == [[0, 1]]
    with pytest.raises(VocabularyError):
        SemanticGrid([["a", "zzz"]], vocabulary=("a", "b"))
    with pytest.raises(VocabularyError):
        SemanticGrid([[0, 5]], vocabulary=("a", "b"))


def test_blend_equal_weights():
    out = blend(TravMap([[0.8]]), WeightMap([[1.0]]), TravMap([[0.2]]), WeightMap([[1.0]]))
    assert out.values[0, 0] == pytest.approx(0.5, abs=1e-15)


def test_blend_zero_weight_is_identity():
    a = TravMap([[0.3, 0.9], [0.1, 0.0]])
    b = TravMap([[1.0, 0.2], [0.5, 0.7]])
    out = blend(a, WeightMap(np.full((2, 2), 2.0)), b, WeightMap.zeros(GridDims(2, 2)))
    np.testing.assert_array_equal(out.values, a.values)


def test_blend_matches_scalar_loop():
    rng = np.random.default_rng(7)
    a, b = rng.random((4, 4)), rng.random((4, 4))
    wa, wb = rng.random((4, 4)) + 0.01, rng.random((4, 4)) + 0.01
    out = blend(TravMap(a), WeightMap(wa), TravMap(b), WeightMap(wb))
    expected = blend_loop(a.tolist(), wa.tolist(), b.tolist(), wb.tolist())
    np.testing.assert_allclose(out.values, expected, rtol=0, atol=1e-15)


def test_blend_errors():
    a = TravMap([[0.5]])
    with pytest.raises(ShapeError):
        blend(a, WeightMap([[1.0]]), TravMap([[0.5, 0.5]]), WeightMap([[1.0, 1.0]]))
    z = WeightMap.zeros(GridDims(1, 1))
    with pytest.raises(DegenerateWeightError):
        blend(a, z, a, z)


@settings(max_examples=200, deadline=None)
@given(
    st.integers(1, 5).flatmap(
        lambda n: st.tuples(*(arrays(np.float64, (n, n), elements=e) for e in (unit, positive, unit, positive)))
    )
)
def test_blend_symmetric_and_bounded(grids):
    a, wa, b, wb = grids
    ab = blend(TravMap(a), WeightMap(wa), TravMap(b), WeightMap(wb))
    ba = blend(TravMap(b), WeightMap(wb), TravMap(a), WeightMap(wa))
    np.testing.assert_allclose(ab.values, ba.values, rtol=0, atol=1e-12)
    assert np.all(ab.values >= np.minimum(a, b))
    assert np.all(ab.values <= np.maximum(a, b))


def test_mse_examples():
    a = TravMap([[0.2, 0.7]])
    assert mse(a, a) == 0.0
    assert mse(TravMap([[1.0]]), TravMap([[0.0]])) == 1.0
    # ((1 - 0.5)^2 + (0 - 0.5)^2) / 2
    assert mse(TravMap([[1.0, 0.0]]), TravMap([[0.5, 0.5]])) == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(ShapeError):
        mse(a, TravMap([[0.1]]))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4).flatmap(lambda n: st.tuples(arrays(np.float64, (n, n), elements=unit), arrays(np.float64, (n, n), elements=unit))))
def test_mse_symmetric_nonnegative(pair):
    a, b = TravMap(pair[0]), TravMap(pair[1])
    assert mse(a, b) == mse(b, a)
    assert mse(a, b) >= 0.0
    assert mse(a, a) == 0.0
