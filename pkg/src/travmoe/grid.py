"""Grid containers and map algebra shared by every other module.

All grids are dense, row-major float64 (or int for labels) arrays that are
frozen on construction. Operations return new objects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Rounding slack accepted by the TravMap constructor; values inside the slack
# are snapped to the closed interval, anything further out is rejected.
RANGE_SLACK = 1e-12


class GridError(ValueError):
    """Base class for grid validation failures."""


class ShapeError(GridError):
    pass


class DegenerateWeightError(GridError):
    pass


class RangeError(GridError):
    pass


class VocabularyError(GridError):
    pass


@dataclass(frozen=True)
class GridDims:
    height: int
    width: int

    def __post_init__(self):
        if int(self.height) < 1 or int(self.width) < 1:
            raise ShapeError(f"grid dims must be positive, got {self.height}x{self.width}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


def _frozen(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"expected a non-empty 2D grid, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class _Grid:
    values: np.ndarray

    @property
    def dims(self) -> GridDims:
        return GridDims(*self.values.shape)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((type(self).__name__, self.values.shape, self.values.tobytes()))


class TravMap(_Grid):
    """Traversability grid, 1 = fully traversable, 0 = blocked."""

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.array(values, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.size == 0:
            raise ShapeError(f"expected a non-empty 2D grid, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise RangeError("traversability values must be finite")
        lo, hi = arr.min(), arr.max()
        if lo < -RANGE_SLACK or hi > 1.0 + RANGE_SLACK:
            raise RangeError(f"traversability values must lie in [0, 1], got [{lo}, {hi}]")
        np.clip(arr, 0.0, 1.0, out=arr)
        arr.setflags(write=False)
        self.values = arr

    @classmethod
    def full(cls, dims: GridDims, value: float) -> "TravMap":
        return cls(np.full(dims.shape, value))

    def __repr__(self):
        return f"TravMap({self.values.shape[0]}x{self.values.shape[1]})"


class WeightMap(_Grid):
    """Non-negative per-pixel confidence of one expert.

    An all-zero map is only allowed with ``allow_zero=True`` (the empty prior
    of the fusion loop).
    """

    __slots__ = ("values",)

    def __init__(self, values, allow_zero: bool = False):
        arr = np.array(values, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.size == 0:
            raise ShapeError(f"expected a non-empty 2D grid, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0:
            raise RangeError("weights must be finite and non-negative")
        if not allow_zero and not np.any(arr > 0.0):
            raise DegenerateWeightError("weight map is identically zero")
        arr.setflags(write=False)
        self.values = arr

    @classmethod
    def zeros(cls, dims: GridDims) -> "WeightMap":
        return cls(np.zeros(dims.shape), allow_zero=True)

    @classmethod
    def full(cls, dims: GridDims, value: float) -> "WeightMap":
        return cls(np.full(dims.shape, value), allow_zero=value == 0.0)

    def mass(self) -> float:
        """L1 norm (pixel-wise sum)."""
        return float(self.values.sum())

    def __repr__(self):
        return f"WeightMap({self.values.shape[0]}x{self.values.shape[1]})"


class ElevationGrid(_Grid):
    __slots__ = ("values", "cell_size")

    def __init__(self, heights, cell_size: float):
        if not cell_size > 0:
            raise GridError(f"cell_size must be positive, got {cell_size}")
        arr = _frozen(heights)
        if not np.all(np.isfinite(arr)):
            raise RangeError("heights must be finite")
        self.values = arr
        self.cell_size = float(cell_size)

    @property
    def heights(self) -> np.ndarray:
        return self.values

    def __eq__(self, other):
        if not isinstance(other, ElevationGrid):
            return NotImplemented
        return self.cell_size == other.cell_size and super().__eq__(other)

    def __hash__(self):
        return hash((super().__hash__(), self.cell_size))


class SemanticGrid(_Grid):
    """Integer class ids indexing into ``vocabulary``."""

    __slots__ = ("values", "vocabulary")

    def __init__(self, labels, vocabulary):
        vocabulary = tuple(vocabulary)
        arr = np.array(labels, copy=True)
        if arr.dtype.kind in "US":
            index = {name: i for i, name in enumerate(vocabulary)}
            unknown = sorted(set(arr.ravel().tolist()) - index.keys())
            if unknown:
                raise VocabularyError(f"unknown semantic labels: {unknown}")
            arr = np.vectorize(index.__getitem__, otypes=[np.int64])(arr)
        arr = _frozen(arr, dtype=np.int64)
        if arr.min() < 0 or arr.max() >= len(vocabulary):
            raise VocabularyError("label id outside the registered vocabulary")
        self.values = arr
        self.vocabulary = vocabulary

    @property
    def labels(self) -> np.ndarray:
        return self.values

    def names(self) -> np.ndarray:
        return np.array(self.vocabulary, dtype=object)[self.values]

    def __eq__(self, other):
        if not isinstance(other, SemanticGrid):
            return NotImplemented
        return self.vocabulary == other.vocabulary and super().__eq__(other)

    def __hash__(self):
        return hash((super().__hash__(), self.vocabulary))


def check_same_dims(*grids) -> GridDims:
    shapes = {g.shape for g in grids}
    if len(shapes) != 1:
        raise ShapeError(f"grid dimension mismatch: {sorted(shapes)}")
    return grids[0].dims


def blend(a: TravMap, wa: WeightMap, b: TravMap, wb: WeightMap) -> TravMap:
    """Per-pixel weighted mean of two maps."""
    check_same_dims(a, wa, b, wb)
    total = wa.values + wb.values
    if np.any(total <= 0.0):
        raise DegenerateWeightError("zero total weight in blend")
    out = (a.values * wa.values + b.values * wb.values) / total
    # Keep the bounded-by-inputs property exact under rounding.
    lo = np.minimum(a.values, b.values)
    hi = np.maximum(a.values, b.values)
    return TravMap(np.clip(out, lo, hi))


def mse(a: TravMap, b: TravMap) -> float:
    check_same_dims(a, b)
    return float(np.mean((a.values - b.values) ** 2))
