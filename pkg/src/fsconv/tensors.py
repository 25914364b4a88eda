"""Channel-major flattening of feature maps and segment views of filters.

Everything downstream works on 1D vectors: a (c_in, d1, d2) activation
tensor flattens with the channel index fastest, then rows, then columns, so
element (i, j, k) lands at flat position k*c_in*d1 + j*c_in + i. A filter is
the same flattening of its (c_in, s1, s2) box, which makes it one contiguous
segment of the summary. All indexing here is 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OutOfRangeError, ShapeMismatchError
from .geometry import ConvGeometry, Layout, derive_layout

__all__ = [
    "FeatureMap",
    "FilterSummary",
    "unwrap_index",
    "unwrap",
    "wrap",
    "extract_filter",
    "filter_as_3d",
]


def unwrap_index(i: int, j: int, k: int, c_in: int, d1: int) -> int:
    """Flat position of element (channel i, row j, column k)."""
    if not 0 <= i < c_in:
        raise OutOfRangeError(f"channel {i} outside [0, {c_in})")
    if not 0 <= j < d1:
        raise OutOfRangeError(f"row {j} outside [0, {d1})")
    if k < 0:
        raise OutOfRangeError(f"column {k} negative")
    return k * c_in * d1 + j * c_in + i


@dataclass(frozen=True)
class FeatureMap:
    """A (c_in, d1, d2) activation tensor stored as its channel-major vector."""

    c_in: int
    d1: int
    d2: int
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.shape != (self.c_in * self.d1 * self.d2,):
            raise ShapeMismatchError(
                f"feature data has shape {data.shape}, expected "
                f"({self.c_in * self.d1 * self.d2},) for "
                f"{self.c_in}x{self.d1}x{self.d2}"
            )
        object.__setattr__(self, "data", data)

    @classmethod
    def random(cls, c_in, d1, d2, *, seed=0, dtype=np.float64):
        rng = np.random.default_rng(seed)
        data = rng.uniform(-1.0, 1.0, c_in * d1 * d2).astype(dtype)
        return cls(c_in, d1, d2, data)


def unwrap(tensor: np.ndarray) -> FeatureMap:
    """Flatten a (c_in, d1, d2) array into a FeatureMap."""
    t = np.asarray(tensor)
    if t.ndim != 3:
        raise ShapeMismatchError(f"expected a 3D tensor, got shape {t.shape}")
    c_in, d1, d2 = t.shape
    return FeatureMap(c_in, d1, d2, np.ascontiguousarray(t.transpose(2, 1, 0)).ravel())


def wrap(fmap: FeatureMap) -> np.ndarray:
    """Inverse of unwrap: rebuild the (c_in, d1, d2) array (a view)."""
    return fmap.data.reshape(fmap.d2, fmap.d1, fmap.c_in).transpose(2, 1, 0)


@dataclass(frozen=True)
class FilterSummary:
    """The shared weight vector of one layer plus its placement layout.

    `weights` has layout.phys_length entries; the slots past the nominal
    length are the padding that keeps the last filter in bounds and are
    ordinary trainable values. Filter views returned by extract_filter /
    filter_as_3d alias this array, so mutating the summary is reflected in
    previously extracted filters.
    """

    geom: ConvGeometry
    layout: Layout
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights)
        if w.shape != (self.layout.phys_length,):
            raise ShapeMismatchError(
                f"summary has shape {w.shape}, expected ({self.layout.phys_length},)"
            )
        object.__setattr__(self, "weights", w)

    @classmethod
    def random(cls, geom: ConvGeometry, *, seed=0, dtype=np.float64):
        """Seeded fan-in style init: uniform in [-b, b] with b = sqrt(6/K)."""
        layout = derive_layout(geom)
        bound = math.sqrt(6.0 / geom.filter_len)
        rng = np.random.default_rng(seed)
        w = rng.uniform(-bound, bound, layout.phys_length).astype(dtype)
        return cls(geom, layout, w)

    @classmethod
    def from_weights(cls, geom: ConvGeometry, weights):
        return cls(geom, derive_layout(geom), np.asarray(weights))


def extract_filter(fs: FilterSummary, i: int) -> np.ndarray:
    """Filter i as a length-K view of the summary (no copy)."""
    if not 0 <= i < fs.geom.c_out:
        raise OutOfRangeError(f"filter {i} outside [0, {fs.geom.c_out})")
    start = i * fs.layout.stride
    return fs.weights[start : start + fs.geom.filter_len]


def filter_as_3d(fs: FilterSummary, i: int) -> np.ndarray:
    """Filter i as a (c_in, s1, s2) view; channel-major flattening of the
    result is exactly extract_filter(fs, i)."""
    seg = extract_filter(fs, i)
    return seg.reshape(fs.geom.s2, fs.geom.s1, fs.geom.c_in).transpose(2, 1, 0)
