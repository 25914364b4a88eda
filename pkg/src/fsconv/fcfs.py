"""Exact convolution from diagonal prefix sums of the product matrix.

Conceptually there is a matrix A with A[x, y] = padded_map[x] * summary[y].
Every slice inner product the convolution needs — a patch column against the
matching filter column, both contiguous runs of c_in*s1 elements — is the sum
of one diagonal segment of A. So instead of forming A, this module:

  stage 1  materializes only the diagonal segments some slice pair touches,
           one multiply per materialized entry (weights shared between
           overlapping filters and patches are multiplied once);
  stage 2  turns each segment into a running prefix sum (additions only);
  stage 3  reads every slice inner product back as a single subtraction of
           two prefix values and accumulates the s2 slice results per
           (filter, output position), in slice order.

Diagonals are keyed by offset = row - column. A filter stride that is a
multiple of c_in keeps every needed offset on the channel-aligned residue,
which bounds the number of distinct diagonals; for other strides the
reference engine is used instead (with a warning), since the scattered
diagonal set defeats the sharing this path exists for.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .counters import MultCounter
from .errors import ShapeMismatchError, UnsupportedGeometryError
from .geometry import PredictedAcceleration, predicted_acceleration
from .oracle import ConvOutput, naive_conv, pad_same
from .tensors import FeatureMap, FilterSummary

__all__ = [
    "DiagonalIntegral",
    "AccelerationReport",
    "required_diagonals",
    "build_integrals",
    "fcfs_conv",
    "measured_acceleration",
]


@dataclass(frozen=True)
class DiagonalIntegral:
    """Prefix sums along one needed diagonal of the product matrix.

    integral[t] = sum of padded[y + offset] * summary[y] for
    y in [start_col, start_col + t], i.e. inclusive prefix sums over the
    materialized column extent [start_col, end_col).
    """

    offset: int
    start_col: int
    end_col: int
    integral: np.ndarray

    def segment_sum(self, lo: int, hi: int):
        """Sum of products over columns [lo, hi) — one subtraction."""
        if not (self.start_col <= lo <= hi <= self.end_col):
            raise ShapeMismatchError(
                f"segment [{lo}, {hi}) outside extent "
                f"[{self.start_col}, {self.end_col}) of diagonal {self.offset}"
            )
        if lo == hi:
            return self.integral.dtype.type(0)
        upper = self.integral[hi - 1 - self.start_col]
        if lo == self.start_col:
            return upper
        return upper - self.integral[lo - 1 - self.start_col]


def _check_fast_path(geom):
    if geom.s2 == 1:
        raise UnsupportedGeometryError(
            "the integral-line path only pays off for s2 > 1; "
            "use the reference engine for s2 == 1 layers"
        )


def _slice_pairs(geom, layout, d1, d2):
    """Row/column starts of every needed slice pair.

    For output position (m, n), slice k of filter i pairs the padded-map run
    starting at a = (n+k)*c_in*p1 + m*c_in with the summary run starting at
    b = i*stride + k*c_in*s1, both of length c_in*s1. Returns (offsets a-b,
    starts b) as int64 arrays of shape (s2, c_out, d1, d2).
    """
    p1 = d1 + geom.s1 - 1
    k, i, m, n = np.indices((geom.s2, geom.c_out, d1, d2), dtype=np.int64)
    a = (n + k) * (geom.c_in * p1) + m * geom.c_in
    b = i * layout.stride + k * geom.slice_len
    return a - b, b


def required_diagonals(fs: FilterSummary, fmap: FeatureMap) -> dict[int, list[tuple[int, int]]]:
    """Exact set of diagonal offsets with the column extents they need.

    Maps offset -> sorted disjoint [start, stop) column runs, the union of
    the length-(c_in*s1) segments of every slice pair. Nothing outside these
    runs is ever multiplied.
    """
    geom, layout = fs.geom, fs.layout
    _check_fast_path(geom)
    if fmap.c_in != geom.c_in:
        raise ShapeMismatchError(
            f"feature map has {fmap.c_in} channels, layer expects {geom.c_in}"
        )
    offs, starts = _slice_pairs(geom, layout, fmap.d1, fmap.d2)
    pairs = np.unique(np.stack((offs.ravel(), starts.ravel()), axis=1), axis=0)
    width = geom.slice_len

    runs: dict[int, list[tuple[int, int]]] = {}
    cur_off = None
    cur_lo = cur_hi = 0
    for off, b in pairs:
        off = int(off)
        b = int(b)
        if off != cur_off or b > cur_hi:
            if cur_off is not None:
                runs.setdefault(cur_off, []).append((cur_lo, cur_hi))
            cur_off, cur_lo, cur_hi = off, b, b + width
        else:
            cur_hi = max(cur_hi, b + width)
    if cur_off is not None:
        runs.setdefault(cur_off, []).append((cur_lo, cur_hi))
    return runs


def build_integrals(
    fs: FilterSummary,
    fmap: FeatureMap,
    diagonals: dict[int, list[tuple[int, int]]],
    counter: MultCounter | None = None,
) -> dict[int, list[DiagonalIntegral]]:
    """Stage 1 + 2: materialize the needed diagonal segments and prefix-sum
    them. One multiply is counted per materialized entry; the prefix pass
    adds but never multiplies."""
    geom = fs.geom
    padded = pad_same(fmap, geom.s1, geom.s2).data
    weights = fs.weights
    out: dict[int, list[DiagonalIntegral]] = {}
    for off, runs in diagonals.items():
        lines = []
        for lo, hi in runs:
            products = padded[lo + off : hi + off] * weights[lo:hi]
            if counter is not None:
                counter.multiplies += hi - lo
                counter.additions += hi - lo - 1
            lines.append(DiagonalIntegral(off, lo, hi, np.cumsum(products)))
        out[off] = lines
    return out


def fcfs_conv(fs: FilterSummary, fmap: FeatureMap) -> tuple[ConvOutput, MultCounter]:
    """Convolve via diagonal integral lines; exact, not approximate.

    Equals naive_conv up to floating reassociation (the prefix sums regroup
    the same products). Falls back to the reference engine with a warning
    when the filter stride is not channel-aligned; raises for s2 == 1.
    """
    geom, layout = fs.geom, fs.layout
    _check_fast_path(geom)
    if fmap.c_in != geom.c_in:
        raise ShapeMismatchError(
            f"feature map has {fmap.c_in} channels, layer expects {geom.c_in}"
        )
    counter = MultCounter()
    if layout.stride % geom.c_in != 0:
        warnings.warn(
            f"filter stride {layout.stride} is not a multiple of c_in={geom.c_in}; "
            "diagonal offsets scatter across channel residues, computing with "
            "the reference engine instead",
            stacklevel=2,
        )
        return naive_conv(fs, fmap, counter), counter

    diagonals = required_diagonals(fs, fmap)
    integrals = build_integrals(fs, fmap, diagonals, counter)

    # Flat tables over all runs, in (offset, start) order, for vectorized
    # stage-3 lookups. Each run contributes an exclusive prefix array of
    # length run_len + 1 so a segment sum is always two reads.
    run_offsets = []
    run_starts = []
    run_base = []
    chunks = []
    pos = 0
    for off in integrals:
        for line in integrals[off]:
            run_offsets.append(line.offset)
            run_starts.append(line.start_col)
            run_base.append(pos)
            zero = np.zeros(1, dtype=line.integral.dtype)
            chunks.append(zero)
            chunks.append(line.integral)
            pos += line.integral.size + 1
    flat = np.concatenate(chunks)
    run_offsets = np.asarray(run_offsets, dtype=np.int64)
    run_starts = np.asarray(run_starts, dtype=np.int64)
    run_base = np.asarray(run_base, dtype=np.int64)

    d1, d2 = fmap.d1, fmap.d2
    width = geom.slice_len
    offs, starts = _slice_pairs(geom, layout, d1, d2)
    offs = offs.reshape(-1)
    starts = starts.reshape(-1)

    # Composite (offset, column) keys; the run containing a segment is the
    # last run with (offset, start) <= (offset, segment start).
    span = np.int64(layout.phys_length + 1)
    off_min = run_offsets.min()
    run_keys = (run_offsets - off_min) * span + run_starts
    pair_keys = (offs - off_min) * span + starts
    idx = np.searchsorted(run_keys, pair_keys, side="right") - 1
    rel = starts - run_starts[idx] + run_base[idx]
    slice_sums = flat[rel + width] - flat[rel]
    counter.additions += slice_sums.size
    counter.lookups += slice_sums.size

    per_slice = slice_sums.reshape(geom.s2, geom.c_out, d1, d2)
    out = np.zeros((geom.c_out, d1, d2), dtype=per_slice.dtype)
    for k in range(geom.s2):  # fixed slice order keeps results bit-stable
        out += per_slice[k]
    counter.additions += (geom.s2 - 1) * geom.c_out * d1 * d2
    data = np.ascontiguousarray(out.transpose(2, 1, 0)).ravel()
    return ConvOutput(geom.c_out, d1, d2, data), counter


@dataclass(frozen=True)
class AccelerationReport:
    """Side-by-side multiply accounting of both engines on one input.

    measured_ratio charges the integral-line path its materialized products
    plus the s2 per-output-element lookups (the same accounting the
    closed-form prediction uses); `predicted` is that closed form. The two
    are reported separately because the closed form undercounts the first
    stage (see required_diagonals: slice starts of patches occupy all s1
    residues, not one).
    """

    naive: MultCounter
    fcfs: MultCounter
    measured_ratio: Fraction
    predicted: PredictedAcceleration


def measured_acceleration(fs: FilterSummary, fmap: FeatureMap) -> AccelerationReport:
    """Run both engines with instrumentation and compare multiply counts."""
    naive_counter = MultCounter()
    naive_conv(fs, fmap, naive_counter)
    _, fast_counter = fcfs_conv(fs, fmap)
    denom = fast_counter.multiplies + fast_counter.lookups
    return AccelerationReport(
        naive=naive_counter,
        fcfs=fast_counter,
        measured_ratio=Fraction(naive_counter.multiplies, denom),
        predicted=predicted_acceleration(fs.geom, fs.layout, fmap.d1, fmap.d2),
    )
