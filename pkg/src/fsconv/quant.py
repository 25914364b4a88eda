"""n-bit linear weight grids and exact affine inference on the coded weights.

A layer quantizes to evenly spaced levels between its own min and max:
tau = (w_max - w_min)/(2^nbits - 1) and code = nearest level index, so
reconstruction w_min + tau*code is off by at most tau/2. Because the grid is
affine, a dense layer can run directly on the integer codes: with shared
(w_min, tau) for weights and bias,

    y~ = tau * (codes_W @ x + codes_b) + w_min * (sum(x) + 1)

is algebraically identical to dequantizing first — the fast path costs the
dense multiply count plus one multiply per output element for the tau
scaling, one for the rank-one constant, and len(x) - 1 additions for the
input sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np

from .counters import MultCounter
from .errors import EmptyInputError, ShapeMismatchError

__all__ = [
    "QuantizedSummary",
    "quantize",
    "dequantize",
    "quantize_affine_layer",
    "quantized_affine_forward",
    "effective_params",
]

_WEIGHT_FRACTION = {8: Fraction(1, 4), 4: Fraction(1, 8)}


@dataclass(frozen=True)
class QuantizedSummary:
    """Level codes plus the per-layer grid needed to reconstruct them.

    codes are uint8 in [0, 2^nbits - 1] (same shape as the source array);
    w_min / w_max are the exact grid endpoints.
    """

    codes: np.ndarray
    nbits: int
    w_min: float
    w_max: float

    def __post_init__(self):
        if self.nbits not in _WEIGHT_FRACTION:
            raise ValueError(f"nbits must be 4 or 8, got {self.nbits}")
        codes = np.asarray(self.codes, dtype=np.uint8)
        if codes.size and int(codes.max()) > self.levels - 1:
            raise ValueError(f"code {int(codes.max())} exceeds {self.levels - 1}")
        object.__setattr__(self, "codes", codes)

    @property
    def levels(self) -> int:
        return (1 << self.nbits) - 1 + 1

    @property
    def tau(self) -> float:
        """Grid step, (w_max - w_min)/(2^nbits - 1); 0 for a constant layer."""
        return (self.w_max - self.w_min) / (self.levels - 1)


def quantize(weights, nbits: int, *, w_min=None, w_max=None) -> QuantizedSummary:
    """Snap each weight to its nearest grid level.

    The grid endpoints default to the exact extrema of the input; pass
    w_min/w_max to place several arrays (e.g. a weight matrix and its bias)
    on one shared layer grid. Ties between levels round half away from zero.
    A constant input yields tau = 0 with all codes 0.
    """
    if nbits not in _WEIGHT_FRACTION:
        raise ValueError(f"nbits must be 4 or 8, got {nbits}")
    arr = np.asarray(weights, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInputError("cannot quantize an empty weight vector")
    lo = float(arr.min()) if w_min is None else float(w_min)
    hi = float(arr.max()) if w_max is None else float(w_max)
    if hi < lo:
        raise ValueError(f"w_max {hi} below w_min {lo}")
    levels = (1 << nbits) - 1
    if hi == lo:
        codes = np.zeros(arr.shape, dtype=np.uint8)
    else:
        tau = (hi - lo) / levels
        # arguments are >= 0, so half-away-from-zero is floor(q + 0.5)
        codes = np.floor((arr - lo) / tau + 0.5)
        codes = np.clip(codes, 0, levels).astype(np.uint8)
    return QuantizedSummary(codes=codes, nbits=nbits, w_min=lo, w_max=hi)


def dequantize(q: QuantizedSummary) -> np.ndarray:
    """Reconstruct w_min + tau*code (float64, same shape as the codes)."""
    return q.w_min + q.tau * q.codes.astype(np.float64)


def quantize_affine_layer(weight, bias, nbits: int) -> tuple[QuantizedSummary, QuantizedSummary]:
    """Quantize a dense layer's weight matrix and bias on one shared grid
    (one min/max pair per layer), as quantized_affine_forward requires."""
    w = np.asarray(weight, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    if w.size == 0 or b.size == 0:
        raise EmptyInputError("cannot quantize an empty layer")
    lo = min(float(w.min()), float(b.min()))
    hi = max(float(w.max()), float(b.max()))
    return (
        quantize(w, nbits, w_min=lo, w_max=hi),
        quantize(b, nbits, w_min=lo, w_max=hi),
    )


def quantized_affine_forward(
    q_w: QuantizedSummary,
    q_b: QuantizedSummary,
    x,
    counter: Optional[MultCounter] = None,
) -> np.ndarray:
    """Dense forward y~ = W~ @ x + b~ evaluated on the integer codes.

    W~ and b~ are the dequantized weights, but they are never formed: the
    integer path plus the rank-one correction w_min*(sum(x) + 1) gives the
    identical result. Requires q_w and q_b on the same grid (use
    quantize_affine_layer). x is a length-n vector for an (m, n) weight
    matrix.
    """
    if (q_w.nbits, q_w.w_min, q_w.w_max) != (q_b.nbits, q_b.w_min, q_b.w_max):
        raise ValueError(
            "weight and bias must share one layer grid "
            f"(got {(q_w.w_min, q_w.w_max, q_w.nbits)} vs "
            f"{(q_b.w_min, q_b.w_max, q_b.nbits)}); quantize them together"
        )
    x = np.asarray(x, dtype=np.float64)
    if q_w.codes.ndim != 2 or q_b.codes.ndim != 1 or x.ndim != 1:
        raise ShapeMismatchError("expected a 2D weight matrix, 1D bias and 1D input")
    n_out, n_in = q_w.codes.shape
    if q_b.codes.shape != (n_out,) or x.shape != (n_in,):
        raise ShapeMismatchError(
            f"shapes disagree: W {q_w.codes.shape}, b {q_b.codes.shape}, x {x.shape}"
        )
    y0 = q_w.codes.astype(np.float64) @ x + q_b.codes.astype(np.float64)
    sx = float(x.sum())
    if counter is not None:
        counter.multiplies += n_out * n_in  # integer-code dense path
        counter.additions += n_out * (n_in - 1) + n_out
        counter.multiplies += n_out + 1  # tau scaling + rank-one constant
        counter.additions += (n_in - 1) + n_out  # input sum + correction add
    return q_w.tau * y0 + q_w.w_min * (sx + 1.0)


def effective_params(layers: Iterable[tuple[int, Optional[int]]]) -> Fraction:
    """Storage-normalized parameter count.

    Each layer is (weight_count, nbits) with nbits None for full precision.
    An 8-bit weight stores in a quarter of a float32, a 4-bit weight in an
    eighth; every quantized layer additionally keeps its two grid endpoints
    at full precision.
    """
    total = Fraction(0)
    for count, nbits in layers:
        if count < 0:
            raise ValueError(f"negative layer size {count}")
        if nbits is None:
            total += count
        elif nbits in _WEIGHT_FRACTION:
            total += count * _WEIGHT_FRACTION[nbits] + 2
        else:
            raise ValueError(f"nbits must be 4, 8 or None, got {nbits}")
    return total
