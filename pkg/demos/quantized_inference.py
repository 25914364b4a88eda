#!/usr/bin/env python3
"""Snapping shared weights to an n-bit grid, and running on the codes.

A layer's weights quantize to 2^n evenly spaced levels between its min and
max, so each weight moves at most half a step. Because the grid is affine,
a dense layer never needs the reconstructed floats: the integer codes plus
a rank-one correction give the bit-for-bit same answer.
"""

import numpy as np

from fsconv import (
    ConvGeometry,
    FeatureMap,
    FilterSummary,
    dequantize,
    effective_params,
    naive_conv,
    quantize,
    quantize_affine_layer,
    quantized_affine_forward,
)

rng = np.random.default_rng(0)

print("=== reconstruction error vs the grid step ===")
weights = rng.standard_normal(2000) * 0.3
for nbits in (8, 4):
    q = quantize(weights, nbits)
    err = np.max(np.abs(weights - dequantize(q)))
    print(f"{nbits}-bit: step tau = {q.tau:.5f}, worst error {err:.5f} "
          f"(bound tau/2 = {q.tau / 2:.5f})")

print()
print("=== a quantized convolution layer ===")
geom = ConvGeometry(8, 3, 3, 16, 2)
fs = FilterSummary.random(geom, seed=1)
fmap = FeatureMap.random(8, 12, 12, seed=2)
q = quantize(fs.weights, 8)
qfs = FilterSummary(geom, fs.layout, dequantize(q))
exact = naive_conv(fs, fmap)
coarse = naive_conv(qfs, fmap)
worst = np.max(np.abs(exact.data - coarse.data))
bound = q.tau / 2 * geom.filter_len * np.max(np.abs(fmap.data))
print(f"output error {worst:.5f} <= tau/2 * K * max|x| = {bound:.5f}")

print()
print("=== the integer-path identity for dense layers ===")
w = rng.standard_normal((32, 64))
b = rng.standard_normal(32)
x = rng.standard_normal(64)
q_w, q_b = quantize_affine_layer(w, b, 8)
fast = quantized_affine_forward(q_w, q_b, x)          # codes + rank-one fix
dense = dequantize(q_w) @ x + dequantize(q_b)          # reconstruct first
print(f"two routes agree to {np.max(np.abs(fast - dense)):.2e}")
print("extra cost of the code path: one multiply per output for the step,")
print("one for the constant, and the sum of the input vector.")

print()
print("=== what storage actually shrinks ===")
phys = fs.layout.phys_length
layers = [(phys, 8), (2 * 16, None)]  # quantized summary + float norm params
eff = effective_params(layers)
print(f"{phys} summary weights at 8-bit + 32 float norm params")
print(f"-> {float(eff):.2f} effective parameters "
      f"(a byte stores in a quarter of a float32; each grid keeps 2 floats)")
