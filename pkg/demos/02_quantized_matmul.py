"""The four quantized matmul pipelines, and why decomposition is needed.

A single large-magnitude feature column ruins tensor-wise scales, survives
row-wise scales (rows still contain it), and is neutralized only by pulling
the column out into a high-precision partial product.
"""

import numpy as np

from int8mm import (
    DenseMatrix,
    absmax_matmul,
    extract_outlier_columns,
    llm_int8_matmul,
    vectorwise_matmul,
    zeropoint_matmul,
)


def rel_err(approx, exact):
    return float(np.linalg.norm(approx - exact) / np.linalg.norm(exact))


rng = np.random.Generator(np.random.PCG64(7))
s, h, o = 32, 128, 32

print("=== benign Gaussian operands: every scheme does fine ===")
x = DenseMatrix(rng.standard_normal((s, h)).astype(np.float32))
w = DenseMatrix(rng.standard_normal((h, o)).astype(np.float32))
exact = x.data.astype(np.float64) @ w.data.astype(np.float64)
for name, result in [
    ("absmax", absmax_matmul(x, w)),
    ("zeropoint", zeropoint_matmul(x, w)),
    ("vectorwise", vectorwise_matmul(x, w)),
    ("llm_int8", llm_int8_matmul(x, w, alpha=6.0)),
]:
    print(f"{name:<11} rel Frobenius error {rel_err(result.output.data, exact):.5f}")

print("\n=== plant two outlier feature columns at 20x magnitude ===")
data = rng.standard_normal((s, h)).astype(np.float32)
outlier_cols = [13, 77]
data[:, outlier_cols] *= 20.0
x = DenseMatrix(data)
exact = x.data.astype(np.float64) @ w.data.astype(np.float64)
print(f"detected outlier columns at alpha=6: {extract_outlier_columns(x, 6.0).dims}")
for name, result in [
    ("absmax", absmax_matmul(x, w)),
    ("zeropoint", zeropoint_matmul(x, w)),
    ("vectorwise", vectorwise_matmul(x, w)),
    ("llm_int8", llm_int8_matmul(x, w, alpha=6.0)),
]:
    extra = ""
    if result.decomposed_cols:
        extra = f"  ({result.decomposed_cols} cols in high precision, int8 fraction {result.int8_fraction:.4f})"
    print(f"{name:<11} rel Frobenius error {rel_err(result.output.data, exact):.5f}{extra}")

print("\n=== decomposition limit cases ===")
r_empty = llm_int8_matmul(x, w, alpha=1e9)
r_vw = vectorwise_matmul(x, w)
print(f"alpha huge  -> no outliers, bit-identical to vectorwise: "
      f"{np.array_equal(r_empty.output.data, r_vw.output.data)}")
r_full = llm_int8_matmul(x, w, alpha=1e-12)
print(f"alpha -> 0  -> all {r_full.decomposed_cols} columns decomposed, "
      f"rel error vs exact {rel_err(r_full.output.data, exact):.2e}")

print("\n=== zeropoint's two equivalent integer paths ===")
direct = zeropoint_matmul(x, w, unrolled=False)
unrolled = zeropoint_matmul(x, w, unrolled=True)
print(f"direct (A+zp_a)(B+zp_b) == four-term unrolled expansion: "
      f"{np.array_equal(direct.output.data, unrolled.output.data)}")
