"""Tour of the quantization schemes: absmax, zeropoint, row-wise, vector-wise.

Shows how each scheme maps floats onto int8 codes in [-127, 127], what the
scaling constants look like, and why the asymmetric zeropoint scheme wins
on one-sided (ReLU-style) inputs.
"""

import numpy as np

from int8mm import (
    DenseMatrix,
    absmax_quantize,
    dequantize,
    rowwise_quantize,
    seeded_random_matrix,
    vectorwise_params,
    zeropoint_quantize,
)


def roundtrip_mse(q, x):
    return float(np.mean((dequantize(q).data - x.data) ** 2))


print("=== absmax: one symmetric scale for the whole tensor ===")
x = DenseMatrix([[2.0, -4.0, 1.0]])
q = absmax_quantize(x)
print(f"input        {x.data.tolist()}")
print(f"scale        127 / max|x| = {q.params.scale}")
print(f"codes        {q.codes.data.tolist()}   (the absmax element pins -127)")
print(f"dequantized  {dequantize(q).data.tolist()}")

print("\n=== zeropoint: shift asymmetric inputs onto the full code range ===")
x = DenseMatrix([[0.0, 2.0, 4.0]])
q = zeropoint_quantize(x)
print(f"input        {x.data.tolist()}")
print(f"nd, zp       {q.params.nd}, {q.params.zp}")
print(f"stored codes {q.codes.data.tolist()}   (min -> -127, max -> +127)")
print(f"dequantized  {dequantize(q).data.tolist()}   (grid-aligned: exact)")

print("\n=== the asymmetric advantage on ReLU-style data ===")
vals = np.linspace(0.0, 4.0, 801, dtype=np.float32).reshape(1, -1)
x = DenseMatrix(vals)
mse_am = roundtrip_mse(absmax_quantize(x), x)
mse_zp = roundtrip_mse(zeropoint_quantize(x), x)
print(f"values in [0, 4]: absmax wastes every negative code")
print(f"absmax MSE    {mse_am:.3e}")
print(f"zeropoint MSE {mse_zp:.3e}   ({mse_am / mse_zp:.1f}x better)")

print("\n=== row-wise: confine an outlier row to its own scale ===")
base = seeded_random_matrix(4, 6, seed=0, stddev=1.0).data.copy()
base[2] *= 50.0  # one hot row would poison a tensor-wise scale
x = DenseMatrix(base)
q_abs = absmax_quantize(x)
q_row = rowwise_quantize(x)
print(f"row scales   {np.round(q_row.params.scales, 3).tolist()}")
print(f"absmax MSE   {roundtrip_mse(q_abs, x):.3e}")
print(f"row-wise MSE {roundtrip_mse(q_row, x):.3e}")

print("\n=== vector-wise: row scales for X, column scales for W ===")
x = seeded_random_matrix(3, 5, seed=1, stddev=1.0)
w = seeded_random_matrix(5, 2, seed=2, stddev=1.0)
qx, qw = vectorwise_params(x, w)
print(f"c_x (len s={x.rows})  {np.round(qx.params.scales, 2).tolist()}")
print(f"c_w (len o={w.cols})  {np.round(qw.params.scales, 2).tolist()}")
print("their outer product dequantizes the int32 matmul output (see demo 02)")
