"""Detecting systematic outlier feature dimensions in hidden-state stacks.

A dimension counts as an outlier when |value| >= alpha shows up in enough
layers and enough sequence positions. The demo plants such dimensions in a
synthetic stack, detects them, prints their summary statistics, and writes
the stack to the on-disk directory format the CLI consumes.
"""

import tempfile
from pathlib import Path

from int8mm import (
    detect_outlier_dims,
    load_stack,
    outlier_stats,
    random_control_dims,
    save_stack,
    synthetic_stack,
    zero_feature_dims,
)

print("=== plant dims 5 and 20 in a 6-layer stack ===")
stack = synthetic_stack(
    layers=6, seq=40, hidden=32,
    outlier_dims=(5, 20),
    magnitude=9.0,
    sign="negative",
    layer_coverage=0.5,   # half the layers (>= 25% threshold)
    seq_coverage=0.3,     # 30% of positions (>= 6% threshold)
    noise_std=1.0,
    noise_clip=5.5,       # background noise stays strictly below alpha
    seed=0,
)
detected = detect_outlier_dims(stack, alpha=6.0, layer_frac=0.25, seq_frac=0.06)
print(f"detected dims: {detected.dims}")

print("\n=== per-dimension statistics (count, sidedness, coverage, quartiles) ===")
print(f"{'dim':>4} {'count':>6} {'1-sided':>8} {'layers':>7} {'seqdims':>8}  quartiles")
for r in outlier_stats(stack, detected):
    q = tuple(round(v, 1) for v in r.quartiles)
    print(f"{r.index:>4} {r.count:>6} {str(r.one_sided):>8} "
          f"{r.layer_fraction:>6.0%} {r.seq_fraction:>7.0%}  {q}")

print("\n=== thresholds are monotone: demanding all layers drops the dims ===")
strict = detect_outlier_dims(stack, alpha=6.0, layer_frac=1.0, seq_frac=0.06)
print(f"layer_frac=1.0 -> {strict.dims}")

print("\n=== zero-ablation bookkeeping ===")
zeroed = zero_feature_dims(stack, detected)
before = float((stack.as_array() ** 2).sum())
after = float((zeroed.as_array() ** 2).sum())
print(f"squared Frobenius mass before {before:.1f}, after zeroing {after:.1f} "
      f"(removed {before - after:.1f})")
control = random_control_dims(stack.hidden, k=len(detected), exclude=detected, seed=1)
print(f"paired random control dims (disjoint from detected): {control.dims}")

print("\n=== on-disk format: layer_<l>.qt8 + manifest.json ===")
with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp) / "stack"
    save_stack(root, stack, alpha_used=6.0)
    print(f"wrote {sorted(p.name for p in root.iterdir())[:4]} ...")
    back, manifest = load_stack(root)
    print(f"manifest {manifest}; round-trip identical: "
          f"{(back.as_array() == stack.as_array()).all()}")
    print(f"analyze it with: int8mm analyze --stack {root} --out report.csv")
