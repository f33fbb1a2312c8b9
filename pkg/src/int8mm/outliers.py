"""Outlier feature detection and ablation support across hidden-state stacks.

A feature dimension counts as an emergent outlier when values of magnitude
at least ``alpha`` (inclusive) appear in at least ``layer_frac`` of layers
and at least ``seq_frac`` of sequence positions. The sequence fraction
counts a position as affected if any layer has a qualifying value there
and divides by the sequence length; ``seq_count="pairs"`` switches to the
alternative reading that counts affected (layer, position) pairs over all
L*s pairs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from os import PathLike
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import qt8
from .tensors import DenseMatrix, HiddenStateStack


@dataclass(frozen=True)
class OutlierSet:
    """Sorted, duplicate-free feature indices plus the threshold that produced them."""

    dims: tuple[int, ...]
    alpha: float

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if any(d < 0 for d in dims):
            raise ValueError("feature indices must be non-negative")
        if len(set(dims)) != len(dims):
            raise ValueError("feature indices must be unique")
        if list(dims) != sorted(dims):
            dims = tuple(sorted(dims))
        object.__setattr__(self, "dims", dims)
        if not (self.alpha > 0) or not np.isfinite(self.alpha):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")

    def __len__(self) -> int:
        return len(self.dims)

    def __contains__(self, dim: int) -> bool:
        return dim in self.dims


@dataclass(frozen=True)
class OutlierReport:
    """Per-dimension statistics over all values with |value| >= alpha.

    ``quartiles`` are (q1, median, q3) by linear interpolation between order
    statistics (numpy's default, the "type 7" estimator); None when no value
    qualifies. ``one_sided`` is true when every qualifying value has the
    same sign.
    """

    index: int
    count: int
    one_sided: bool
    layer_fraction: float
    seq_fraction: float
    quartiles: tuple[float, float, float] | None


class StackDirError(ValueError):
    """Hidden-state stack directory is missing files or inconsistent with its manifest."""


def detect_outlier_dims(
    stack: HiddenStateStack,
    alpha: float = 6.0,
    layer_frac: float = 0.25,
    seq_frac: float = 0.06,
    seq_count: str = "positions",
) -> OutlierSet:
    """Find feature dimensions with systematic large-magnitude values.

    A dimension qualifies when (a) the fraction of layers containing at
    least one value with |value| >= alpha at that dimension is >= layer_frac
    and (b) the fraction of affected sequence positions (see module
    docstring for the two counting modes) is >= seq_frac. Both comparisons
    are inclusive, as is the magnitude threshold itself.
    """
    if not (alpha > 0) or not np.isfinite(alpha):
        raise ValueError(f"alpha must be positive and finite, got {alpha}")
    for name, frac in (("layer_frac", layer_frac), ("seq_frac", seq_frac)):
        if not (0 < frac <= 1):
            raise ValueError(f"{name} must lie in (0, 1], got {frac}")
    if seq_count not in ("positions", "pairs"):
        raise ValueError(f"seq_count must be 'positions' or 'pairs', got {seq_count!r}")

    hits = np.abs(stack.as_array()) >= alpha  # (L, s, h) bool
    layer_fractions = hits.any(axis=1).mean(axis=0)  # per-dim fraction of layers
    if seq_count == "positions":
        seq_fractions = hits.any(axis=0).mean(axis=0)
    else:
        seq_fractions = hits.mean(axis=(0, 1))
    keep = (layer_fractions >= layer_frac) & (seq_fractions >= seq_frac)
    return OutlierSet(tuple(int(i) for i in np.flatnonzero(keep)), alpha)


def outlier_stats(stack: HiddenStateStack, dims: OutlierSet) -> list[OutlierReport]:
    """Summarize each detected dimension's qualifying values.

    Dimensions with zero qualifying values are reported with count 0,
    null quartiles, and one_sided False.
    """
    for d in dims.dims:
        if d >= stack.hidden:
            raise ValueError(f"dimension {d} out of range for hidden size {stack.hidden}")
    arr = stack.as_array()
    hits = np.abs(arr) >= dims.alpha
    reports = []
    for d in dims.dims:
        mask = hits[:, :, d]
        vals = arr[:, :, d][mask].astype(np.float64)
        layer_fraction = float(mask.any(axis=1).mean())
        seq_fraction = float(mask.any(axis=0).mean())
        if vals.size == 0:
            reports.append(OutlierReport(d, 0, False, 0.0, 0.0, None))
            continue
        q1, med, q3 = np.percentile(vals, [25.0, 50.0, 75.0], method="linear")
        one_sided = bool((vals > 0).all() or (vals < 0).all())
        reports.append(
            OutlierReport(
                index=d,
                count=int(vals.size),
                one_sided=one_sided,
                layer_fraction=layer_fraction,
                seq_fraction=seq_fraction,
                quartiles=(float(q1), float(med), float(q3)),
            )
        )
    return reports


def zero_feature_dims(stack: HiddenStateStack, dims: OutlierSet) -> HiddenStateStack:
    """Return a copy of the stack with the given feature columns zeroed in every layer."""
    for d in dims.dims:
        if d >= stack.hidden:
            raise ValueError(f"dimension {d} out of range for hidden size {stack.hidden}")
    idx = list(dims.dims)
    out = []
    for layer in stack:
        data = layer.data.copy()
        data[:, idx] = 0.0
        out.append(DenseMatrix(data))
    return HiddenStateStack(out)


def random_control_dims(h: int, k: int, exclude: OutlierSet, seed: int) -> OutlierSet:
    """Sample k distinct feature indices disjoint from ``exclude``, deterministically.

    The returned set carries the alpha of the study it controls for.
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    if k < 0:
        raise ValueError("k must be >= 0")
    candidates = [i for i in range(h) if i not in exclude]
    if k > len(candidates):
        raise ValueError(f"cannot sample {k} control dims from {len(candidates)} candidates")
    if k == 0:
        return OutlierSet((), exclude.alpha)
    rng = np.random.Generator(np.random.PCG64(seed))
    chosen = rng.choice(len(candidates), size=k, replace=False)
    return OutlierSet(tuple(sorted(candidates[int(i)] for i in chosen)), exclude.alpha)


def synthetic_stack(
    layers: int,
    seq: int,
    hidden: int,
    *,
    outlier_dims: Sequence[int] = (),
    magnitude: float = 8.0,
    sign: str = "negative",
    layer_coverage: float = 1.0,
    seq_coverage: float = 1.0,
    noise_std: float = 1.0,
    noise_clip: float | None = None,
    seed: int = 0,
) -> HiddenStateStack:
    """Gaussian hidden-state stack with planted outlier dimensions.

    Planted values of +/-``magnitude`` overwrite the noise at a seeded
    random subset of layers (``layer_coverage`` fraction, at least one) and
    sequence positions (``seq_coverage``, the same positions in every
    affected layer). ``sign`` is "negative", "positive" or "mixed"
    (alternating along the sequence). ``noise_clip`` bounds the background
    noise so planted dimensions can be made the only outliers.
    """
    if sign not in ("negative", "positive", "mixed"):
        raise ValueError(f"sign must be 'negative', 'positive' or 'mixed', got {sign!r}")
    if not (0 < layer_coverage <= 1) or not (0 < seq_coverage <= 1):
        raise ValueError("coverages must lie in (0, 1]")
    rng = np.random.Generator(np.random.PCG64(seed))
    data = rng.standard_normal((layers, seq, hidden), dtype=np.float32) * np.float32(noise_std)
    if noise_clip is not None:
        np.clip(data, -noise_clip, noise_clip, out=data)

    n_layers = max(1, int(round(layer_coverage * layers)))
    n_pos = max(1, int(round(seq_coverage * seq)))
    hit_layers = np.sort(rng.choice(layers, size=n_layers, replace=False))
    hit_pos = np.sort(rng.choice(seq, size=n_pos, replace=False))
    if sign == "mixed":
        values = np.where(np.arange(n_pos) % 2 == 0, magnitude, -magnitude)
    else:
        values = np.full(n_pos, magnitude if sign == "positive" else -magnitude)
    for d in outlier_dims:
        if not (0 <= d < hidden):
            raise ValueError(f"outlier dim {d} out of range for hidden size {hidden}")
        for li in hit_layers:
            data[li, hit_pos, d] = values
    return HiddenStateStack([DenseMatrix(m) for m in data])


MANIFEST_NAME = "manifest.json"


def _layer_file(index: int) -> str:
    return f"layer_{index}.qt8"


def save_stack(dirpath: str | PathLike, stack: HiddenStateStack, alpha_used: float = 6.0) -> None:
    """Write a stack as layer_<l>.qt8 files plus a manifest.json."""
    root = Path(dirpath)
    root.mkdir(parents=True, exist_ok=True)
    for i, layer in enumerate(stack):
        qt8.write_tensor(root / _layer_file(i), layer)
    manifest = {
        "layers": stack.layers,
        "seq": stack.seq,
        "hidden": stack.hidden,
        "alpha_used": alpha_used,
    }
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")


def load_stack(dirpath: str | PathLike) -> tuple[HiddenStateStack, dict]:
    """Load a stack directory, validating every layer file against the manifest."""
    root = Path(dirpath)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise StackDirError(f"{root}: missing {MANIFEST_NAME}")
    manifest = json.loads(manifest_path.read_text())
    for key in ("layers", "seq", "hidden"):
        if key not in manifest:
            raise StackDirError(f"{root}: manifest missing key {key!r}")
    mats = []
    for i in range(int(manifest["layers"])):
        path = root / _layer_file(i)
        if not path.is_file():
            raise StackDirError(f"{root}: missing {path.name}")
        tensor = qt8.read_tensor(path)
        if not isinstance(tensor, DenseMatrix):
            raise StackDirError(f"{root}: {path.name} is not an f32 tensor")
        if tensor.shape != (int(manifest["seq"]), int(manifest["hidden"])):
            raise StackDirError(
                f"{root}: {path.name} has shape {tensor.shape}, manifest says "
                f"({manifest['seq']}, {manifest['hidden']})"
            )
        mats.append(tensor)
    return HiddenStateStack(mats), manifest


REPORT_COLUMNS = (
    "dim",
    "count",
    "one_sided",
    "layer_fraction",
    "seq_fraction",
    "q1",
    "median",
    "q3",
)


def write_report_csv(path: str | PathLike, reports: Iterable[OutlierReport]) -> None:
    """Write per-dimension outlier statistics with a fixed column order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for r in reports:
            q1, med, q3 = r.quartiles if r.quartiles is not None else ("", "", "")
            writer.writerow(
                [r.index, r.count, int(r.one_sided), r.layer_fraction, r.seq_fraction, q1, med, q3]
            )


def write_report_json(path: str | PathLike, reports: Iterable[OutlierReport], meta: dict) -> None:
    """Write the same statistics as JSON with a metadata block."""
    payload = {
        "meta": meta,
        "dimensions": [
            {
                "dim": r.index,
                "count": r.count,
                "one_sided": r.one_sided,
                "layer_fraction": r.layer_fraction,
                "seq_fraction": r.seq_fraction,
                "quartiles": list(r.quartiles) if r.quartiles is not None else None,
            }
            for r in reports
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
