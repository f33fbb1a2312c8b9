"""Minimal deterministic transformer with swappable linear-layer backends.

The model is randomly initialized, never trained: it exists to exercise the
quantized matmul pipelines end to end and to reproduce the outlier-ablation
methodology at desk scale. Architecture, fixed and documented: learned
token embedding plus sinusoidal positions, pre-norm blocks of causal
multi-head attention and a GELU FFN, a final layer norm, and an unembedding
projection. Layer norm (no learned affine), attention softmax, residual
adds and the logits projection always run in high precision; only the six
per-block projection matmuls (Q, K, V, O, FFN up, FFN down) go through the
selected backend.

Because the model is untrained, perplexity against a corpus is meaningless.
The perplexity proxy instead scores cross-entropy against a fixed reference
sequence: the greedy next-token choices of the exact-backend, unablated
forward pass. The unmodified model is optimal on that reference by
construction, so any perturbation (quantization error, zeroed features)
degrades the proxy in a well-defined direction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from os import PathLike
from pathlib import Path
from typing import Sequence

import numpy as np

from . import qt8
from .gemm import absmax_matmul, llm_int8_matmul, vectorwise_matmul, zeropoint_matmul
from .outliers import OutlierSet, detect_outlier_dims
from .tensors import DenseMatrix, HiddenStateStack

_LN_EPS = 1e-5
_CALIBRATION_PROBE_LEN = 16
_CALIBRATION_MAX_DOUBLINGS = 10
_CALIBRATION_ALPHA = 6.0

BACKEND_KINDS = ("exact", "absmax", "zeropoint", "vectorwise", "llm_int8")


@dataclass(frozen=True)
class LinearBackend:
    """Which matmul pipeline the projection layers run through."""

    kind: str
    alpha: float = 6.0  # outlier threshold, used by llm_int8 only

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"backend kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if not (self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")


EXACT = LinearBackend("exact")
ABSMAX = LinearBackend("absmax")
ZEROPOINT = LinearBackend("zeropoint")
VECTORWISE = LinearBackend("vectorwise")


def llm_int8_backend(alpha: float = 6.0) -> LinearBackend:
    return LinearBackend("llm_int8", alpha)


@dataclass(frozen=True)
class OutlierInjection:
    """Feature dimensions to drive above the outlier threshold, and how hard."""

    dims: tuple[int, ...]
    scale: float = 20.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(sorted(int(d) for d in self.dims)))
        if len(set(self.dims)) != len(self.dims):
            raise ValueError("injection dims must be unique")
        if any(d < 0 for d in self.dims):
            raise ValueError("injection dims must be non-negative")
        if not (self.scale > 0):
            raise ValueError(f"injection scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class ToyModelConfig:
    layers: int
    hidden: int
    heads: int
    vocab: int
    ffn_mult: int = 4
    seed: int = 0
    outlier_injection: OutlierInjection | None = None

    def __post_init__(self) -> None:
        for name in ("layers", "hidden", "heads", "vocab", "ffn_mult"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.hidden % self.heads != 0:
            raise ValueError(
                f"hidden ({self.hidden}) must be divisible by heads ({self.heads})"
            )
        if self.outlier_injection is not None:
            for d in self.outlier_injection.dims:
                if d >= self.hidden:
                    raise ValueError(f"injection dim {d} out of range for hidden {self.hidden}")


@dataclass(frozen=True, eq=False)
class LayerWeights:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    ffn_up: np.ndarray
    ffn_down: np.ndarray


@dataclass(frozen=True, eq=False)
class ToyModel:
    config: ToyModelConfig
    embedding: np.ndarray  # vocab x h
    layers: tuple[LayerWeights, ...]
    unembed: np.ndarray  # h x vocab


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    """Hidden states entering each block's attention projections, plus metrics."""

    hidden_stack: HiddenStateStack
    logits: DenseMatrix
    mean_top1_softmax: float
    ppl_proxy: float


@dataclass(frozen=True)
class AblationResult:
    """Paired metrics with and without the given feature dimensions zeroed."""

    mean_top1_with: float
    mean_top1_without: float
    ppl_proxy_with: float
    ppl_proxy_without: float
    dims_zeroed: OutlierSet
    control: bool = False


def _frozen_f32(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float32, order="C", copy=True)
    out.setflags(write=False)
    return out


def _init_weights(config: ToyModelConfig, multiplier: float) -> ToyModel:
    """Draw weights in a fixed order from PCG64(seed); scale injected columns.

    ``multiplier`` scales the injected columns of every matrix that writes
    into the residual stream (embedding, attention output, FFN down), which
    is what makes the corresponding hidden-state features large.
    """
    h = config.hidden
    ffn = config.ffn_mult * h
    rng = np.random.Generator(np.random.PCG64(config.seed))

    def draw(rows: int, cols: int, std: float) -> np.ndarray:
        return rng.standard_normal((rows, cols), dtype=np.float32) * np.float32(std)

    embedding = draw(config.vocab, h, 1.0)
    layers = []
    for _ in range(config.layers):
        layers.append(
            dict(
                wq=draw(h, h, 1.0 / math.sqrt(h)),
                wk=draw(h, h, 1.0 / math.sqrt(h)),
                wv=draw(h, h, 1.0 / math.sqrt(h)),
                wo=draw(h, h, 1.0 / math.sqrt(h)),
                ffn_up=draw(h, ffn, 1.0 / math.sqrt(h)),
                ffn_down=draw(ffn, h, 1.0 / math.sqrt(ffn)),
            )
        )
    unembed = draw(h, config.vocab, 1.0 / math.sqrt(h))

    if config.outlier_injection is not None and multiplier != 1.0:
        idx = list(config.outlier_injection.dims)
        embedding[:, idx] *= np.float32(multiplier)
        for lw in layers:
            lw["wo"][:, idx] *= np.float32(multiplier)
            lw["ffn_down"][:, idx] *= np.float32(multiplier)

    return ToyModel(
        config=config,
        embedding=_frozen_f32(embedding),
        layers=tuple(
            LayerWeights(**{k: _frozen_f32(v) for k, v in lw.items()}) for lw in layers
        ),
        unembed=_frozen_f32(unembed),
    )


def build_model(config: ToyModelConfig) -> ToyModel:
    """Deterministically initialize a model; calibrate outlier injection if set.

    Calibration doubles the injected columns' multiplier (starting from the
    configured scale) until the planted dimensions are detected as outliers
    (magnitude >= 6 at >= 25% of layers and >= 6% of positions) on a fixed
    probe sequence. Layer norm caps how large a feature can get: with k
    injected dims out of h the ceiling is sqrt((h - k) / k), so injection
    into too many dims of a small model is refused.
    """
    if config.outlier_injection is None:
        return _init_weights(config, 1.0)

    inj = config.outlier_injection
    probe = [i % config.vocab for i in range(_CALIBRATION_PROBE_LEN)]
    multiplier = inj.scale
    for _ in range(_CALIBRATION_MAX_DOUBLINGS):
        model = _init_weights(config, multiplier)
        core = _forward_core(model, probe, EXACT)
        detected = detect_outlier_dims(
            HiddenStateStack(core.hidden), alpha=_CALIBRATION_ALPHA
        )
        if set(inj.dims) <= set(detected.dims):
            return model
        multiplier *= 2.0
    ceiling = math.sqrt((config.hidden - len(inj.dims)) / len(inj.dims))
    raise ValueError(
        f"outlier injection failed to reach magnitude {_CALIBRATION_ALPHA}: layer norm "
        f"caps injected features near sqrt((h-k)/k) = {ceiling:.2f}; use a larger "
        "hidden size or fewer injected dims"
    )


def _layer_norm(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + _LN_EPS)


def _gelu(x: np.ndarray) -> np.ndarray:
    # tanh approximation of GELU
    c = math.sqrt(2.0 / math.pi)
    return 0.5 * x * (1.0 + np.tanh(c * (x + 0.044715 * x**3)))


def _positional_encoding(seq: int, hidden: int) -> np.ndarray:
    pos = np.arange(seq, dtype=np.float64)[:, None]
    idx = np.arange(0, hidden, 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, idx / hidden)
    pe = np.zeros((seq, hidden))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)[:, : hidden // 2]
    return pe


def _linear(x: np.ndarray, w: np.ndarray, backend: LinearBackend) -> np.ndarray:
    if backend.kind == "exact":
        return (x.astype(np.float64) @ w.astype(np.float64)).astype(np.float32)
    xm, wm = DenseMatrix(x), DenseMatrix(w)
    if backend.kind == "absmax":
        return absmax_matmul(xm, wm).output.data
    if backend.kind == "zeropoint":
        return zeropoint_matmul(xm, wm).output.data
    if backend.kind == "vectorwise":
        return vectorwise_matmul(xm, wm).output.data
    return llm_int8_matmul(xm, wm, backend.alpha).output.data


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    s, h = x.shape
    return x.reshape(s, heads, h // heads).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    heads, s, dh = x.shape
    return x.transpose(1, 0, 2).reshape(s, heads * dh)


def _attention(
    model: ToyModel, layer_index: int, hidden: np.ndarray, backend: LinearBackend
) -> tuple[np.ndarray, np.ndarray]:
    """Causal multi-head attention over one block's pre-projection hidden state.

    Returns (probs, output): probs is (heads, s, s) float64 softmax weights,
    output the (s, h) float32 result of the output projection.
    """
    lw = model.layers[layer_index]
    heads = model.config.heads
    dh = model.config.hidden // heads
    q = _split_heads(_linear(hidden, lw.wq, backend), heads).astype(np.float64)
    k = _split_heads(_linear(hidden, lw.wk, backend), heads).astype(np.float64)
    v = _split_heads(_linear(hidden, lw.wv, backend), heads).astype(np.float64)

    scores = q @ k.transpose(0, 2, 1) / math.sqrt(dh)
    s = hidden.shape[0]
    mask = np.triu(np.ones((s, s), dtype=bool), k=1)
    scores = np.where(mask, -np.inf, scores)
    scores -= scores.max(axis=-1, keepdims=True)
    w = np.exp(scores)
    probs = w / w.sum(axis=-1, keepdims=True)

    ctx = _merge_heads(probs @ v).astype(np.float32)
    return probs, _linear(ctx, lw.wo, backend)


@dataclass(frozen=True, eq=False)
class _CoreResult:
    hidden: list[DenseMatrix]
    layer_top1: list[float]
    logits: np.ndarray  # (s, vocab) float64


def _forward_core(
    model: ToyModel,
    tokens: Sequence[int],
    backend: LinearBackend,
    zero_dims: Sequence[int] = (),
) -> _CoreResult:
    cfg = model.config
    tokens = list(tokens)
    if len(tokens) < 2:
        raise ValueError("token sequence must have length >= 2")
    for t in tokens:
        if not (0 <= t < cfg.vocab):
            raise ValueError(f"token {t} out of range for vocab {cfg.vocab}")

    s = len(tokens)
    x = model.embedding[tokens].astype(np.float64) + _positional_encoding(s, cfg.hidden)

    hidden_mats: list[DenseMatrix] = []
    layer_top1: list[float] = []
    zero_idx = list(zero_dims)
    for li in range(cfg.layers):
        hidden = _layer_norm(x).astype(np.float32)
        if zero_idx:
            hidden[:, zero_idx] = 0.0
        hidden_mats.append(DenseMatrix(hidden))

        probs, attn_out = _attention(model, li, hidden, backend)
        layer_top1.append(float(probs.max(axis=-1).mean()))
        x = x + attn_out.astype(np.float64)

        ffn_in = _layer_norm(x).astype(np.float32)
        up = _gelu(_linear(ffn_in, model.layers[li].ffn_up, backend).astype(np.float64))
        down = _linear(up.astype(np.float32), model.layers[li].ffn_down, backend)
        x = x + down.astype(np.float64)

    final = _layer_norm(x)
    logits = final @ model.unembed.astype(np.float64)
    return _CoreResult(hidden_mats, layer_top1, logits)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def greedy_reference(model: ToyModel, tokens: Sequence[int]) -> np.ndarray:
    """The fixed reference sequence: the exact model's greedy next-token picks."""
    core = _forward_core(model, tokens, EXACT)
    return core.logits[:-1].argmax(axis=-1)


def ppl_proxy_from_logits(logits: np.ndarray, reference: np.ndarray) -> float:
    """exp(mean cross-entropy) of next-token predictions against the reference."""
    log_probs = _log_softmax(np.asarray(logits, dtype=np.float64)[:-1])
    picked = log_probs[np.arange(reference.size), reference]
    return float(np.exp(-picked.mean()))


def forward(model: ToyModel, tokens: Sequence[int], backend: LinearBackend) -> ForwardTrace:
    """Run the model, capturing per-layer pre-projection hidden states.

    ``mean_top1_softmax`` averages the per-(head, query) maximum attention
    probability over all layers; ``ppl_proxy`` scores the logits against
    the exact backend's greedy reference for the same tokens.
    """
    core = _forward_core(model, tokens, backend)
    if backend.kind == "exact":
        reference = core.logits[:-1].argmax(axis=-1)
    else:
        reference = greedy_reference(model, tokens)
    return ForwardTrace(
        hidden_stack=HiddenStateStack(core.hidden),
        logits=DenseMatrix(core.logits.astype(np.float32)),
        mean_top1_softmax=float(np.mean(core.layer_top1)),
        ppl_proxy=ppl_proxy_from_logits(core.logits, reference),
    )


def ablate_and_measure(
    model: ToyModel,
    tokens: Sequence[int],
    dims: OutlierSet,
    isolate_layers: bool,
    control: bool = False,
) -> AblationResult:
    """Zero feature dims in the attention-projection inputs and measure the damage.

    With ``isolate_layers`` each layer is ablated independently: its
    attention probabilities are recomputed from the zeroed hidden state
    while unmodified values propagate onward, so only the top-1 metric
    moves and the perplexity proxy stays at baseline. Without it, the
    zeroing applies in every layer and cascades, and the proxy is scored
    against the same fixed reference as the baseline.
    """
    for d in dims.dims:
        if d >= model.config.hidden:
            raise ValueError(f"dimension {d} out of range for hidden {model.config.hidden}")
    base = _forward_core(model, tokens, EXACT)
    reference = base.logits[:-1].argmax(axis=-1)
    ppl_with = ppl_proxy_from_logits(base.logits, reference)
    top1_with = float(np.mean(base.layer_top1))
    zero_idx = list(dims.dims)

    if isolate_layers:
        ablated_top1 = []
        for li, hidden in enumerate(base.hidden):
            data = hidden.data.copy()
            if zero_idx:
                data[:, zero_idx] = 0.0
            probs, _ = _attention(model, li, data, EXACT)
            ablated_top1.append(float(probs.max(axis=-1).mean()))
        return AblationResult(
            mean_top1_with=top1_with,
            mean_top1_without=float(np.mean(ablated_top1)),
            ppl_proxy_with=ppl_with,
            ppl_proxy_without=ppl_with,
            dims_zeroed=dims,
            control=control,
        )

    ablated = _forward_core(model, tokens, EXACT, zero_dims=zero_idx)
    return AblationResult(
        mean_top1_with=top1_with,
        mean_top1_without=float(np.mean(ablated.layer_top1)),
        ppl_proxy_with=ppl_with,
        ppl_proxy_without=ppl_proxy_from_logits(ablated.logits, reference),
        dims_zeroed=dims,
        control=control,
    )


_CONFIG_NAME = "config.json"
_WEIGHT_NAMES = ("wq", "wk", "wv", "wo", "ffn_up", "ffn_down")


def save_model(dirpath: str | PathLike, model: ToyModel) -> None:
    """Write weights as QT8 tensors plus a JSON config manifest."""
    root = Path(dirpath)
    root.mkdir(parents=True, exist_ok=True)
    cfg = model.config
    inj = cfg.outlier_injection
    manifest = {
        "layers": cfg.layers,
        "hidden": cfg.hidden,
        "heads": cfg.heads,
        "vocab": cfg.vocab,
        "ffn_mult": cfg.ffn_mult,
        "seed": cfg.seed,
        "outlier_injection": None if inj is None else {"dims": list(inj.dims), "scale": inj.scale},
    }
    (root / _CONFIG_NAME).write_text(json.dumps(manifest, indent=2) + "\n")
    qt8.write_tensor(root / "embedding.qt8", DenseMatrix(model.embedding))
    qt8.write_tensor(root / "unembed.qt8", DenseMatrix(model.unembed))
    for i, lw in enumerate(model.layers):
        for name in _WEIGHT_NAMES:
            qt8.write_tensor(root / f"layer_{i}_{name}.qt8", DenseMatrix(getattr(lw, name)))


def config_from_dict(raw: dict) -> ToyModelConfig:
    inj = raw.get("outlier_injection")
    return ToyModelConfig(
        layers=int(raw["layers"]),
        hidden=int(raw["hidden"]),
        heads=int(raw["heads"]),
        vocab=int(raw["vocab"]),
        ffn_mult=int(raw.get("ffn_mult", 4)),
        seed=int(raw.get("seed", 0)),
        outlier_injection=None
        if inj is None
        else OutlierInjection(dims=tuple(inj["dims"]), scale=float(inj.get("scale", 20.0))),
    )


def load_model(dirpath: str | PathLike) -> ToyModel:
    """Load a saved model directory; weights are used as stored, not rebuilt."""
    root = Path(dirpath)
    config = config_from_dict(json.loads((root / _CONFIG_NAME).read_text()))

    def tensor(name: str) -> np.ndarray:
        t = qt8.read_tensor(root / name)
        if not isinstance(t, DenseMatrix):
            raise ValueError(f"{root / name}: expected an f32 tensor")
        return t.data

    layers = tuple(
        LayerWeights(**{name: tensor(f"layer_{i}_{name}.qt8") for name in _WEIGHT_NAMES})
        for i in range(config.layers)
    )
    return ToyModel(
        config=config,
        embedding=tensor("embedding.qt8"),
        layers=layers,
        unembed=tensor("unembed.qt8"),
    )
