"""Model configuration, parameters, joint forward/backward and the model file format."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from ..errors import DataError, InvariantViolation, IoFailure, ShapeMismatch
from .aggregator import aggregator_backward, aggregator_forward
from .cnnblock import cnnblock_backward, cnnblock_forward
from .loss import bce_grad, bce_loss

MODEL_FORMAT = 1


@dataclass(frozen=True)
class ModelConfig:
    frames: int = 16
    columns: int = 10
    kernel_sizes: tuple[int, ...] = (1, 2, 3, 4, 6, 8)
    filters1: int = 32
    filters2: int = 8
    num_layers: int = 2
    dense: int = 48
    agg_mode: Literal["fc", "max"] = "fc"
    g_max: int = 4
    agg_hidden: int = 16

    def __post_init__(self):
        object.__setattr__(self, "kernel_sizes", tuple(int(k) for k in self.kernel_sizes))
        if self.num_layers not in (1, 2):
            raise InvariantViolation("num_layers", detail="1 or 2")
        if self.agg_mode not in ("fc", "max"):
            raise InvariantViolation("agg_mode", detail="fc or max")
        for name in ("frames", "columns", "filters1", "filters2", "dense", "g_max", "agg_hidden"):
            if getattr(self, name) < 1:
                raise InvariantViolation(name, detail="must be >= 1")
        if not self.kernel_sizes or min(self.kernel_sizes) < 1:
            raise InvariantViolation("kernel_sizes", detail="non-empty, positive")

    @property
    def feature_width(self) -> int:
        per_k = self.filters2 if self.num_layers == 2 else self.filters1
        return per_k * len(self.kernel_sizes)

    @classmethod
    def modified(cls, **kw) -> "ModelConfig":
        """Single conv layer with kernel sizes 1 to 4."""
        kw.setdefault("kernel_sizes", (1, 2, 3, 4))
        return cls(num_layers=1, **kw)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    c1 = cfg.filters1 * len(cfg.kernel_sizes)
    for k in cfg.kernel_sizes:
        shapes[f"conv1_k{k}_w"] = (cfg.filters1, k, k)
        shapes[f"conv1_k{k}_b"] = (cfg.filters1,)
    if cfg.num_layers == 2:
        for k in cfg.kernel_sizes:
            shapes[f"conv2_k{k}_w"] = (cfg.filters2, c1, k)
            shapes[f"conv2_k{k}_b"] = (cfg.filters2,)
    shapes["dense_w"] = (cfg.feature_width, cfg.dense)
    shapes["dense_b"] = (cfg.dense,)
    shapes["out_w"] = (cfg.dense,)
    shapes["out_b"] = (1,)
    if cfg.agg_mode == "fc":
        shapes["agg_hidden_w"] = (cfg.g_max, cfg.agg_hidden)
        shapes["agg_hidden_b"] = (cfg.agg_hidden,)
        shapes["agg_out_w"] = (cfg.agg_hidden,)
        shapes["agg_out_b"] = (1,)
    return shapes


def num_params(cfg: ModelConfig) -> int:
    return sum(int(np.prod(s)) for s in param_shapes(cfg).values())


def _fans(name: str, shape: tuple[int, ...]) -> tuple[int, int]:
    if name.startswith("conv1"):
        f, k, _ = shape
        return k * k, f * k * k
    if name.startswith("conv2"):
        f, c, k = shape
        return c * k, f * k
    if len(shape) == 2:
        return shape[0], shape[1]
    return shape[0], 1


def init_params(cfg: ModelConfig, seed: int | np.random.Generator = 0, scheme: str = "he") -> dict[str, np.ndarray]:
    """Uniform weights, zero biases.

    ``he`` draws from +-sqrt(6 / fan_in); ``glorot`` from
    +-sqrt(6 / (fan_in + fan_out)), which leaves the layer-1 maps too small to
    train in a reasonable number of SGD steps once averaged over columns.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith("_b"):
            params[name] = np.zeros(shape)
            continue
        fan_in, fan_out = _fans(name, shape)
        if scheme == "he":
            limit = np.sqrt(6.0 / fan_in)
        elif scheme == "glorot":
            limit = np.sqrt(6.0 / (fan_in + fan_out))
        else:
            raise ValueError(f"unknown init scheme {scheme!r}")
        params[name] = rng.uniform(-limit, limit, size=shape)
    return params


def zero_params(cfg: ModelConfig) -> dict[str, np.ndarray]:
    return {name: np.zeros(shape) for name, shape in param_shapes(cfg).items()}


def check_params(params: dict, cfg: ModelConfig) -> None:
    shapes = param_shapes(cfg)
    if set(params) != set(shapes):
        raise ShapeMismatch(f"parameter names differ: {sorted(set(params) ^ set(shapes))}")
    for name, shape in shapes.items():
        if params[name].shape != shape:
            raise ShapeMismatch(f"{name}: expected {shape}, got {params[name].shape}")
        if not np.all(np.isfinite(params[name])):
            raise InvariantViolation(name, detail="non-finite values")


def video_scores(groups: Sequence[np.ndarray], params: dict, cfg: ModelConfig) -> tuple[float, np.ndarray]:
    """Score one video given its GFF matrices; returns ``(video_score, group_scores)``."""
    scores, _ = cnnblock_forward(np.stack([np.asarray(g) for g in groups]), params, cfg)
    video, _ = aggregator_forward(scores, params, cfg)
    return video, scores


def batch_loss_and_grads(
    batch: Sequence[Sequence[np.ndarray]],
    labels: Sequence[int],
    params: dict,
    cfg: ModelConfig,
    smoothing: float = 0.0,
) -> tuple[float, dict]:
    """Mean BCE over a batch of videos and its gradient for every parameter.

    Each element of ``batch`` is the list of GFF matrices of one video. All
    matrices of the batch go through the CNNBlock together.
    """
    counts = [len(groups) for groups in batch]
    x = np.stack([np.asarray(g) for groups in batch for g in groups])
    scores, cache = cnnblock_forward(x, params, cfg)

    total = 0.0
    dscores = np.zeros_like(scores)
    agg_grads: dict = {}
    n = len(batch)
    start = 0
    for count, label in zip(counts, labels):
        group = scores[start:start + count]
        out, acache = aggregator_forward(group, params, cfg)
        total += bce_loss(out, label, smoothing)
        g_agg, d_group = aggregator_backward(bce_grad(out, label, smoothing) / n, acache, params, cfg)
        for name, g in g_agg.items():
            agg_grads[name] = agg_grads[name] + g if name in agg_grads else g
        dscores[start:start + count] = d_group
        start += count

    grads = cnnblock_backward(dscores, cache, params, cfg)
    grads.update(agg_grads)
    return total / n, grads


@dataclass
class Model:
    config: ModelConfig
    params: dict[str, np.ndarray]
    extra: dict = field(default_factory=dict)  # pipeline configs stored alongside the weights

    def __post_init__(self):
        check_params(self.params, self.config)

    def to_json(self) -> str:
        tensors = {
            name: [list(arr.shape), [float(v) for v in arr.ravel()]]
            for name, arr in sorted(self.params.items())
        }
        config = asdict(self.config)
        config["kernel_sizes"] = list(self.config.kernel_sizes)
        doc = {"format": MODEL_FORMAT, "config": {"model": config, **self.extra}, "tensors": tensors}
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Model":
        try:
            doc = json.loads(text)
            if doc.get("format") != MODEL_FORMAT:
                raise DataError(f"unsupported model format {doc.get('format')!r}")
            config = dict(doc["config"])
            cfg = ModelConfig(**config.pop("model"))
            params = {
                name: np.asarray(values, dtype=np.float64).reshape(shape)
                for name, (shape, values) in doc["tensors"].items()
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed model file: {exc}") from exc
        return cls(cfg, params, config)

    def save(self, path: str | Path) -> None:
        try:
            Path(path).write_text(self.to_json())
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "Model":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        return cls.from_json(text)
