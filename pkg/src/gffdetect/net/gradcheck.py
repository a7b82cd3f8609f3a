"""Central finite-difference check of the analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aggregator import aggregator_forward
from .cnnblock import cnnblock_forward
from .model import ModelConfig, batch_loss_and_grads, init_params

SMALL_CONFIG = dict(frames=8, columns=4, kernel_sizes=(1, 2), filters1=2, filters2=2, dense=6, g_max=3, agg_hidden=4)


def random_instance(seed: int, cfg: ModelConfig | None = None, n_videos: int = 3):
    """Random parameters (non-zero biases) plus a small labelled batch of GFF stacks."""
    cfg = cfg or ModelConfig(**SMALL_CONFIG)
    rng = np.random.default_rng(seed)
    params = init_params(cfg, rng)
    for name in params:
        if name.endswith("_b"):
            params[name] = rng.uniform(-0.3, 0.3, size=params[name].shape)
    batch = []
    for _ in range(n_videos):
        groups = int(rng.integers(1, cfg.g_max + 2))
        batch.append([rng.uniform(0.0, 1.0, size=(cfg.frames, cfg.columns)) for _ in range(groups)])
    labels = [int(v) for v in rng.integers(0, 2, size=n_videos)]
    return cfg, params, batch, labels


def relative_error(analytic, numeric, floor: float = 1e-6):
    """``|a - n| / max(|a| + |n|, floor)``.

    The floor turns the test into an absolute one for gradients near the
    finite-difference roundoff level (about eps * loss / h).
    """
    return np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), floor)


def activation_pattern(batch, params, cfg) -> bytes:
    """Every piecewise decision of the forward pass: ReLU signs, pooling winners, sort order."""
    x = np.stack([np.asarray(g) for groups in batch for g in groups])
    scores, cache = cnnblock_forward(x, params, cfg)
    parts = [(cache["z1"] > 0).tobytes(), cache["idx"].tobytes()]
    if "z2" in cache:
        parts.append((cache["z2"] > 0).tobytes())
    parts.append((cache["zd"] > 0).tobytes())
    start = 0
    for groups in batch:
        _, acache = aggregator_forward(scores[start:start + len(groups)], params, cfg)
        start += len(groups)
        if cfg.agg_mode == "max":
            parts.append(str(acache["argmax"]).encode())
        else:
            parts.append(acache["order"].tobytes() + (acache["z"] > 0).tobytes())
    return b"|".join(parts)


@dataclass
class GradCheckResult:
    max_rel_error: float
    checked: int
    skipped_at_kinks: int


def check_gradients(cfg, params, batch, labels, smoothing: float = 0.001, h: float = 1e-5) -> GradCheckResult:
    """Compare analytic gradients with central differences, coordinate by coordinate.

    A coordinate whose +-h probe changes the activation pattern straddles a
    kink of the piecewise-linear network, where the difference quotient is not
    a derivative estimate; such coordinates are counted and excluded.
    """
    _, grads = batch_loss_and_grads(batch, labels, params, cfg, smoothing)
    worst, checked, skipped = 0.0, 0, 0
    for name in sorted(params):
        flat = params[name].reshape(-1)
        analytic = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up, _ = batch_loss_and_grads(batch, labels, params, cfg, smoothing)
            pattern_up = activation_pattern(batch, params, cfg)
            flat[i] = orig - h
            down, _ = batch_loss_and_grads(batch, labels, params, cfg, smoothing)
            pattern_down = activation_pattern(batch, params, cfg)
            flat[i] = orig
            if pattern_up != pattern_down:
                skipped += 1
                continue
            checked += 1
            numeric = (up - down) / (2 * h)
            worst = max(worst, float(relative_error(analytic[i], numeric)))
    return GradCheckResult(worst, checked, skipped)


def run(seed: int) -> GradCheckResult:
    return check_gradients(*random_instance(seed))
