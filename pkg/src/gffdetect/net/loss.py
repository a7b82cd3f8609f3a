from __future__ import annotations

import math

EPS_CLAMP = 1e-12


def smoothed_target(label: float, smoothing: float) -> float:
    return label * (1.0 - smoothing) + smoothing / 2.0


def bce_loss(pred: float, label: float, smoothing: float = 0.0) -> float:
    """Binary cross-entropy against a symmetrically smoothed target."""
    p = min(max(pred, EPS_CLAMP), 1.0 - EPS_CLAMP)
    y = smoothed_target(label, smoothing)
    return -(y * math.log(p) + (1.0 - y) * math.log(1.0 - p))


def bce_grad(pred: float, label: float, smoothing: float = 0.0) -> float:
    """dLoss/dpred, evaluated at the clamped prediction."""
    p = min(max(pred, EPS_CLAMP), 1.0 - EPS_CLAMP)
    y = smoothed_target(label, smoothing)
    return -y / p + (1.0 - y) / (1.0 - p)
