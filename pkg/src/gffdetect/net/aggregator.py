"""Video-level aggregation of per-group CNNBlock scores.

``fc`` mode sorts the group scores in descending order, pads with zeros or
truncates to ``g_max`` entries, and applies a two-layer network with ReLU
hidden units and a sigmoid output. ``max`` mode returns the largest score.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptyGroupList
from .cnnblock import sigmoid


def _sorted_padded(scores: np.ndarray, g_max: int) -> tuple[np.ndarray, np.ndarray]:
    # stable sort keeps bitwise-equal scores in a fixed relative order
    order = np.argsort(-scores, kind="stable")[:g_max]
    x = np.zeros(g_max)
    x[:len(order)] = scores[order]
    return x, order


def aggregator_forward(group_scores, params: dict, cfg) -> tuple[float, dict]:
    scores = np.asarray(group_scores, dtype=np.float64).reshape(-1)
    if cfg.agg_mode == "max":
        if scores.size == 0:
            raise EmptyGroupList("max aggregation needs at least one group score")
        idx = int(np.argmax(scores))
        return float(scores[idx]), {"n": scores.size, "argmax": idx}

    x, order = _sorted_padded(scores, cfg.g_max)
    z = x @ params["agg_hidden_w"] + params["agg_hidden_b"]
    h = np.maximum(z, 0.0)
    out = float(sigmoid(h @ params["agg_out_w"] + params["agg_out_b"][0]))
    return out, {"n": scores.size, "x": x, "order": order, "z": z, "h": h, "out": out}


def aggregator_backward(dout: float, cache: dict, params: dict, cfg) -> tuple[dict, np.ndarray]:
    """Return ``(param_grads, dLoss/dgroup_scores)``."""
    dscores = np.zeros(cache["n"])
    if cfg.agg_mode == "max":
        dscores[cache["argmax"]] = dout
        return {}, dscores

    out = cache["out"]
    dlogit = dout * out * (1.0 - out)
    grads = {
        "agg_out_w": cache["h"] * dlogit,
        "agg_out_b": np.array([dlogit]),
    }
    dz = params["agg_out_w"] * dlogit * (cache["z"] > 0)
    grads["agg_hidden_w"] = np.outer(cache["x"], dz)
    grads["agg_hidden_b"] = dz
    dx = params["agg_hidden_w"] @ dz
    order = cache["order"]
    dscores[order] = dx[:len(order)]
    return grads, dscores
