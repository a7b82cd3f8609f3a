"""Multi-kernel convolutional block mapping a batch of GFF matrices to scores.

Layer 1: for each kernel size k, ``filters1`` same-padded k x k 2D filters
over (time x column), ReLU, then mean over the column axis.
Layer 2: for each k, ``filters2`` same-padded width-k 1D filters over time
on the concatenated layer-1 maps, ReLU, then max over time.
Head: dense + ReLU, one sigmoid unit.

A one-layer variant skips layer 2 and max-pools the layer-1 maps over time.

Same padding puts ``(k - 1) // 2`` zeros before and the rest after. All
kernel sizes of a layer are embedded into one zero-filled bank spanning the
widest offsets, so each layer is a single matrix product over a shared
window; parameters stay stored per kernel size.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch


def same_pad(k: int) -> tuple[int, int]:
    left = (k - 1) // 2
    return left, k - 1 - left


def bank_span(kernel_sizes) -> tuple[int, int]:
    """(max left pad, window width) covering every kernel's offsets."""
    left = max(same_pad(k)[0] for k in kernel_sizes)
    right = max(same_pad(k)[1] for k in kernel_sizes)
    return left, left + right + 1


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _bank1(params, cfg):
    left, span = bank_span(cfg.kernel_sizes)
    f = cfg.filters1
    bank = np.zeros((span, span, f * len(cfg.kernel_sizes)))
    for i, k in enumerate(cfg.kernel_sizes):
        o = left - same_pad(k)[0]
        bank[o:o + k, o:o + k, i * f:(i + 1) * f] = params[f"conv1_k{k}_w"].transpose(1, 2, 0)
    bias = np.concatenate([params[f"conv1_k{k}_b"] for k in cfg.kernel_sizes])
    return bank.reshape(span * span, -1), bias


def _bank2(params, cfg):
    left, span = bank_span(cfg.kernel_sizes)
    f = cfg.filters2
    c1 = cfg.filters1 * len(cfg.kernel_sizes)
    bank = np.zeros((c1, span, f * len(cfg.kernel_sizes)))
    for i, k in enumerate(cfg.kernel_sizes):
        o = left - same_pad(k)[0]
        bank[:, o:o + k, i * f:(i + 1) * f] = params[f"conv2_k{k}_w"].transpose(1, 2, 0)
    bias = np.concatenate([params[f"conv2_k{k}_b"] for k in cfg.kernel_sizes])
    return bank.reshape(c1 * span, -1), bias


def _max_over_time(z):
    idx = np.argmax(z, axis=1)  # first index on ties
    return np.take_along_axis(z, idx[:, None, :], axis=1)[:, 0, :], idx


def _scatter_max(dout, idx, length):
    bsz, f = dout.shape
    dz = np.zeros((bsz, length, f))
    np.put_along_axis(dz, idx[:, None, :], dout[:, None, :], axis=1)
    return dz


def cnnblock_forward(x: np.ndarray, params: dict, cfg) -> tuple[np.ndarray, dict]:
    """Score a batch ``x`` of shape (B, L, C); returns ``(scores, cache)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.shape[1:] != (cfg.frames, cfg.columns):
        raise ShapeMismatch(f"GFF batch {x.shape[1:]} but model expects {(cfg.frames, cfg.columns)}")
    bsz, length, cols = x.shape
    left, span = bank_span(cfg.kernel_sizes)
    right = span - 1 - left

    w1, b1 = _bank1(params, cfg)
    padded = np.pad(x, ((0, 0), (left, right), (left, right)))
    win1 = sliding_window_view(padded, (span, span), axis=(1, 2)).reshape(bsz * length * cols, span * span)
    z1 = (win1 @ w1 + b1).reshape(bsz, length, cols, -1)
    h1 = np.maximum(z1, 0.0).mean(axis=2)  # (B, L, C1)
    cache = {"x_shape": x.shape, "win1": win1, "z1": z1, "h1": h1}

    if cfg.num_layers == 2:
        w2, b2 = _bank2(params, cfg)
        padded = np.pad(h1, ((0, 0), (left, right), (0, 0)))
        win2 = sliding_window_view(padded, span, axis=1).reshape(bsz * length, -1)
        z2 = (win2 @ w2 + b2).reshape(bsz, length, -1)
        feat, idx = _max_over_time(np.maximum(z2, 0.0))
        cache.update(win2=win2, w2=w2, z2=z2, idx=idx)
    else:
        feat, idx = _max_over_time(h1)
        cache["idx"] = idx

    zd = feat @ params["dense_w"] + params["dense_b"]
    hd = np.maximum(zd, 0.0)
    score = sigmoid(hd @ params["out_w"] + params["out_b"][0])
    cache.update(feat=feat, zd=zd, hd=hd, score=score)
    return score, cache


def cnnblock_backward(dscore: np.ndarray, cache: dict, params: dict, cfg) -> dict:
    """Gradients of all CNNBlock parameters given dLoss/dscore of shape (B,)."""
    grads: dict = {}
    score = cache["score"]
    dlogit = np.asarray(dscore, dtype=np.float64) * score * (1.0 - score)

    grads["out_w"] = cache["hd"].T @ dlogit
    grads["out_b"] = np.array([dlogit.sum()])
    dzd = np.outer(dlogit, params["out_w"]) * (cache["zd"] > 0)
    grads["dense_w"] = cache["feat"].T @ dzd
    grads["dense_b"] = dzd.sum(axis=0)
    dfeat = dzd @ params["dense_w"].T

    bsz, length, cols = cache["x_shape"]
    left, span = bank_span(cfg.kernel_sizes)
    c1 = cfg.filters1 * len(cfg.kernel_sizes)

    if cfg.num_layers == 2:
        z2 = cache["z2"]
        dz2 = (_scatter_max(dfeat, cache["idx"], length) * (z2 > 0)).reshape(bsz * length, -1)
        dbank = (cache["win2"].T @ dz2).reshape(c1, span, -1)
        f = cfg.filters2
        for i, k in enumerate(cfg.kernel_sizes):
            o = left - same_pad(k)[0]
            grads[f"conv2_k{k}_w"] = dbank[:, o:o + k, i * f:(i + 1) * f].transpose(2, 0, 1).copy()
            grads[f"conv2_k{k}_b"] = dz2[:, i * f:(i + 1) * f].sum(axis=0)
        dwin = (dz2 @ cache["w2"].T).reshape(bsz, length, c1, span)
        dpad = np.zeros((bsz, length + span - 1, c1))
        for j in range(span):
            dpad[:, j:j + length, :] += dwin[:, :, :, j]
        dh1 = dpad[:, left:left + length, :]
    else:
        dh1 = _scatter_max(dfeat, cache["idx"], length)

    z1 = cache["z1"]
    dz1 = ((dh1 / cols)[:, :, None, :] * (z1 > 0)).reshape(bsz * length * cols, c1)
    dbank = (cache["win1"].T @ dz1).reshape(span, span, c1)
    f = cfg.filters1
    for i, k in enumerate(cfg.kernel_sizes):
        o = left - same_pad(k)[0]
        grads[f"conv1_k{k}_w"] = dbank[o:o + k, o:o + k, i * f:(i + 1) * f].transpose(2, 0, 1).copy()
        grads[f"conv1_k{k}_b"] = dz1[:, i * f:(i + 1) * f].sum(axis=0)
    return grads
