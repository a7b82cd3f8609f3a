"""Training loop and video-level prediction."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..errors import EmptyDataset, InvariantViolation
from ..gff import GffConfig, GffMatrix, video_gffs
from ..ingest import VideoObservations
from ..tracker import TrackerConfig
from .model import Model, ModelConfig, batch_loss_and_grads, init_params, video_scores
from .optim import NesterovSGD

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    momentum: float = 0.9
    batch_size: int = 12
    label_smoothing: float = 0.001
    epochs: int = 100
    samples_per_epoch: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise InvariantViolation("lr", detail="must be > 0")
        if not 0 <= self.momentum < 1:
            raise InvariantViolation("momentum", detail="must lie in [0, 1)")
        if not 0 <= self.label_smoothing < 1:
            raise InvariantViolation("label_smoothing", detail="must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0 or self.samples_per_epoch < 1:
            raise InvariantViolation("batch_size", detail="batch_size and samples_per_epoch >= 1, epochs >= 0")


@dataclass(frozen=True)
class VideoPrediction:
    video_id: str
    video_score: float
    group_scores: tuple[float, ...]
    threshold: float = 0.5

    @property
    def verdict(self) -> bool:
        """True means the video is judged fake."""
        return self.video_score >= self.threshold

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "score": self.video_score,
            "verdict": "fake" if self.verdict else "real",
            "group_scores": list(self.group_scores),
        }


def model_config_for(gff_cfg: GffConfig, **overrides) -> ModelConfig:
    return ModelConfig(**{"frames": gff_cfg.frames_per_matrix, "columns": gff_cfg.num_columns, **overrides})


def extract_features(
    videos: Sequence[VideoObservations],
    gff_cfg: GffConfig,
    tracker_cfg: TrackerConfig,
    jobs: int = 1,
) -> list[list[np.ndarray]]:
    """GFF stacks for each video, in input order (identical for any ``jobs``)."""
    if jobs > 1 and len(videos) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            mats = list(pool.map(video_gffs, videos, [gff_cfg] * len(videos), [tracker_cfg] * len(videos)))
    else:
        mats = [video_gffs(v, gff_cfg, tracker_cfg) for v in videos]
    return [[m.data for m in ms] for ms in mats]


def epoch_order(n: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Indices for one epoch: consecutive shuffled passes over the dataset, cut to ``samples``."""
    passes = -(-samples // n)
    return np.concatenate([rng.permutation(n) for _ in range(passes)])[:samples]


def fit(
    features: Sequence[Sequence[np.ndarray]],
    labels: Sequence[int],
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
) -> tuple[dict, list[float]]:
    """Train on precomputed GFF stacks; returns ``(params, per-epoch mean loss)``."""
    if len(features) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    rng = np.random.default_rng(train_cfg.seed)
    params = init_params(model_cfg, rng)
    opt = NesterovSGD(train_cfg.lr, train_cfg.momentum)
    history = []
    for epoch in range(train_cfg.epochs):
        order = epoch_order(len(features), train_cfg.samples_per_epoch, rng)
        losses, sizes = [], []
        for start in range(0, len(order), train_cfg.batch_size):
            idx = order[start:start + train_cfg.batch_size]
            loss, grads = batch_loss_and_grads(
                [features[i] for i in idx], [labels[i] for i in idx],
                opt.lookahead(params), model_cfg, train_cfg.label_smoothing,
            )
            params = opt.step(params, grads)
            losses.append(loss)
            sizes.append(len(idx))
        history.append(float(np.dot(losses, sizes) / sum(sizes)))
        log.debug("epoch %d mean loss %.6f", epoch, history[-1])
    return params, history


def train(
    dataset: Sequence[tuple[VideoObservations, int]],
    gff_cfg: GffConfig,
    tracker_cfg: TrackerConfig,
    train_cfg: TrainConfig,
    model_cfg: ModelConfig | None = None,
    jobs: int = 1,
) -> tuple[Model, list[float]]:
    """Track, assemble GFFs and train the CNNBlock and aggregator jointly."""
    if len(dataset) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    model_cfg = model_cfg or model_config_for(gff_cfg)
    features = extract_features([v for v, _ in dataset], gff_cfg, tracker_cfg, jobs)
    params, history = fit(features, [int(y) for _, y in dataset], model_cfg, train_cfg)
    extra = {"gff": asdict(gff_cfg), "tracker": asdict(tracker_cfg), "train": asdict(train_cfg)}
    return Model(model_cfg, params, extra), history


def predict_features(groups: Sequence[np.ndarray], model: Model, video_id: str = "", threshold: float = 0.5) -> VideoPrediction:
    score, group_scores = video_scores(groups, model.params, model.config)
    return VideoPrediction(video_id, float(score), tuple(float(s) for s in group_scores), threshold)


def predict_video(
    video: VideoObservations,
    model: Model,
    gff_cfg: GffConfig | None = None,
    tracker_cfg: TrackerConfig | None = None,
    threshold: float = 0.5,
) -> VideoPrediction:
    """Full pipeline for one video: tracks, geometry, GFFs, CNNBlock, aggregation."""
    gff_cfg = gff_cfg or pipeline_configs(model, video.fakeness_channels)[0]
    tracker_cfg = tracker_cfg or pipeline_configs(model, video.fakeness_channels)[1]
    groups = [m.data for m in video_gffs(video, gff_cfg, tracker_cfg)]
    return predict_features(groups, model, video.video_id, threshold)


def pipeline_configs(model: Model, fakeness_channels: int = 1) -> tuple[GffConfig, TrackerConfig]:
    """GFF and tracker settings stored in the model file, or defaults sized to the model."""
    if "gff" in model.extra:
        gff_cfg = GffConfig(**model.extra["gff"])
    else:
        slots = model.config.columns // (1 + fakeness_channels)
        gff_cfg = GffConfig(frames_per_matrix=model.config.frames, face_slots=slots, fakeness_channels=fakeness_channels)
    tracker_cfg = TrackerConfig(**model.extra.get("tracker", {}))
    return gff_cfg, tracker_cfg
