"""Group faces across frames into per-person tracks by embedding similarity.

Each track keeps a weighted-moving-average (WMA) prototype of its
embeddings. A new face joins the track whose prototype is nearest, provided
the distance is below ``distance_threshold``; otherwise it opens a new track.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyHistory, InvariantViolation
from .ingest import FaceObservation, VideoObservations


@dataclass(frozen=True)
class TrackerConfig:
    alpha: float = 0.3
    distance_threshold: float = 1.1
    wma_window_fraction: float = 0.1
    distance_metric: Literal["euclidean", "cosine"] = "euclidean"

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise InvariantViolation("alpha", detail="must lie in (0, 1]")
        if not self.distance_threshold >= 0.0:
            raise InvariantViolation("distance_threshold", detail="must be >= 0")
        if not 0.0 < self.wma_window_fraction <= 1.0:
            raise InvariantViolation("wma_window_fraction", detail="must lie in (0, 1]")
        if self.distance_metric not in ("euclidean", "cosine"):
            raise InvariantViolation("distance_metric", detail="euclidean or cosine")

    def window(self, num_frames: int) -> int:
        return max(1, round(self.wma_window_fraction * num_frames))


@dataclass
class FaceTrack:
    track_id: int
    slots: dict[int, FaceObservation] = field(default_factory=dict)
    wma_history: list[np.ndarray] = field(default_factory=list)

    @property
    def prototype(self) -> np.ndarray:
        return self.wma_history[-1]

    @property
    def frames(self) -> list[int]:
        return sorted(self.slots)

    def mean_fakeness(self) -> float:
        """Mean fakeness over the frames where the face is present, averaged over channels."""
        return float(np.mean([np.mean(o.fakeness) for o in self.slots.values()]))


def wma_update(new_embedding, history: Sequence, alpha: float) -> np.ndarray:
    """Blend a new embedding with the recent WMA prototypes of a track.

    ``history`` holds at most T prior WMA vectors, most recent first. The
    prior at lag ``f`` (1-based) gets weight ``(1 - alpha) ** f``, normalised
    over the available lags.
    """
    new = np.asarray(new_embedding, dtype=np.float64)
    if len(history) == 0:
        raise EmptyHistory("wma_update needs at least one prior vector")
    hist = np.asarray(history, dtype=np.float64)
    if hist.ndim != 2 or hist.shape[1] != new.shape[0]:
        raise DimensionMismatch(f"history shape {hist.shape} vs embedding {new.shape}")
    if alpha == 1.0:
        return new.copy()
    decay = (1.0 - alpha) ** np.arange(1, hist.shape[0] + 1)
    smoothed = decay @ hist / decay.sum()
    return alpha * new + (1.0 - alpha) * smoothed


def embedding_distance(a: np.ndarray, b: np.ndarray, metric: str = "euclidean") -> float:
    if metric == "euclidean":
        return float(np.linalg.norm(a - b))
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 1.0
    return float(1.0 - np.dot(a, b) / (na * nb))


def assign_frame(
    frame_obs: Sequence[FaceObservation],
    active_tracks: Sequence[FaceTrack],
    cfg: TrackerConfig,
    window: int = 1,
    next_id: int | None = None,
) -> tuple[dict[int, int], list[FaceTrack]]:
    """Match one frame's faces to tracks, nearest pair first, one-to-one.

    Returns ``(assignments, new_tracks)`` where ``assignments`` maps the
    position of each observation in ``frame_obs`` to a track id. Matched
    tracks have their WMA prototype updated in place; unmatched faces open new
    tracks, numbered from ``next_id`` in observation order.
    """
    if next_id is None:
        next_id = max((t.track_id for t in active_tracks), default=-1) + 1

    candidates = []
    for ti, track in enumerate(active_tracks):
        proto = track.prototype
        for oi, obs in enumerate(frame_obs):
            d = embedding_distance(np.asarray(obs.embedding), proto, cfg.distance_metric)
            if d < cfg.distance_threshold:
                candidates.append((d, track.track_id, oi, ti))
    candidates.sort()

    assignments: dict[int, int] = {}
    taken: set[int] = set()
    for _, track_id, oi, ti in candidates:
        if oi in assignments or track_id in taken:
            continue
        assignments[oi] = track_id
        taken.add(track_id)
        track = active_tracks[ti]
        obs = frame_obs[oi]
        recent = track.wma_history[::-1][:window]
        track.wma_history.append(wma_update(obs.embedding, recent, cfg.alpha))
        track.slots[obs.frame_index] = obs

    new_tracks = []
    for oi, obs in enumerate(frame_obs):
        if oi in assignments:
            continue
        track = FaceTrack(next_id)
        track.slots[obs.frame_index] = obs
        track.wma_history.append(np.asarray(obs.embedding, dtype=np.float64))
        assignments[oi] = next_id
        new_tracks.append(track)
        next_id += 1
    return assignments, new_tracks


def build_tracks(video: VideoObservations, cfg: TrackerConfig | None = None) -> list[FaceTrack]:
    """Partition every observation of ``video`` into tracks, ordered by first appearance."""
    cfg = cfg or TrackerConfig()
    window = cfg.window(video.num_frames)
    tracks: list[FaceTrack] = []
    by_frame = video.frames()
    for frame in sorted(by_frame):
        frame_obs = [video.observations[i] for i in by_frame[frame]]
        _, new = assign_frame(frame_obs, tracks, cfg, window, next_id=len(tracks))
        tracks.extend(new)
    return tracks
