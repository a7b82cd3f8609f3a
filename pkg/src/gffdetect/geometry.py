"""Per-face geometric characteristic: relative face area scaled by total face area on the frame."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BoxNotInFrameList
from .ingest import FrameDims, VideoObservations
from .tracker import FaceTrack


@dataclass(frozen=True)
class GeometrySeries:
    track_id: int
    values: np.ndarray


def geometric_feature(face_bbox, all_bboxes_in_frame: Sequence, frame_dims: FrameDims) -> float:
    """Return ``a_i * sum_j a_j`` with ``a_k = w_k * h_k / (W * H)``.

    Overlapping boxes are counted at face value.
    """
    face_bbox = tuple(face_bbox)
    boxes = [tuple(b) for b in all_bboxes_in_frame]
    if face_bbox not in boxes:
        raise BoxNotInFrameList(f"{face_bbox} is not one of the frame's boxes")
    frame_area = frame_dims.area
    total = sum(b[2] * b[3] / frame_area for b in boxes)
    return face_bbox[2] * face_bbox[3] / frame_area * total


def frame_totals(video: VideoObservations) -> dict[int, float]:
    """Summed relative face area per frame, counting every detected face."""
    area = video.frame_dims.area
    totals: dict[int, float] = {}
    for obs in video.observations:
        totals[obs.frame_index] = totals.get(obs.frame_index, 0.0) + obs.area / area
    return totals


def geometry_series(
    track: FaceTrack,
    video: VideoObservations,
    sampled_frames: Sequence[int],
    totals: dict[int, float] | None = None,
) -> GeometrySeries:
    """Geometric characteristic of ``track`` on each sampled frame, 0 where the face is absent."""
    if totals is None:
        totals = frame_totals(video)
    area = video.frame_dims.area
    values = np.zeros(len(sampled_frames))
    for k, frame in enumerate(sampled_frames):
        obs = track.slots.get(frame)
        if obs is not None:
            values[k] = obs.area / area * totals[frame]
    return GeometrySeries(track.track_id, values)
