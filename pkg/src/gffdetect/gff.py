"""Assemble geometric-fakeness feature (GFF) matrices.

A GFF matrix covers ``L`` sampled frames and ``N`` face slots. Each slot
contributes one geometry column followed by ``D`` fakeness columns. Faces are
ordered by mean fakeness (highest first) and cut into groups of ``N``; a short
final group is padded.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvariantViolation
from .geometry import frame_totals, geometry_series
from .ingest import VideoObservations
from .tracker import FaceTrack, TrackerConfig, build_tracks


@dataclass(frozen=True)
class GffConfig:
    frames_per_matrix: int = 16
    face_slots: int = 5
    fakeness_channels: int = 1
    pad_value: float = 0.0
    group_stride: int | None = None
    use_geometry: bool = True

    def __post_init__(self):
        for name in ("frames_per_matrix", "face_slots", "fakeness_channels"):
            if getattr(self, name) < 1:
                raise InvariantViolation(name, detail="must be >= 1")
        if self.group_stride is not None and self.group_stride < 1:
            raise InvariantViolation("group_stride", detail="must be >= 1")

    @property
    def stride(self) -> int:
        return self.group_stride or self.face_slots

    @property
    def slot_width(self) -> int:
        return 1 + self.fakeness_channels

    @property
    def num_columns(self) -> int:
        return self.face_slots * self.slot_width


@dataclass(frozen=True)
class GffMatrix:
    data: np.ndarray  # (L, N * (1 + D))
    slot_track_ids: tuple[int | None, ...]

    def column_names(self) -> list[str]:
        return column_names(len(self.slot_track_ids), self.data.shape[1] // len(self.slot_track_ids) - 1)


def column_names(face_slots: int, fakeness_channels: int) -> list[str]:
    names = []
    for k in range(face_slots):
        names.append(f"slot{k}_geo")
        names.extend(f"slot{k}_fake{d}" for d in range(fakeness_channels))
    return names


def sample_frames(num_frames: int, length: int) -> list[int]:
    """``length`` evenly spaced frame indices: ``floor(k * num_frames / length)``."""
    if num_frames < 1:
        raise InvariantViolation("num_frames", detail="must be >= 1")
    return [k * num_frames // length for k in range(length)]


def sort_faces(tracks: Sequence[FaceTrack]) -> list[FaceTrack]:
    """Order tracks by descending mean fakeness; ties go to the lower track id."""
    return sorted(tracks, key=lambda t: (-t.mean_fakeness(), t.track_id))


def _slot_block(track: FaceTrack, video: VideoObservations, frames, totals, cfg: GffConfig) -> np.ndarray:
    block = np.full((len(frames), cfg.slot_width), cfg.pad_value, dtype=np.float64)
    if cfg.use_geometry:
        block[:, 0] = geometry_series(track, video, frames, totals).values
    for k, frame in enumerate(frames):
        obs = track.slots.get(frame)
        if obs is not None:
            block[k, 1:] = obs.fakeness
    return block


def assemble_gffs(
    video: VideoObservations,
    tracks: Sequence[FaceTrack],
    cfg: GffConfig | None = None,
) -> list[GffMatrix]:
    """Build the ordered list of GFF matrices for one video.

    Always returns at least one matrix; a faceless video yields a single
    all-padding matrix.
    """
    cfg = cfg or GffConfig(fakeness_channels=video.fakeness_channels)
    if cfg.fakeness_channels != video.fakeness_channels:
        raise InvariantViolation(
            "fakeness_channels", detail=f"config has {cfg.fakeness_channels}, video has {video.fakeness_channels}"
        )
    frames = sample_frames(video.num_frames, cfg.frames_per_matrix)
    totals = frame_totals(video)
    ordered = sort_faces(tracks)
    n, width = cfg.face_slots, cfg.slot_width

    starts = list(range(0, max(len(ordered) - n, 0) + 1, cfg.stride))
    if ordered and starts[-1] + n < len(ordered):
        starts.append(starts[-1] + cfg.stride)

    matrices = []
    for start in starts:
        group = ordered[start:start + n]
        data = np.full((len(frames), n * width), cfg.pad_value, dtype=np.float64)
        for slot, track in enumerate(group):
            data[:, slot * width:(slot + 1) * width] = _slot_block(track, video, frames, totals, cfg)
        ids = tuple(t.track_id for t in group) + (None,) * (n - len(group))
        matrices.append(GffMatrix(data, ids))
    return matrices


def video_gffs(
    video: VideoObservations,
    gff_cfg: GffConfig | None = None,
    tracker_cfg: TrackerConfig | None = None,
) -> list[GffMatrix]:
    """Track faces and assemble GFFs in one call."""
    return assemble_gffs(video, build_tracks(video, tracker_cfg), gff_cfg)


def write_csv(matrix: GffMatrix, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(matrix.column_names())
        for row in matrix.data:
            writer.writerow([repr(float(v)) for v in row])
