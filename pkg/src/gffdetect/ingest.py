"""JSONL observation format: the boundary between upstream detectors and this package.

A file holds one video. The first line is a header::

    {"video_id": "v0", "label": 1, "width": 640, "height": 480,
     "num_frames": 48, "embedding_dim": 32, "fakeness_channels": 1}

and every following line is one detected face::

    {"frame": 0, "x": 10, "y": 12, "w": 80, "h": 96,
     "embedding": [...], "fakeness": [0.93]}

Coordinates are absolute pixels, ``fakeness`` values lie in [0, 1].
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable

from .errors import IoFailure, InvariantViolation, MalformedLine, MissingHeader

HEADER_KEYS = ("video_id", "label", "width", "height", "num_frames", "embedding_dim", "fakeness_channels")
BODY_KEYS = ("frame", "x", "y", "w", "h", "embedding", "fakeness")


@dataclass(frozen=True)
class FrameDims:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvariantViolation("frame_dims", detail=f"{self.width}x{self.height}")

    @property
    def area(self) -> float:
        return float(self.width * self.height)


@dataclass(frozen=True)
class FaceObservation:
    frame_index: int
    bbox: tuple[float, float, float, float]  # x, y, w, h
    embedding: tuple[float, ...]
    fakeness: tuple[float, ...]

    @property
    def area(self) -> float:
        return self.bbox[2] * self.bbox[3]


@dataclass(frozen=True)
class VideoObservations:
    video_id: str
    label: int | None
    frame_dims: FrameDims
    num_frames: int
    embedding_dim: int
    fakeness_channels: int = 1
    observations: tuple[FaceObservation, ...] = field(default_factory=tuple)

    def __post_init__(self):
        validate_header(self)
        prev = -1
        for i, obs in enumerate(self.observations):
            validate_observation(self, obs)
            if obs.frame_index < prev:
                raise InvariantViolation("frame", detail=f"observation {i} not sorted by frame")
            prev = obs.frame_index

    def frames(self) -> dict[int, list[int]]:
        """Map frame index -> positions (into ``observations``) of faces on that frame."""
        out: dict[int, list[int]] = {}
        for i, obs in enumerate(self.observations):
            out.setdefault(obs.frame_index, []).append(i)
        return out


def _finite(v) -> bool:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        return False
    try:
        return math.isfinite(v)
    except OverflowError:  # ints beyond float range
        return False


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def validate_header(v: VideoObservations, line_no: int | None = None) -> None:
    if not isinstance(v.video_id, str):
        raise InvariantViolation("video_id", line_no, "must be a string")
    if v.label is not None and not (_is_int(v.label) and v.label in (0, 1)):
        raise InvariantViolation("label", line_no, "must be 0, 1 or null")
    if not _is_int(v.num_frames) or v.num_frames < 1:
        raise InvariantViolation("num_frames", line_no, "must be a positive integer")
    if not _is_int(v.embedding_dim) or v.embedding_dim < 1:
        raise InvariantViolation("embedding_dim", line_no, "must be a positive integer")
    if not _is_int(v.fakeness_channels) or v.fakeness_channels < 1:
        raise InvariantViolation("fakeness_channels", line_no, "must be a positive integer")


def validate_observation(v: VideoObservations, obs: FaceObservation, line_no: int | None = None) -> None:
    if not _is_int(obs.frame_index) or not 0 <= obs.frame_index < v.num_frames:
        raise InvariantViolation("frame", line_no, f"must be an integer in [0, {v.num_frames})")
    if len(obs.bbox) != 4 or not all(_finite(c) for c in obs.bbox):
        raise InvariantViolation("bbox", line_no, "x, y, w, h must be finite numbers")
    x, y, w, h = obs.bbox
    if w <= 0 or h <= 0:
        raise InvariantViolation("bbox", line_no, "w and h must be positive")
    dims = v.frame_dims
    if x < 0 or y < 0 or x + w > dims.width or y + h > dims.height:
        raise InvariantViolation("bbox", line_no, f"box {obs.bbox} outside {dims.width}x{dims.height} frame")
    if len(obs.embedding) != v.embedding_dim or not all(_finite(c) for c in obs.embedding):
        raise InvariantViolation("embedding", line_no, f"expected {v.embedding_dim} finite numbers")
    if len(obs.fakeness) != v.fakeness_channels:
        raise InvariantViolation("fakeness", line_no, f"expected {v.fakeness_channels} channels")
    if not all(_finite(c) and 0.0 <= c <= 1.0 for c in obs.fakeness):
        raise InvariantViolation("fakeness", line_no, "channels must lie in [0, 1]")


def _require_keys(obj: dict, keys: tuple[str, ...], line_no: int) -> None:
    missing = [k for k in keys if k not in obj]
    if missing:
        raise InvariantViolation(missing[0], line_no, "missing field")
    extra = sorted(set(obj) - set(keys))
    if extra:
        raise InvariantViolation(extra[0], line_no, "unknown field")


def _float_list(obj, name: str, line_no: int) -> tuple[float, ...]:
    if not isinstance(obj, list) or not all(_finite(c) for c in obj):
        raise InvariantViolation(name, line_no, "must be an array of finite numbers")
    return tuple(float(c) for c in obj)


def _header_from(obj: dict, line_no: int) -> VideoObservations:
    _require_keys(obj, HEADER_KEYS, line_no)
    for key in ("width", "height"):
        if not _is_int(obj[key]) or obj[key] < 1:
            raise InvariantViolation(key, line_no, "must be a positive integer")
    try:
        return VideoObservations(
            video_id=obj["video_id"],
            label=obj["label"],
            frame_dims=FrameDims(obj["width"], obj["height"]),
            num_frames=obj["num_frames"],
            embedding_dim=obj["embedding_dim"],
            fakeness_channels=obj["fakeness_channels"],
        )
    except InvariantViolation as exc:
        raise InvariantViolation(exc.field, line_no, str(exc)) from None


def _observation_from(obj: dict, header: VideoObservations, line_no: int) -> FaceObservation:
    _require_keys(obj, BODY_KEYS, line_no)
    if not _is_int(obj["frame"]):
        raise InvariantViolation("frame", line_no, "must be an integer")
    for key in ("x", "y", "w", "h"):
        if not _finite(obj[key]):
            raise InvariantViolation(key, line_no, "must be a finite number")
    obs = FaceObservation(
        frame_index=obj["frame"],
        bbox=(float(obj["x"]), float(obj["y"]), float(obj["w"]), float(obj["h"])),
        embedding=_float_list(obj["embedding"], "embedding", line_no),
        fakeness=_float_list(obj["fakeness"], "fakeness", line_no),
    )
    validate_observation(header, obs, line_no)
    return obs


def parse_observations(source: BinaryIO | bytes | str | Iterable[bytes]) -> VideoObservations:
    """Parse and validate one video from JSONL.

    ``source`` may be raw bytes, text, or a binary stream. Blank lines are
    skipped. Every failure is raised as a subclass of ``DataError`` carrying the
    1-based line number where applicable.
    """
    if isinstance(source, str):
        source = source.encode("utf-8")
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)

    header: VideoObservations | None = None
    observations: list[FaceObservation] = []
    prev_frame = -1
    for line_no, raw in enumerate(source, start=1):
        try:
            text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
        except UnicodeDecodeError as exc:
            raise MalformedLine(line_no, "not UTF-8") from exc
        if not text.strip():
            continue
        try:
            obj = json.loads(text)
        except (json.JSONDecodeError, RecursionError) as exc:
            raise MalformedLine(line_no, str(exc)) from exc
        if not isinstance(obj, dict):
            raise MalformedLine(line_no, "expected a JSON object")

        if header is None:
            if "frame" in obj and "video_id" not in obj:
                raise MissingHeader(f"line {line_no} is an observation")
            header = _header_from(obj, line_no)
            continue

        obs = _observation_from(obj, header, line_no)
        if obs.frame_index < prev_frame:
            raise InvariantViolation("frame", line_no, "observations must be sorted by frame")
        prev_frame = obs.frame_index
        observations.append(obs)

    if header is None:
        raise MissingHeader("input is empty")
    # already validated line by line; bypass __post_init__ re-validation cost
    video = VideoObservations.__new__(VideoObservations)
    for name in ("video_id", "label", "frame_dims", "num_frames", "embedding_dim", "fakeness_channels"):
        object.__setattr__(video, name, getattr(header, name))
    object.__setattr__(video, "observations", tuple(observations))
    return video


def _num(v: float):
    # integral floats are written as ints so pixel coordinates stay readable
    return int(v) if float(v).is_integer() and abs(v) < 2**53 else v


def to_lines(video: VideoObservations) -> list[str]:
    header = {
        "video_id": video.video_id,
        "label": video.label,
        "width": video.frame_dims.width,
        "height": video.frame_dims.height,
        "num_frames": video.num_frames,
        "embedding_dim": video.embedding_dim,
        "fakeness_channels": video.fakeness_channels,
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    for obs in video.observations:
        x, y, w, h = obs.bbox
        body = {
            "frame": obs.frame_index,
            "x": _num(x), "y": _num(y), "w": _num(w), "h": _num(h),
            "embedding": list(obs.embedding),
            "fakeness": list(obs.fakeness),
        }
        lines.append(json.dumps(body, separators=(",", ":")))
    return lines


def write_observations(video: VideoObservations, sink: BinaryIO | str | Path) -> int:
    """Serialize ``video`` as JSONL; return the number of bytes written."""
    payload = ("\n".join(to_lines(video)) + "\n").encode("utf-8")
    try:
        if isinstance(sink, (str, Path)):
            Path(sink).write_bytes(payload)
        else:
            sink.write(payload)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return len(payload)


def dumps(video: VideoObservations) -> bytes:
    buf = io.BytesIO()
    write_observations(video, buf)
    return buf.getvalue()


def load(path: str | Path) -> VideoObservations:
    try:
        with open(path, "rb") as f:
            return parse_observations(f)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
