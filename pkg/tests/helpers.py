import json

from gffdetect.ingest import FaceObservation, FrameDims, VideoObservations


def obs(frame, bbox, embedding, fakeness=(0.5,)):
    return FaceObservation(frame, tuple(float(v) for v in bbox), tuple(map(float, embedding)), tuple(map(float, fakeness)))


def video(observations=(), *, num_frames=4, dims=(100, 100), embedding_dim=2, channels=1, label=None, video_id="v"):
    return VideoObservations(video_id, label, FrameDims(*dims), num_frames, embedding_dim, channels, tuple(observations))


def jsonl(header: dict, *bodies: dict) -> bytes:
    return "".join(json.dumps(o) + "\n" for o in (header, *bodies)).encode()
