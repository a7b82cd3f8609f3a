"""Seeded generator of multi-face video scenarios.

Each persona has a fixed unit-norm base embedding, a box trajectory and a
fakeness model. Background faces (portraits, passers-by) can be given high
fakeness on purpose to imitate false positives of a frame-level detector.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from .errors import SpecInvalid
from .ingest import FaceObservation, FrameDims, VideoObservations

PersonaKind = Literal["primary_real", "primary_fake", "passerby", "portrait", "background_crowd"]
KINDS = ("primary_real", "primary_fake", "passerby", "portrait", "background_crowd")

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def video_seed(seed: int, index: int) -> int:
    """Per-video seed: a splitmix64 step over ``mix(seed) XOR index``.

    Scrambling the dataset seed first keeps ``(seed, index)`` pairs such as
    (1, 0) and (2, 3) from landing on the same video.
    """
    return splitmix64((splitmix64(seed & MASK64) ^ index) & MASK64)


@dataclass(frozen=True)
class PersonaSpec:
    kind: PersonaKind
    presence: tuple[tuple[int, int], ...]  # half-open [start, end) frame intervals
    center: tuple[float, float] = (0.5, 0.5)  # box centre, fraction of frame
    size: float = 0.3  # box side as a fraction of the frame side
    velocity: tuple[float, float] = (0.0, 0.0)  # centre drift per frame, fraction of frame
    bbox_jitter: float = 0.0
    fakeness_mean: tuple[float, ...] = (0.1,)
    fakeness_sigma: float = 0.0
    embedding_jitter: float = 0.0

    def frames(self) -> list[int]:
        out: set[int] = set()
        for start, end in self.presence:
            out.update(range(start, end))
        return sorted(out)


@dataclass(frozen=True)
class ScenarioSpec:
    personas: tuple[PersonaSpec, ...]
    video_id: str = "scenario"
    width: int = 320
    height: int = 240
    num_frames: int = 16
    embedding_dim: int = 16
    fakeness_channels: int = 1
    min_angle: float = 0.5  # radians between persona base embeddings
    seed: int = 0

    @property
    def label(self) -> int:
        return int(any(p.kind == "primary_fake" for p in self.personas))

    def validate(self) -> None:
        if self.width < 1 or self.height < 1 or self.num_frames < 1:
            raise SpecInvalid("frame size and num_frames must be positive")
        if self.embedding_dim < 1 or self.fakeness_channels < 1:
            raise SpecInvalid("embedding_dim and fakeness_channels must be positive")
        for i, p in enumerate(self.personas):
            if p.kind not in KINDS:
                raise SpecInvalid(f"persona {i}: unknown kind {p.kind!r}")
            if not 0.0 < p.size <= 1.0:
                raise SpecInvalid(f"persona {i}: size must lie in (0, 1]")
            for start, end in p.presence:
                if not 0 <= start <= end <= self.num_frames:
                    raise SpecInvalid(f"persona {i}: presence [{start}, {end}) outside the video")
            if len(p.fakeness_mean) != self.fakeness_channels:
                raise SpecInvalid(f"persona {i}: needs {self.fakeness_channels} fakeness means")
            if not all(0.0 <= m <= 1.0 for m in p.fakeness_mean):
                raise SpecInvalid(f"persona {i}: fakeness means must lie in [0, 1]")
            if min(p.fakeness_sigma, p.bbox_jitter, p.embedding_jitter) < 0:
                raise SpecInvalid(f"persona {i}: noise levels must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        try:
            d = dict(d)
            personas = []
            for p in d.pop("personas"):
                p = dict(p)
                fm = p.get("fakeness_mean", (0.1,))
                p["fakeness_mean"] = tuple(fm) if isinstance(fm, (list, tuple)) else (fm,)
                p["presence"] = tuple(tuple(iv) for iv in p["presence"])
                for key in ("center", "velocity"):
                    if key in p:
                        p[key] = tuple(p[key])
                personas.append(PersonaSpec(**p))
            spec = cls(personas=tuple(personas), **d)
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecInvalid(f"bad scenario spec: {exc}") from exc
        spec.validate()
        return spec


def base_embeddings(n: int, dim: int, min_angle: float, rng: np.random.Generator, max_tries: int = 10000) -> np.ndarray:
    """``n`` unit vectors with pairwise angle at least ``min_angle`` (rejection sampling)."""
    out: list[np.ndarray] = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > max_tries:
            raise SpecInvalid(f"cannot place {n} embeddings {min_angle} rad apart in {dim} dimensions")
        v = rng.normal(size=dim)
        v /= np.linalg.norm(v)
        if all(np.arccos(np.clip(v @ u, -1.0, 1.0)) >= min_angle for u in out):
            out.append(v)
    return np.array(out).reshape(n, dim)


def generate_scenario(spec: ScenarioSpec) -> VideoObservations:
    """Render ``spec`` into validated observations; fully determined by ``spec.seed``."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    bases = base_embeddings(len(spec.personas), spec.embedding_dim, spec.min_angle, rng)
    W, H = spec.width, spec.height

    rows = []
    for pi, p in enumerate(spec.personas):
        w = min(W, max(1, round(p.size * W)))
        h = min(H, max(1, round(p.size * H)))
        mean = np.asarray(p.fakeness_mean)
        for t in p.frames():
            cx = p.center[0] + p.velocity[0] * t + p.bbox_jitter * rng.normal()
            cy = p.center[1] + p.velocity[1] * t + p.bbox_jitter * rng.normal()
            x = int(np.clip(round(cx * W - w / 2), 0, W - w))
            y = int(np.clip(round(cy * H - h / 2), 0, H - h))
            emb = bases[pi] + p.embedding_jitter * rng.normal(size=spec.embedding_dim)
            fake = np.clip(mean + p.fakeness_sigma * rng.normal(size=mean.shape), 0.0, 1.0)
            rows.append((t, pi, FaceObservation(
                frame_index=t,
                bbox=(float(x), float(y), float(w), float(h)),
                embedding=tuple(round(float(v), 6) for v in emb),
                fakeness=tuple(round(float(v), 6) for v in fake),
            )))
    rows.sort(key=lambda r: (r[0], r[1]))
    return VideoObservations(
        video_id=spec.video_id,
        label=spec.label,
        frame_dims=FrameDims(W, H),
        num_frames=spec.num_frames,
        embedding_dim=spec.embedding_dim,
        fakeness_channels=spec.fakeness_channels,
        observations=tuple(r[2] for r in rows),
    )


def figure3_spec(seed: int = 0) -> ScenarioSpec:
    """Four faces over 16 frames: two real speakers, a passer-by and a wall portrait.

    Both background faces carry false-positive fakeness around 0.7.
    """
    return ScenarioSpec(
        video_id="figure3",
        num_frames=16,
        seed=seed,
        personas=(
            PersonaSpec("passerby", ((6, 9),), center=(0.15, 0.4), size=0.12, velocity=(0.03, 0.0),
                        fakeness_mean=(0.7,), fakeness_sigma=0.05),
            PersonaSpec("portrait", ((0, 16),), center=(0.85, 0.2), size=0.08,
                        fakeness_mean=(0.7,), fakeness_sigma=0.05),
            PersonaSpec("primary_real", ((0, 16),), center=(0.35, 0.6), size=0.35,
                        fakeness_mean=(0.1,), fakeness_sigma=0.05),
            PersonaSpec("primary_real", ((0, 16),), center=(0.65, 0.6), size=0.35,
                        fakeness_mean=(0.1,), fakeness_sigma=0.05),
        ),
    )


# ---------------------------------------------------------------------------
# multi-face benchmark templates

BENCH_FRAMES = 32
BENCH_EMBED = 32
BENCH_MIN_ANGLE = 1.3  # chord 1.21, clear of the default 1.1 threshold
FALSE_POSITIVE_RANGE = (0.55, 0.9)
FAKE_RANGE = (0.55, 0.9)
REAL_RANGE = (0.05, 0.25)
FAKENESS_SIGMA = 0.04  # per-frame detector noise


def _interval(rng, num_frames, lo, hi) -> tuple[tuple[int, int], ...]:
    length = int(rng.integers(lo, hi + 1))
    start = int(rng.integers(0, num_frames - length + 1))
    return ((start, start + length),)


def _primary(rng, kind, n_frames, fake_range) -> PersonaSpec:
    return PersonaSpec(
        kind, ((0, n_frames),),
        center=(float(rng.uniform(0.25, 0.75)), float(rng.uniform(0.35, 0.65))),
        size=float(rng.uniform(0.4, 0.65)),
        velocity=(float(rng.uniform(-0.002, 0.002)), 0.0),
        bbox_jitter=0.005,
        fakeness_mean=(float(rng.uniform(*fake_range)),),
        fakeness_sigma=FAKENESS_SIGMA,
        embedding_jitter=0.01,
    )


def _false_positive(rng, n_frames) -> PersonaSpec:
    mean = (float(rng.uniform(*FALSE_POSITIVE_RANGE)),)
    center = (float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.1, 0.9)))
    if rng.random() < 0.5:
        return PersonaSpec("portrait", ((0, n_frames),), center=center, size=float(rng.uniform(0.06, 0.12)),
                           fakeness_mean=mean, fakeness_sigma=FAKENESS_SIGMA, embedding_jitter=0.01)
    return PersonaSpec("passerby", _interval(rng, n_frames, 3, 8), center=center,
                       size=float(rng.uniform(0.08, 0.2)), velocity=(float(rng.choice([-1, 1])) * 0.02, 0.0),
                       bbox_jitter=0.005, fakeness_mean=mean, fakeness_sigma=FAKENESS_SIGMA, embedding_jitter=0.01)


def _crowd(rng, n_frames) -> PersonaSpec:
    presence = ((0, n_frames),) if rng.random() < 0.5 else _interval(rng, n_frames, 4, n_frames)
    return PersonaSpec("background_crowd", presence,
                       center=(float(rng.uniform(0.05, 0.95)), float(rng.uniform(0.05, 0.95))),
                       size=float(rng.uniform(0.04, 0.09)), bbox_jitter=0.003,
                       fakeness_mean=(float(rng.uniform(*REAL_RANGE)),), fakeness_sigma=FAKENESS_SIGMA,
                       embedding_jitter=0.01)


def _multi_face(rng, video_id, seed, fake: bool) -> ScenarioSpec:
    n = BENCH_FRAMES
    personas = []
    if fake:
        personas.append(_primary(rng, "primary_fake", n, FAKE_RANGE))
    for _ in range(int(rng.integers(0 if fake else 1, 3))):
        personas.append(_primary(rng, "primary_real", n, REAL_RANGE))
    if rng.random() < 0.7:
        for _ in range(int(rng.integers(1, 3))):
            personas.append(_false_positive(rng, n))
    lo = max(0, 2 - len(personas))
    for _ in range(int(rng.integers(lo, 15 - len(personas) + 1))):
        personas.append(_crowd(rng, n))
    order = rng.permutation(len(personas))
    return ScenarioSpec(
        personas=tuple(personas[i] for i in order),
        video_id=video_id,
        num_frames=n,
        embedding_dim=BENCH_EMBED,
        min_angle=BENCH_MIN_ANGLE,
        seed=seed,
    )


def real_multi_face(video_id: str, seed: int) -> ScenarioSpec:
    """Real speakers, often with high-fakeness background faces, plus 0-13 crowd faces."""
    return _multi_face(np.random.default_rng(seed), video_id, seed, fake=False)


def fake_multi_face(video_id: str, seed: int) -> ScenarioSpec:
    """One deepfaked speaker among 0-2 real ones, same background distribution as the real template."""
    return _multi_face(np.random.default_rng(seed), video_id, seed, fake=True)


Template = Callable[[str, int], ScenarioSpec]
BENCHMARK_MIX: tuple[tuple[float, Template], ...] = ((0.5, real_multi_face), (0.5, fake_multi_face))


def quota(n: int, weights: Sequence[float]) -> list[int]:
    """Largest-remainder allocation of ``n`` items to ``weights``."""
    raw = [w * n for w in weights]
    counts = [int(np.floor(r)) for r in raw]
    by_remainder = sorted(range(len(weights)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in by_remainder[: n - sum(counts)]:
        counts[i] += 1
    return counts


def generate_dataset(
    n_videos: int,
    scenario_mix: Sequence[tuple[float, Template]] = BENCHMARK_MIX,
    seed: int = 0,
    prefix: str = "vid",
) -> list[tuple[VideoObservations, int]]:
    """Reproducible labelled dataset; template counts follow the mix weights exactly."""
    weights = [w for w, _ in scenario_mix]
    if any(w < 0 for w in weights) or not np.isclose(sum(weights), 1.0):
        raise SpecInvalid("mix weights must be non-negative and sum to 1")
    if n_videos <= 0:
        return []
    assignment = [i for i, c in enumerate(quota(n_videos, weights)) for _ in range(c)]
    assignment = [assignment[j] for j in np.random.default_rng(seed).permutation(n_videos)]
    out = []
    for index, which in enumerate(assignment):
        vseed = video_seed(seed, index)
        spec = scenario_mix[which][1](f"{prefix}{seed}_{index:05d}", vseed)
        video = generate_scenario(spec)
        out.append((video, spec.label))
    return out


def payload_hash(video: VideoObservations) -> str:
    """Digest of the observations only (ignores video_id)."""
    from .ingest import to_lines

    return hashlib.sha256("\n".join(to_lines(video)[1:]).encode()).hexdigest()
