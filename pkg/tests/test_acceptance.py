"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are repeated in the terminal summary under "acceptance criteria".
"""

import random
import time
from fractions import Fraction

import numpy as np
from hypothesis import given, settings, strategies as st

from gffdetect.cli import run
from gffdetect.evaluate import BENCHMARK_MODEL, BENCHMARK_TRAIN, ablation_run, f_measure, roc_auc
from gffdetect.geometry import geometric_feature
from gffdetect.gff import GffConfig, assemble_gffs
from gffdetect.ingest import FrameDims
from gffdetect.net import gradcheck
from gffdetect.net.aggregator import aggregator_forward
from gffdetect.net.model import ModelConfig, init_params, video_scores
from gffdetect.net.train import TrainConfig, extract_features, model_config_for
from gffdetect.synth import PersonaSpec, ScenarioSpec, generate_dataset, generate_scenario
from gffdetect.tracker import FaceTrack, TrackerConfig, build_tracks, wma_update

from helpers import obs, video


# -- 1 ---------------------------------------------------------------------

def _wma_oracle(new, history, alpha):
    num = [0.0] * len(new)
    den = 0.0
    for f, vec in enumerate(history, start=1):
        w = (1.0 - alpha) ** f
        den += w
        for i, v in enumerate(vec):
            num[i] += w * v
    return [alpha * e + (1.0 - alpha) * n / den for e, n in zip(new, num)]


def _geometry_oracle(i, boxes, width, height):
    total = 0.0
    for _, _, w, h in boxes:
        total += (w * h) / (width * height)
    return (boxes[i][2] * boxes[i][3]) / (width * height) * total


def test_criterion_1_formula_oracles(criterion):
    with criterion(1, "geometric_feature and wma_update vs brute-force oracles") as detail:
        start = time.perf_counter()
        rng = np.random.default_rng(2024)
        cases = 1000
        worst_wma = 0.0
        for _ in range(cases):
            dim, t = int(rng.integers(1, 17)), int(rng.integers(1, 11))
            new = rng.normal(size=dim)
            hist = rng.normal(size=(t, dim))
            alpha = float(rng.uniform(0.01, 1.0))
            got = wma_update(new, hist, alpha)
            worst_wma = max(worst_wma, float(np.max(np.abs(got - _wma_oracle(new.tolist(), hist.tolist(), alpha)))))
        worst_geo = 0.0
        for _ in range(cases):
            W, H = int(rng.integers(1, 4000)), int(rng.integers(1, 4000))
            n = int(rng.integers(1, 16))
            boxes = [(0.0, 0.0, float(rng.uniform(0.01, 1) * W), float(rng.uniform(0.01, 1) * H)) for _ in range(n)]
            i = int(rng.integers(n))
            got = geometric_feature(boxes[i], boxes, FrameDims(W, H))
            worst_geo = max(worst_geo, abs(got - _geometry_oracle(i, boxes, W, H)))
        elapsed = time.perf_counter() - start
        detail["text"] = (f"{cases} cases each, max abs error wma {worst_wma:.2e}, geometry {worst_geo:.2e}, "
                          f"{elapsed:.2f}s")
        assert worst_wma < 1e-12 and worst_geo < 1e-12
        assert elapsed < 10


# -- 2 ---------------------------------------------------------------------

def test_criterion_2_gradient_check(criterion):
    with criterion(2, "analytic gradients vs central differences, 20 seeds") as detail:
        start = time.perf_counter()
        results = [gradcheck.run(seed) for seed in range(20)]
        elapsed = time.perf_counter() - start
        worst = max(r.max_rel_error for r in results)
        checked = sum(r.checked for r in results)
        skipped = sum(r.skipped_at_kinks for r in results)
        detail["text"] = (f"max relative error {worst:.2e} over {checked} coordinates "
                          f"({skipped} straddling a kink skipped), {elapsed:.1f}s")
        assert worst < 1e-4
        assert elapsed < 120


# -- 3 ---------------------------------------------------------------------

def _noiseless_video(seed, k, num_frames=20, dim=16):
    rng = np.random.default_rng(seed * 100 + k)
    personas = []
    for _ in range(k):
        cuts = sorted(rng.choice(np.arange(num_frames + 1), size=4, replace=False))
        presence = ((int(cuts[0]), int(cuts[1])), (int(cuts[2]), int(cuts[3])))
        personas.append(PersonaSpec("primary_real", presence, center=tuple(rng.uniform(0.2, 0.8, 2)), size=0.1))
    spec = ScenarioSpec(tuple(personas), num_frames=num_frames, embedding_dim=dim, min_angle=0.5,
                        seed=int(rng.integers(2**31)))
    return generate_scenario(spec)


def test_criterion_3_tracker_recovery(criterion):
    # noiseless embeddings: any threshold below the margin chord 2*sin(0.25) = 0.495 separates personas
    cfg = TrackerConfig(distance_threshold=0.25)
    with criterion(3, "tracker recovers K personas with full purity, 50 seeds x K=1..8") as detail:
        failures = []
        videos = 0
        for seed in range(50):
            for k in range(1, 9):
                v = _noiseless_video(seed, k)
                persona_of = {e: i for i, e in enumerate(dict.fromkeys(o.embedding for o in v.observations))}
                tracks = build_tracks(v, cfg)
                pure = all(len({persona_of[o.embedding] for o in t.slots.values()}) == 1 for t in tracks)
                if len(tracks) != len(persona_of) or len(persona_of) != k or not pure:
                    failures.append((seed, k, len(tracks)))
                videos += 1
        detail["text"] = f"{videos} videos, {len(failures)} failures, threshold {cfg.distance_threshold}"
        assert not failures, failures[:5]


# -- 4 ---------------------------------------------------------------------

def test_criterion_4_ablation_direction(criterion):
    with criterion(4, "full GFF beats fakeness-only on >=4/5 seeds, full F >= 0.90 on every seed") as detail:
        start = time.perf_counter()
        rows = []
        for seed in range(1, 6):
            data = generate_dataset(250, seed=seed)
            for v, _ in data:
                per_frame = np.bincount([o.frame_index for o in v.observations], minlength=v.num_frames)
                assert 2 <= per_frame.max() <= 15
            report = dict(ablation_run(
                data, ["gff", "fakeness_only"], TrainConfig(**BENCHMARK_TRAIN, seed=seed),
                split_seed=seed, model_overrides=BENCHMARK_MODEL,
            ))
            assert report["gff"].n == 50
            rows.append((seed, report["gff"].f_measure, report["fakeness_only"].f_measure))
        elapsed = time.perf_counter() - start
        wins = sum(full > fo for _, full, fo in rows)
        detail["text"] = ("F full/fakeness-only per seed: "
                          + ", ".join(f"s{s} {full:.3f}/{fo:.3f}" for s, full, fo in rows)
                          + f"; full wins {wins}/5; {elapsed:.0f}s")
        assert wins >= 4
        assert all(full >= 0.90 for _, full, _ in rows)
        assert elapsed < 15 * 60


# -- 5 ---------------------------------------------------------------------

def test_criterion_5_aggregation_contract(criterion):
    with criterion(5, "max mode equals max group score; fc mode permutation invariant") as detail:
        data = generate_dataset(250, seed=1)
        gff_cfg = GffConfig()
        feats = extract_features([v for v, _ in data], gff_cfg, TrackerConfig())
        max_cfg = model_config_for(gff_cfg, agg_mode="max")
        fc_cfg = model_config_for(gff_cfg)
        max_params, fc_params = init_params(max_cfg, 5), init_params(fc_cfg, 5)
        rnd = random.Random(5)
        multi = 0
        for groups in feats:
            score, group_scores = video_scores(groups, max_params, max_cfg)
            assert score == max(group_scores)
            base, base_scores = video_scores(groups, fc_params, fc_cfg)
            for _ in range(3):
                perm = list(range(len(groups)))
                rnd.shuffle(perm)
                assert aggregator_forward(base_scores[perm], fc_params, fc_cfg)[0] == base
                assert video_scores([groups[i] for i in perm], fc_params, fc_cfg)[0] == base
            multi += len(groups) > 1
        detail["text"] = f"{len(feats)} benchmark videos ({multi} with several groups), exact equality"


# -- 6 ---------------------------------------------------------------------

@st.composite
def face_sets(draw, n_faces=st.integers(0, 20), channels=st.integers(1, 3)):
    num_frames = draw(st.integers(1, 40))
    d = draw(channels)
    n = draw(n_faces)
    tracks, all_obs = [], []
    for tid in range(n):
        t = FaceTrack(tid)
        frames = sorted(draw(st.sets(st.integers(0, num_frames - 1), min_size=1, max_size=num_frames)))
        fake = draw(st.lists(st.sampled_from([0.0, 0.25, 0.5, 1.0]), min_size=d, max_size=d))
        size = draw(st.integers(1, 50))
        for f in frames:
            o = obs(f, (tid % 4 * 25, tid // 4 * 10, min(size, 25), min(size, 10)), (float(tid), 0.0), fake)
            t.slots[f] = o
            all_obs.append(o)
        tracks.append(t)
    all_obs.sort(key=lambda o: o.frame_index)
    return video(all_obs, num_frames=num_frames, channels=d), tracks


def test_criterion_6_gff_properties(criterion):
    with criterion(6, "GFF shape, group counts and order invariance, 500 cases per property") as detail:
        cases = {"shape": 0, "single": 0, "twelve": 0, "order": 0}

        @settings(max_examples=500, deadline=None, database=None)
        @given(face_sets(), st.integers(1, 20), st.integers(1, 7), st.one_of(st.none(), st.integers(1, 7)))
        def shape(vt, frames, slots, stride):
            v, tracks = vt
            cfg = GffConfig(frames, slots, v.fakeness_channels, group_stride=stride)
            for m in assemble_gffs(v, tracks, cfg):
                assert m.data.shape == (frames, slots * (1 + v.fakeness_channels))
            cases["shape"] += 1

        @settings(max_examples=500, deadline=None, database=None)
        @given(face_sets(n_faces=st.integers(0, 5)))
        def single(vt):
            v, tracks = vt
            assert len(assemble_gffs(v, tracks, GffConfig(fakeness_channels=v.fakeness_channels))) == 1
            cases["single"] += 1

        @settings(max_examples=500, deadline=None, database=None)
        @given(face_sets(n_faces=st.just(12)))
        def twelve(vt):
            v, tracks = vt
            ms = assemble_gffs(v, tracks, GffConfig(fakeness_channels=v.fakeness_channels, group_stride=5))
            assert len(ms) == 3
            cases["twelve"] += 1

        @settings(max_examples=500, deadline=None, database=None)
        @given(face_sets(), st.randoms(use_true_random=False))
        def order(vt, rnd):
            v, tracks = vt
            shuffled = list(tracks)
            rnd.shuffle(shuffled)
            cfg = GffConfig(fakeness_channels=v.fakeness_channels)
            a, b = assemble_gffs(v, tracks, cfg), assemble_gffs(v, shuffled, cfg)
            assert [m.slot_track_ids for m in a] == [m.slot_track_ids for m in b]
            assert all(x.data.tobytes() == y.data.tobytes() for x, y in zip(a, b))
            cases["order"] += 1

        for prop in (shape, single, twelve, order):
            prop()
        detail["text"] = ", ".join(f"{k} {v} cases" for k, v in cases.items())
        assert min(cases.values()) >= 500


# -- 7 ---------------------------------------------------------------------

def test_criterion_7_train_determinism(criterion, tmp_path):
    with criterion(7, "train twice with one seed gives byte-identical model and loss files") as detail:
        assert run(["synth", "--out", str(tmp_path / "data"), "--n", "16", "--seed", "11"]) == 0
        outputs = []
        for name in ("first", "second"):
            model, loss = tmp_path / f"{name}.json", tmp_path / f"{name}.csv"
            code = run(["train", "--data", str(tmp_path / "data"), "--model-out", str(model),
                        "--loss-out", str(loss), "--seed", "4", "--epochs", "2", "--samples-per-epoch", "48"])
            assert code == 0
            outputs.append((model.read_bytes(), loss.read_bytes()))
        same = outputs[0] == outputs[1]
        detail["text"] = (f"default architecture, model {len(outputs[0][0])} bytes, "
                          f"{'identical' if same else 'different'}")
        assert same


# -- 8 ---------------------------------------------------------------------

def _auc_pairs(p, y):
    pos = [s for s, l in zip(p, y) if l == 1]
    neg = [s for s, l in zip(p, y) if l == 0]
    wins = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg)
    return wins / (len(pos) * len(neg))


def _f_hand(p, y, threshold=0.5):
    tp = fp = fn = 0
    for s, l in zip(p, y):
        if s >= threshold:
            tp += l == 1
            fp += l == 0
        else:
            fn += l == 1
    if tp == 0:
        return 0.0
    precision, recall = Fraction(tp, tp + fp), Fraction(tp, tp + fn)
    return float(2 * precision * recall / (precision + recall))


def test_criterion_8_metric_oracles(criterion):
    with criterion(8, "roc_auc vs pairwise count, f_measure vs hand confusion arithmetic") as detail:
        rng = np.random.default_rng(8)
        auc_cases = 0
        for n in range(2, 51):
            for _ in range(20):
                y = rng.integers(0, 2, size=n)
                if y.min() == y.max():
                    y[0] = 1 - y[0]
                p = rng.integers(0, 8, size=n) / 8 if rng.random() < 0.5 else rng.random(n)
                assert roc_auc(p, y) == _auc_pairs(p.tolist(), y.tolist())
                auc_cases += 1
        for _ in range(100):
            n = int(rng.integers(1, 60))
            p, y = rng.random(n), rng.integers(0, 2, size=n)
            assert f_measure(p, y) == _f_hand(p.tolist(), y.tolist())
        detail["text"] = f"{auc_cases} AUC datasets of size 2..50 exact, 100 F-measure cases exact"
