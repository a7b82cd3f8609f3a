import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gffdetect.errors import InvariantViolation
from gffdetect.geometry import geometry_series
from gffdetect.gff import GffConfig, assemble_gffs, column_names, sample_frames, sort_faces, write_csv
from gffdetect.tracker import FaceTrack

from helpers import obs, video


def make_tracks(fakeness_by_track, num_frames=4, present=None):
    """One track per entry, each on a distinct box; returns (video, tracks)."""
    tracks, all_obs = [], []
    for tid, fake in enumerate(fakeness_by_track):
        t = FaceTrack(tid)
        frames = range(num_frames) if present is None else present[tid]
        for f in frames:
            o = obs(f, (tid % 10 * 10, tid // 10 * 10, 8, 8), (float(tid), 0.0), (fake,))
            t.slots[f] = o
            all_obs.append(o)
        tracks.append(t)
    all_obs.sort(key=lambda o: o.frame_index)
    return video(all_obs, num_frames=num_frames), tracks


@pytest.mark.parametrize(
    "num_frames, expected",
    [(16, list(range(16))), (32, list(range(0, 32, 2))), (4, [f for f in range(4) for _ in range(4)])],
)
def test_sample_frames(num_frames, expected):
    assert sample_frames(num_frames, 16) == expected


def test_sort_by_descending_mean():
    _, (t0, t1) = make_tracks([0.2, 0.9])
    assert [t.track_id for t in sort_faces([t0, t1])] == [1, 0]


def test_sort_ties_by_track_id():
    _, tracks = make_tracks([0.5, 0.5, 0.5])
    assert [t.track_id for t in sort_faces(tracks[::-1])] == [0, 1, 2]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from([0.1, 0.5, 0.9]), min_size=1, max_size=8), st.randoms())
def test_sort_permutation_invariant(fakes, rnd):
    _, tracks = make_tracks(fakes)
    shuffled = list(tracks)
    rnd.shuffle(shuffled)
    assert [t.track_id for t in sort_faces(shuffled)] == [t.track_id for t in sort_faces(tracks)]


def test_faceless_video_single_padding_matrix():
    cfg = GffConfig(pad_value=-1.0)
    (m,) = assemble_gffs(video(num_frames=3), [], cfg)
    assert m.data.shape == (16, 10)
    assert np.all(m.data == -1.0)
    assert m.slot_track_ids == (None,) * 5


def test_four_faces_pad_last_slot():
    v, tracks = make_tracks([0.1, 0.2, 0.3, 0.4])
    (m,) = assemble_gffs(v, tracks)
    assert m.slot_track_ids == (3, 2, 1, 0, None)
    assert np.all(m.data[:, 8:] == 0.0)
    assert np.all(m.data[:, 1] == 0.4)


def test_twelve_faces_three_groups():
    fakes = list(np.linspace(0.05, 0.95, 12))
    v, tracks = make_tracks(fakes)
    ms = assemble_gffs(v, tracks)
    assert len(ms) == 3
    ids = [i for m in ms for i in m.slot_track_ids if i is not None]
    assert ids == [t.track_id for t in sort_faces(tracks)]
    assert ms[2].slot_track_ids[2:] == (None, None, None)


def test_overlapping_stride_covers_every_track():
    v, tracks = make_tracks(list(np.linspace(0.1, 0.9, 12)))
    ms = assemble_gffs(v, tracks, GffConfig(group_stride=3))
    seen = {i for m in ms for i in m.slot_track_ids if i is not None}
    assert seen == set(range(12))


def test_slot_alignment_and_absence():
    present = [[0, 2], [0, 1, 2, 3]]
    v, tracks = make_tracks([0.9, 0.3], present=present)
    frames = sample_frames(4, 16)
    (m,) = assemble_gffs(v, tracks)
    geo0 = geometry_series(tracks[0], v, frames).values
    assert np.array_equal(m.data[:, 0], geo0)
    absent = np.isin(frames, [1, 3])
    assert np.all(m.data[absent, 0:2] == 0.0)
    assert np.all(m.data[~absent, 1] == 0.9)


def test_fakeness_only_zeroes_geometry():
    v, tracks = make_tracks([0.9, 0.3])
    full = assemble_gffs(v, tracks)[0].data
    fo = assemble_gffs(v, tracks, GffConfig(use_geometry=False))[0].data
    geo_cols = np.arange(10) % 2 == 0
    assert np.all(fo[:, geo_cols] == 0.0)
    assert np.array_equal(fo[:, ~geo_cols], full[:, ~geo_cols])
    assert np.any(full[:, geo_cols] > 0)


def test_channel_mismatch_rejected():
    v, tracks = make_tracks([0.5])
    with pytest.raises(InvariantViolation):
        assemble_gffs(v, tracks, GffConfig(fakeness_channels=2))


def test_column_names_and_csv(tmp_path):
    assert column_names(2, 2) == ["slot0_geo", "slot0_fake0", "slot0_fake1", "slot1_geo", "slot1_fake0", "slot1_fake1"]
    v, tracks = make_tracks([0.5])
    m = assemble_gffs(v, tracks)[0]
    write_csv(m, tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0].split(",") == m.column_names()
    assert len(lines) == 17
    assert np.allclose(np.loadtxt(tmp_path / "g.csv", delimiter=",", skiprows=1), m.data)
