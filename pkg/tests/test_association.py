import math

import numpy as np
import pytest

from letrack.association import (
    Diagnostics,
    Tracker,
    TrackerConfig,
    bisoftmax_scores,
    cem_gate,
    run_sequence,
    update_embedding,
)
from letrack.core import TrackState, TrackStatus

from helpers import det, meta, two_split_bank, unit


# ---------------------------------------------------------------------------
# config


def test_config_defaults():
    cfg = TrackerConfig()
    assert cfg.match_threshold == 0.5
    assert cfg.new_track_threshold == 0.7
    assert cfg.cem_gate_threshold == 0.5
    assert cfg.embedding_momentum == 0.8
    assert cfg.max_lost_frames == 10


def test_config_validates_ranges():
    with pytest.raises(ValueError, match="match_threshold"):
        TrackerConfig(match_threshold=0.0)
    with pytest.raises(ValueError, match="cem_gate_threshold"):
        TrackerConfig(cem_gate_threshold=1.5)
    with pytest.raises(ValueError, match="max_lost_frames"):
        TrackerConfig(max_lost_frames=-1)


def test_config_from_mapping():
    cfg = TrackerConfig.from_mapping({"match_threshold": "0.4", "max_lost_frames": "3"})
    assert cfg.match_threshold == 0.4
    assert cfg.max_lost_frames == 3
    with pytest.raises(ValueError, match="unknown tracker config key"):
        TrackerConfig.from_mapping({"bogus": "1"})


# ---------------------------------------------------------------------------
# scoring primitives


def test_bisoftmax_single_pair_is_one():
    s = bisoftmax_scores(np.array([[3.0, 1.0]]), np.array([[0.1, 0.2]]))
    assert s.shape == (1, 1)
    assert s[0, 0] == 1.0


def test_bisoftmax_orthonormal_frozen():
    embs = np.eye(2)
    s = bisoftmax_scores(embs, embs)
    e = math.e
    assert s[0, 0] == pytest.approx(e / (e + 1), abs=1e-12)
    assert s[1, 1] == pytest.approx(e / (e + 1), abs=1e-12)
    assert s[0, 1] == pytest.approx(1 / (e + 1), abs=1e-12)


def test_bisoftmax_uses_raw_dots_no_normalization():
    # Scaling the embeddings must sharpen the softmax; a cosine-style score
    # would be scale invariant.
    embs = np.eye(2)
    mild = bisoftmax_scores(embs, embs)[0, 0]
    sharp = bisoftmax_scores(embs * 6.0, embs * 6.0)[0, 0]
    assert sharp > mild
    assert sharp == pytest.approx(1.0, abs=1e-9)


def test_bisoftmax_total_mass():
    rng = np.random.default_rng(3)
    q = rng.normal(size=(4, 8))
    k = rng.normal(size=(6, 8))
    s = bisoftmax_scores(q, k)
    assert s.shape == (4, 6)
    assert np.all(s >= 0.0) and np.all(s <= 1.0)
    # average of a row-stochastic and a column-stochastic matrix
    assert float(s.sum()) == pytest.approx((4 + 6) / 2, abs=1e-9)


def test_bisoftmax_huge_dots_are_stable():
    q = np.array([[1e6, 0.0]])
    k = np.array([[1e6, 0.0], [0.0, 1e6]])
    s = bisoftmax_scores(q, k)
    assert np.all(np.isfinite(s))
    assert s[0, 0] == pytest.approx(1.0, abs=1e-12)


def test_bisoftmax_empty_and_errors():
    assert bisoftmax_scores(np.zeros((0, 4)), np.zeros((3, 4))).shape == (0, 3)
    assert bisoftmax_scores(np.zeros((3, 4)), np.zeros((0, 4))).shape == (3, 0)
    with pytest.raises(ValueError, match="dimension mismatch"):
        bisoftmax_scores(np.zeros((1, 3)), np.zeros((1, 4)))


def test_cem_gate_frozen():
    g = cem_gate(np.array([[0.8, 0.6]]), np.array([[1.0, 0.0]]), 0.5)
    assert g.dtype == bool and bool(g[0, 0])
    g = cem_gate(np.array([[0.8, 0.6]]), np.array([[1.0, 0.0]]), 0.9)
    assert not bool(g[0, 0])


def test_cem_gate_is_scale_invariant():
    a = cem_gate(np.array([[0.8, 0.6]]), np.array([[2.0, 0.0]]), 0.5)
    b = cem_gate(np.array([[8.0, 6.0]]), np.array([[0.5, 0.0]]), 0.5)
    assert bool(a[0, 0]) and bool(b[0, 0])


def test_cem_gate_zero_norm_closes_and_counts():
    diag = Diagnostics()
    g = cem_gate(np.zeros((2, 3)), np.ones((1, 3)), 0.1, diag)
    assert not g.any()
    assert diag.zero_norm_cls_emb == 2
    diag2 = Diagnostics()
    cem_gate(np.zeros((1, 2)), np.zeros((1, 2)), 0.5, diag2)
    assert diag2.zero_norm_cls_emb == 2  # one per zero vector, either side


def test_cem_gate_nonpositive_threshold_passes_zero_sim():
    g = cem_gate(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), 0.0)
    assert bool(g[0, 0])  # cosine 0 >= 0


def test_update_embedding_frozen():
    track = TrackState(
        track_id=1,
        app_emb_smoothed=np.array([1.0, 0.0]),
        last_frame=0,
        observations=[],
    )
    new = update_embedding(track, det(1, app=(0.0, 1.0)), momentum=0.5)
    assert np.array_equal(new, np.array([0.5, 0.5]))
    keep = update_embedding(track, det(1, app=(0.0, 1.0)), momentum=0.0)
    assert np.array_equal(keep, np.array([1.0, 0.0]))
    jump = update_embedding(track, det(1, app=(0.0, 1.0)), momentum=1.0)
    assert np.array_equal(jump, np.array([0.0, 1.0]))


# ---------------------------------------------------------------------------
# tracker lifecycle


APP_A = tuple(6.0 * v for v in (1.0, 0.0, 0.0))
APP_B = tuple(6.0 * v for v in (0.0, 1.0, 0.0))
CLS_X = (1.0, 0.0)
CLS_Y = (0.0, 1.0)


def test_spawn_requires_objectness():
    tr = Tracker()
    fa = tr.step(0, [det(0, objectness=0.69, app=APP_A, cls=CLS_X)])
    assert fa.new_tracks == ()
    assert tr.tracks == []
    fa = tr.step(1, [det(1, objectness=0.7, app=APP_A, cls=CLS_X)])
    assert fa.new_tracks == ((0, 1),)


def test_ids_monotonic_from_one():
    tr = Tracker()
    tr.step(0, [det(0, app=APP_A, cls=CLS_X, objectness=0.9)])
    tr.step(1, [])
    tr.step(
        2,
        [
            det(2, app=APP_B, cls=CLS_Y, objectness=0.9, box=(20, 20, 5, 5)),
        ],
    )
    assert [t.track_id for t in tr.tracks] == [1, 2]


def test_match_updates_state_and_ema():
    tr = Tracker(TrackerConfig(embedding_momentum=0.5))
    tr.step(0, [det(0, app=(2.0, 0.0), cls=CLS_X, objectness=0.9)])
    fa = tr.step(1, [det(1, app=(0.0, 2.0), cls=CLS_X)])
    # single det vs single track: bi-softmax is exactly 1.0, cem cos 1.0
    assert len(fa.matches) == 1
    i, track_id, score = fa.matches[0]
    assert (i, track_id) == (0, 1)
    assert score == 1.0
    track = tr.tracks[0]
    assert track.status is TrackStatus.ACTIVE
    assert track.last_frame == 1
    assert len(track.observations) == 2
    assert np.array_equal(track.app_emb_smoothed, np.array([1.0, 1.0]))


def test_cem_gate_blocks_cross_class_match():
    tr = Tracker()
    tr.step(0, [det(0, app=APP_A, cls=CLS_X, objectness=0.9)])
    # same appearance, orthogonal class embedding: gate closes, new track
    fa = tr.step(1, [det(1, app=APP_A, cls=CLS_Y, objectness=0.9)])
    assert fa.matches == ()
    assert fa.new_tracks == ((0, 2),)
    assert fa.unmatched_tracks == (1,)


def test_lost_then_dead_counts_real_frames():
    tr = Tracker(TrackerConfig(max_lost_frames=2))
    tr.step(0, [det(0, app=APP_A, cls=CLS_X, objectness=0.9)])
    track = tr.tracks[0]
    tr.step(1, [])
    assert track.status is TrackStatus.LOST
    tr.step(2, [])
    assert track.status is TrackStatus.LOST  # 2 - 0 == max_lost_frames
    tr.step(3, [])
    assert track.status is TrackStatus.DEAD  # 3 - 0 > max_lost_frames


def test_lost_track_is_matchable_through_its_final_frame():
    tr = Tracker(TrackerConfig(max_lost_frames=2))
    tr.step(0, [det(0, app=APP_A, cls=CLS_X, objectness=0.9)])
    tr.step(1, [])
    tr.step(2, [])
    # frame 3 would kill it, but death is decided after matching
    fa = tr.step(3, [det(3, app=APP_A, cls=CLS_X)])
    assert len(fa.matches) == 1
    assert tr.tracks[0].status is TrackStatus.ACTIVE
    assert tr.tracks[0].last_frame == 3


def test_dead_track_is_never_matched_again():
    tr = Tracker(TrackerConfig(max_lost_frames=1))
    tr.step(0, [det(0, app=APP_A, cls=CLS_X, objectness=0.9)])
    tr.step(1, [])
    tr.step(2, [])
    assert tr.tracks[0].status is TrackStatus.DEAD
    fa = tr.step(3, [det(3, app=APP_A, cls=CLS_X, objectness=0.9)])
    assert fa.matches == ()
    assert fa.new_tracks == ((0, 2),)


def test_reid_restores_active_status():
    tr = Tracker(TrackerConfig(max_lost_frames=5))
    tr.step(0, [det(0, app=APP_A, cls=CLS_X, objectness=0.9)])
    tr.step(1, [])
    assert tr.tracks[0].status is TrackStatus.LOST
    fa = tr.step(2, [det(2, app=APP_A, cls=CLS_X)])
    assert len(fa.matches) == 1
    assert tr.tracks[0].status is TrackStatus.ACTIVE
    assert len(tr.tracks) == 1


def test_two_object_association_by_appearance():
    tr = Tracker()
    tr.step(
        0,
        [
            det(0, app=APP_A, cls=CLS_X, objectness=0.9, box=(0, 0, 5, 5)),
            det(0, app=APP_B, cls=CLS_X, objectness=0.9, box=(20, 0, 5, 5)),
        ],
    )
    # swap the detection order; identity must follow the embeddings
    fa = tr.step(
        1,
        [
            det(1, app=APP_B, cls=CLS_X, box=(21, 0, 5, 5)),
            det(1, app=APP_A, cls=CLS_X, box=(1, 0, 5, 5)),
        ],
    )
    assert sorted((i, tid) for i, tid, _ in fa.matches) == [(0, 2), (1, 1)]


def test_step_rejects_out_of_order_and_mislabeled_frames():
    tr = Tracker()
    tr.step(3, [])
    with pytest.raises(ValueError, match="out-of-order"):
        tr.step(3, [])
    with pytest.raises(ValueError, match="carries frame_index"):
        tr.step(4, [det(7)])


def test_match_score_meets_threshold():
    rng = np.random.default_rng(0)
    tr = Tracker()
    for frame in range(8):
        dets = [
            det(
                frame,
                app=tuple(6.0 * unit(*rng.normal(size=4))),
                cls=CLS_X,
                objectness=0.9,
                box=(rng.uniform(0, 50), 0, 5, 5),
            )
            for _ in range(int(rng.integers(0, 4)))
        ]
        fa = tr.step(frame, dets)
        for _, _, score in fa.matches:
            assert score >= tr.cfg.match_threshold
        det_idx = [i for i, _, _ in fa.matches] + [i for i, _ in fa.new_tracks]
        assert len(det_idx) == len(set(det_idx))


def test_voting_with_bank():
    bank = two_split_bank()
    tr = Tracker(bank=bank)
    tr.step(0, [det(0, app=APP_A, cls=(0.9, 0.1), objectness=0.9)])
    tr.step(1, [det(1, app=APP_A, cls=(0.8, 0.2))])
    # cosine vs the previous observation is ~0.78, so the class gate stays
    # open, but the nearest prototype flips to category 2
    tr.step(2, [det(2, app=APP_A, cls=(0.6, 0.8))])
    assert len(tr.tracks) == 1
    track = tr.tracks[0]
    assert track.category_votes == {1: 2, 2: 1}


def test_tracker_without_bank_casts_no_votes():
    tr = Tracker()
    tr.step(0, [det(0, app=APP_A, cls=CLS_X, objectness=0.9)])
    assert tr.tracks[0].category_votes == {}


# ---------------------------------------------------------------------------
# run_sequence


def test_run_sequence_steps_every_frame():
    m = meta(n=6)
    frames = {0: [det(0, app=APP_A, cls=CLS_X, objectness=0.9)]}
    tracks = run_sequence(m, frames, TrackerConfig(max_lost_frames=2))
    assert len(tracks) == 1
    # frames 1..5 were stepped with no detections: 5 - 0 > 2 means dead
    assert tracks[0].status is TrackStatus.DEAD


def test_run_sequence_accepts_pairs_and_validates_range():
    m = meta(n=4)
    tracks = run_sequence(m, [(1, [det(1, app=APP_A, cls=CLS_X, objectness=0.9)])])
    assert len(tracks) == 1
    with pytest.raises(ValueError, match="out of range"):
        run_sequence(m, {4: []})


def test_run_sequence_returns_dead_and_alive():
    m = meta(n=10)
    frames = {
        0: [det(0, app=APP_A, cls=CLS_X, objectness=0.9)],
        9: [det(9, app=APP_B, cls=CLS_Y, objectness=0.9)],
    }
    tracks = run_sequence(m, frames, TrackerConfig(max_lost_frames=3))
    assert len(tracks) == 2
    assert tracks[0].status is TrackStatus.DEAD
    assert tracks[1].status is TrackStatus.ACTIVE


def test_tracker_is_deterministic():
    rng = np.random.default_rng(17)
    frames = {}
    for f in range(10):
        frames[f] = [
            det(
                f,
                app=tuple(6.0 * unit(*rng.normal(size=6))),
                cls=tuple(unit(*rng.normal(size=4))),
                objectness=float(rng.uniform(0.5, 1.0)),
                box=(float(rng.uniform(0, 50)), 0, 5, 5),
            )
            for _ in range(int(rng.integers(0, 5)))
        ]
    m = meta(n=10)

    def snapshot():
        out = []
        for t in run_sequence(m, frames):
            out.append(
                (
                    t.track_id,
                    t.status,
                    t.last_frame,
                    tuple(f for f, _ in t.observations),
                    t.app_emb_smoothed.tobytes(),
                )
            )
        return out

    assert snapshot() == snapshot()
