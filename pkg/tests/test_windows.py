import numpy as np
import pytest

from conftest import heartbeat_frames
from goosewatch import windows as win
from oracles import brute_bucket, brute_dts_jitter

MAC_A = bytes.fromhex("0030a7000001")
MAC_B = bytes.fromhex("0030a7000002")


def test_tumbling_example_with_cross_window_dt():
    frames = heartbeat_frames("G1", MAC_A, [0.0, 1.0, 2.0, 3.9])
    out = win.build_windows(frames, t_w=1.0, stride=1.0)
    assert [w.pkt_count for w in out] == [1, 1, 1, 1]
    assert [w.t_start for w in out] == [0.0, 1.0, 2.0, 3.0]
    dts = [list(np.round(w.dt_series, 9)) for w in out]
    assert dts == [[], [1.0], [1.0], [1.9]]


def test_flows_never_mix():
    fa = heartbeat_frames("G1", MAC_A, [0.0, 0.4, 0.9])
    fb = heartbeat_frames("G2", MAC_B, [0.1, 0.5])
    mixed = sorted(fa + fb, key=lambda f: f.ts)
    out = win.build_windows(mixed, t_w=1.0, stride=1.0)
    keys = {w.key.goose_id for w in out}
    assert keys == {"G1", "G2"}
    for w in out:
        assert all(win.flow_key(f) == w.key for f in w.frames)


def test_same_goid_different_mac_are_distinct_flows():
    fa = heartbeat_frames("G1", MAC_A, [0.0])
    fb = heartbeat_frames("G1", MAC_B, [0.2])
    out = win.build_windows(fa + fb, t_w=1.0, stride=1.0)
    assert len({w.key for w in out}) == 2


def test_goid_fallback_to_gocb_ref():
    frames = heartbeat_frames("", MAC_A, [0.0, 1.0])
    out = win.build_windows(frames, t_w=1.0, stride=1.0)
    assert out[0].key.goose_id == "/LLN0$GO$gcb"


def test_interior_empty_windows_emitted():
    frames = heartbeat_frames("G1", MAC_A, [0.0, 5.0])
    out = win.build_windows(frames, t_w=1.0, stride=1.0)
    starts = [w.t_start for w in out]
    counts = [w.pkt_count for w in out]
    assert starts == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    assert counts == [1, 0, 0, 0, 0, 1]
    # the window after the gap sees the cross-gap inter-arrival
    assert list(out[-1].dt_series) == [5.0]


def test_no_leading_or_trailing_empties():
    frames = heartbeat_frames("G1", MAC_A, [10.2, 10.4])
    out = win.build_windows(frames, t_w=0.1, stride=0.1)
    assert out[0].pkt_count == 1
    assert out[-1].pkt_count == 1


def test_bucketing_matches_brute_force_oracle(rng):
    for trial in range(30):
        t_w = float(rng.choice([0.1, 0.5, 1.0, 3.0]))
        stride = t_w if trial % 2 == 0 else t_w / 2
        n = int(rng.integers(1, 60))
        ts = sorted(round(float(t), 6) for t in rng.uniform(0, 20, n))
        frames = heartbeat_frames("G1", MAC_A, ts)
        got = win.build_windows(frames, t_w=t_w, stride=stride)
        expected = brute_bucket(ts, t_w, stride)
        assert [w.t_start for w in got] == pytest.approx([s for s, _ in expected])
        assert [[f.ts for f in w.frames] for w in got] == [
            [ts[i] for i in idx] for _, idx in expected
        ]


def test_union_at_tumbling_stride_is_lossless(rng):
    ts = sorted(round(float(t), 6) for t in rng.uniform(0, 30, 200))
    frames = heartbeat_frames("G1", MAC_A, ts)
    out = win.build_windows(frames, t_w=0.5, stride=0.5)
    union = [f.ts for w in out for f in w.frames]
    assert sorted(union) == ts
    assert len(union) == len(ts)


def test_jitter_series_matches_brute_force(rng):
    ts = sorted(round(float(t), 6) for t in rng.uniform(0, 10, 80))
    frames = heartbeat_frames("G1", MAC_A, ts)
    out = win.build_windows(frames, t_w=1.0, stride=1.0)
    _, expected_jit = brute_dts_jitter(ts)
    got = [v for w in out for v in w.jitter_series]
    assert got == pytest.approx(expected_jit, abs=1e-12)


def test_identical_dt_flow_has_zero_jitter():
    frames = heartbeat_frames("G1", MAC_A, [i * 0.25 for i in range(40)])
    out = win.build_windows(frames, t_w=1.0, stride=1.0)
    for w in out:
        assert np.allclose(w.jitter_series, 0.0, atol=1e-12)


class TestLabeling:
    def test_frame_intersection(self):
        frames = heartbeat_frames("G1", MAC_A, [1.6, 2.5])
        out = win.build_windows(frames, t_w=1.0, stride=1.0)
        win.label_windows(out, [(1.5, 3.0, "DM")])
        assert [w.label for w in out] == ["DM", "DM"]

    def test_no_intersection_is_normal(self):
        frames = heartbeat_frames("G1", MAC_A, [0.0, 0.5])
        out = win.build_windows(frames, t_w=1.0, stride=1.0)
        win.label_windows(out, [(2.0, 3.0, "DoS")])
        assert [w.label for w in out] == ["normal"]

    def test_empty_gap_window_inside_interval_labeled(self):
        frames = heartbeat_frames("G1", MAC_A, [0.0, 5.0])
        out = win.build_windows(frames, t_w=1.0, stride=1.0)
        win.label_windows(out, [(1.0, 4.0, "MS")])
        by_start = {w.t_start: w.label for w in out}
        assert by_start[1.0] == "MS"
        assert by_start[3.0] == "MS"
        # empty window overlapping only by span still counts
        assert by_start[2.0] == "MS"
        assert by_start[0.0] == "normal"
        assert by_start[5.0] == "normal"

    def test_non_empty_window_needs_frame_hit(self):
        # span intersects the interval but the frame sits outside it
        frames = heartbeat_frames("G1", MAC_A, [1.1, 2.1])
        out = win.build_windows(frames, t_w=1.0, stride=1.0)
        win.label_windows(out, [(1.5, 2.0, "DM")])
        assert [w.label for w in out] == ["normal", "normal"]

    def test_overlapping_same_kind_rejected(self):
        frames = heartbeat_frames("G1", MAC_A, [0.0])
        out = win.build_windows(frames, t_w=1.0, stride=1.0)
        with pytest.raises(win.OverlappingIntervals):
            win.label_windows(out, [(0.0, 2.0, "MS"), (1.0, 3.0, "MS")])

    def test_intervals_csv_roundtrip(self, tmp_path):
        intervals = [(1.5, 3.0, "MS"), (10.0, 12.5, "DoS")]
        path = tmp_path / "labels.csv"
        win.save_intervals(intervals, path, ["# test"])
        assert win.load_intervals(path) == intervals
