import numpy as np
import pytest

from fmotraj.errors import EmptyInputError
from fmotraj.segmentation import (Bounce, BounceOrigin, Part, Segment,
                                  assign_frames, detect_bounces,
                                  point_to_polyline_distance,
                                  split_nonintersecting)
from fmotraj.types import BounceParams, DiscretePath, FrameCurve


def curve(t, x, y, dx=1.0, dy=0.0):
    return FrameCurve(t, (x, y), (x + dx, y + dy))


def absent(t):
    return FrameCurve(t, present=False)


class TestSplitNonintersecting:
    def test_monotone_motion_is_one_part(self):
        frames = [curve(t, 3.0 * t, 5.0) for t in range(1, 11)]
        assert split_nonintersecting(frames) == [(1, 10)]

    def test_or_rule_over_axes(self):
        # x reverses at frame 5 but y keeps going down: still one part
        xs = [0, 4, 8, 12, 9, 6, 3, 0]
        frames = [curve(t + 1, xs[t], 2.0 * t) for t in range(8)]
        assert split_nonintersecting(frames) == [(1, 8)]

    def test_ping_pong_splits_when_both_axes_flip(self):
        xs1 = [0, 4, 8, 12, 9, 6, 3, 0]
        ys1 = [0, 2, 4, 6, 8, 10, 12, 14]
        xs2 = [2, 4, 6, 8, 6, 4, 2, 0]
        ys2 = [12, 10, 8, 6, 4, 2, 0, -2]
        frames = [curve(t + 1, xs1[t], ys1[t]) for t in range(8)]
        frames += [curve(t + 9, xs2[t], ys2[t]) for t in range(8)]
        assert split_nonintersecting(frames) == [(1, 8), (9, 16)]

    def test_absent_frames_do_not_terminate_runs(self):
        frames = [curve(1, 0, 0), curve(2, 5, 0), absent(3), curve(4, 15, 0)]
        assert split_nonintersecting(frames) == [(1, 4)]

    def test_no_present_frames_is_an_error(self):
        with pytest.raises(EmptyInputError):
            split_nonintersecting([absent(1), absent(2)])

    def test_partition_of_present_frames(self):
        rng = np.random.default_rng(20)
        pos = np.cumsum(rng.normal(0, 4, size=(30, 2)), axis=0)
        frames = [curve(t + 1, pos[t, 0], pos[t, 1]) for t in range(30)]
        runs = split_nonintersecting(frames)
        covered = []
        for a, b in runs:
            assert a <= b
            covered.extend(range(a, b + 1))
        assert covered == sorted(covered)
        assert covered[0] == 1 and covered[-1] == 30
        assert len(covered) == len(set(covered))


def v_path(half=10):
    rows = [abs(x - half) for x in range(2 * half + 1)]
    return DiscretePath(0, 2 * half, tuple(rows))


class TestDetectBounces:
    def test_straight_line_has_no_bounces(self):
        path = DiscretePath(0, 20, tuple(range(21)))
        assert detect_bounces(path, BounceParams()) == []

    def test_v_shape_has_one_bounce_at_apex(self):
        bounces = detect_bounces(v_path(), BounceParams(window_px=5,
                                                        angle_threshold_deg=30.0))
        assert len(bounces) == 1
        bx, by = bounces[0].position
        assert abs(bx - 10.0) <= 1.0 and abs(by - 0.0) <= 1.0

    def test_gentle_parabola_has_no_bounces(self):
        xs = np.arange(51)
        rows = np.round(0.002 * xs**2).astype(int)
        path = DiscretePath(0, 50, tuple(rows))
        assert detect_bounces(path, BounceParams(window_px=5,
                                                 angle_threshold_deg=30.0)) == []

    def test_short_paths_yield_nothing(self):
        path = DiscretePath(0, 5, (0, 1, 0, 1, 0, 1))
        assert detect_bounces(path, BounceParams(window_px=5)) == []

    def test_reversal_invariance(self):
        path = v_path(12)
        reversed_path = DiscretePath(0, 24, tuple(reversed(path.rows)))
        params = BounceParams()
        fwd = {b.position for b in detect_bounces(path, params)}
        bwd = {b.position for b in detect_bounces(reversed_path, params)}
        assert fwd == bwd and len(fwd) == 1

    def test_smooth_sweep_past_threshold_splits_once(self):
        # quarter-circle-ish arc: no sharp peak, but the direction sweeps
        # ~63 degrees end to end, so one split point is returned
        xs = np.arange(41)
        rows = np.round(0.025 * xs**2).astype(int)
        path = DiscretePath(0, 40, tuple(rows))
        bounces = detect_bounces(path, BounceParams(window_px=5,
                                                    angle_threshold_deg=30.0))
        assert len(bounces) == 1


def v_point(s, half=10.0):
    """Point at arc length s along the V path (apex at (half, 0))."""
    leg = half * np.sqrt(2.0)
    if s <= leg:
        d = s / np.sqrt(2.0)
        return (d, half - d)
    d = (s - leg) / np.sqrt(2.0)
    return (half + d, d)


class TestAssignFrames:
    def test_single_part_no_bounce(self):
        frames = [curve(t, 2.0 * t, 1.0) for t in range(1, 8)]
        path = DiscretePath(2, 14, (1,) * 13)
        parts = [Part((1, 7), path)]
        segments = assign_frames(frames, [], parts)
        assert len(segments) == 1
        assert segments[0].frame_list == tuple(range(1, 8))

    def test_bounce_straddling_frame_is_unassigned(self):
        step, eps = 2.2, 0.9
        frames = []
        for t in range(1, 13):
            s0 = (t - 1) * step
            frames.append(FrameCurve(t, v_point(s0), v_point(s0 + eps * step)))
        parts = [Part((1, 12), v_path(10))]
        bounce = Bounce(position=(10.0, 0.0))
        segments = assign_frames(frames, [bounce], parts)
        assert len(segments) == 2
        assert segments[0].frame_list == (1, 2, 3, 4, 5, 6)
        assert segments[1].frame_list == (8, 9, 10, 11, 12)

    def test_absent_frames_assigned_nowhere(self):
        # the delta across the gap flips both polarities, so the sequence
        # splits into two parts and the absent frames belong to neither
        frames = [curve(t, 4.0 * t, 1.0 * t, dx=2.0, dy=0.5) for t in (1, 2, 3)]
        frames += [absent(4), absent(5)]
        frames += [curve(t, 22.0 - 2.0 * t, 8.0 - 1.0 * t, dx=-1.0, dy=-0.25)
                   for t in (6, 7, 8)]
        ranges = split_nonintersecting(frames)
        assert ranges == [(1, 3), (6, 8)]
        paths = [DiscretePath(4, 14, (1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4)),
                 DiscretePath(5, 10, (0, 0, 1, 1, 2, 2), flipped=True)]
        parts = [Part(r, p) for r, p in zip(ranges, paths)]
        segments = assign_frames(frames, [], parts)
        assert [s.frame_list for s in segments] == [(1, 2, 3), (6, 7, 8)]

    def test_every_present_frame_in_at_most_one_segment(self):
        step, eps = 2.2, 0.9
        frames = []
        for t in range(1, 13):
            s0 = (t - 1) * step
            frames.append(FrameCurve(t, v_point(s0), v_point(s0 + eps * step)))
        parts = [Part((1, 12), v_path(10))]
        segments = assign_frames(frames, [Bounce(position=(10.0, 0.0))], parts)
        seen = [t for s in segments for t in s.frame_list]
        assert len(seen) == len(set(seen))
        assert set(seen) | {7} == set(range(1, 13))


def test_point_to_polyline_distance():
    poly = np.array([[0.0, 0.0], [10.0, 0.0]])
    assert point_to_polyline_distance((5.0, 3.0), poly) == pytest.approx(3.0)
    assert point_to_polyline_distance((-4.0, 3.0), poly) == pytest.approx(5.0)
    assert point_to_polyline_distance((2.0, 0.0), np.array([[1.0, 1.0]])) \
        == pytest.approx(np.sqrt(2.0))
