"""Exposure estimation and constrained polynomial fitting of segments.

Each segment's polynomial minimizes the squared distance to the causal
per-frame endpoints (frame t contributes its start at time t - 1 and its
end at t - 1 + exposure) subject to exact interpolation of the two
anchor points, which is what chains segments into a C0-continuous
trajectory. The x and y axes decouple and share one KKT factorization.

Fits run in a local variable u = (t - center) / scale in [-1, 1]; a
degree-6 Vandermonde system in raw frame indices would be numerically
useless for longer sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ExposureUndefinedError
from .segmentation import Bounce, Segment
from .types import FrameCurve, Point, SegmentKind, SegmentPoly, frame_time

MAX_DEGREE = 6
_MIN_EXPOSURE = 1e-6


def estimate_exposure(frames: list[FrameCurve]) -> float:
    """Mean ratio of in-frame streak length to the displacement between
    consecutive frame start points, clamped into (0, 1].

    Only pairs of consecutive present frames count; pairs whose start
    points (nearly) coincide are skipped.
    """
    by_index = {f.frame_index: f for f in frames if f.present}
    ratios = []
    for t, f in by_index.items():
        nxt = by_index.get(t + 1)
        if nxt is None:
            continue
        streak = math.hypot(f.end[0] - f.start[0], f.end[1] - f.start[1])
        gap = math.hypot(nxt.start[0] - f.start[0], nxt.start[1] - f.start[1])
        if gap < 1e-9:
            continue
        ratios.append(streak / gap)
    if not ratios:
        raise ExposureUndefinedError(
            "no consecutive present frame pair with distinct start points")
    return float(np.clip(np.mean(ratios), _MIN_EXPOSURE, 1.0))


def segment_degree(n_frames_in_segment: int) -> int:
    """Polynomial degree for a segment spanning n frames: min(6, ceil(n/3))."""
    if n_frames_in_segment <= 0:
        raise ValueError("segment must span at least one frame")
    return max(1, min(MAX_DEGREE, math.ceil(n_frames_in_segment / 3)))


@dataclass(frozen=True)
class FitProblem:
    """Everything one segment fit needs: the member frames' curves, the
    target degree, the sequence exposure and the two anchor points."""

    segment: Segment
    curves: tuple[FrameCurve, ...]
    degree: int
    exposure: float
    anchor_start: Point
    anchor_end: Point

    @property
    def t_start(self) -> float:
        return frame_time(min(f.frame_index for f in self.curves))

    @property
    def t_end(self) -> float:
        return frame_time(max(f.frame_index for f in self.curves)) + self.exposure


def _line_through(t0: float, t1: float, p0, p1, kind: SegmentKind,
                  degenerate: bool = False) -> SegmentPoly:
    """Degree-1 piece hitting p0 at t0 and p1 at t1 (u = -1 and +1)."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    coeffs = np.column_stack([(p0 + p1) / 2.0, (p1 - p0) / 2.0])
    return SegmentPoly(t_start=t0, t_end=t1, degree=1, coeffs=coeffs,
                       kind=kind, center=(t0 + t1) / 2.0, scale=(t1 - t0) / 2.0,
                       degenerate=degenerate)


def fit_segment(problem: FitProblem) -> SegmentPoly:
    """Solve the anchored least-squares fit for one segment.

    The requested degree is reduced when the distinct sample times
    cannot pin down that many coefficients (dropout-heavy segments), and
    a singular system falls back to the line through the anchors,
    flagged ``degenerate``.
    """
    if not problem.curves:
        raise ValueError("segment has no frames to fit")
    eps = problem.exposure
    t0, t1 = problem.t_start, problem.t_end
    center, scale = (t0 + t1) / 2.0, max((t1 - t0) / 2.0, 1e-9)

    times, targets = [], []
    for f in problem.curves:
        tau = frame_time(f.frame_index)
        times.extend([tau, tau + eps])
        targets.extend([f.start, f.end])
    times = np.asarray(times)
    targets = np.asarray(targets, dtype=float)

    # Degree the data can support: a degree-d fit with two interpolation
    # constraints is unique iff d <= (distinct non-anchor sample times) + 1.
    interior = times[(np.abs(times - t0) > 1e-9) & (np.abs(times - t1) > 1e-9)]
    distinct = len(np.unique(np.round(interior / 1e-9))) if len(interior) else 0
    degree = max(1, min(problem.degree, distinct + 1))

    u = (times - center) / scale
    A = np.vander(u, degree + 1, increasing=True)
    B = np.vander((np.array([t0, t1]) - center) / scale, degree + 1, increasing=True)
    g = np.array([problem.anchor_start, problem.anchor_end], dtype=float)

    n = degree + 1
    kkt = np.zeros((n + 2, n + 2))
    kkt[:n, :n] = 2.0 * A.T @ A
    kkt[:n, n:] = B.T
    kkt[n:, :n] = B
    rhs = np.zeros((n + 2, 2))
    rhs[:n] = 2.0 * A.T @ targets
    rhs[n:] = g
    try:
        sol = np.linalg.solve(kkt, rhs)
        sol += np.linalg.solve(kkt, rhs - kkt @ sol)  # one refinement step
    except np.linalg.LinAlgError:
        sol = None
    if sol is not None and np.all(np.isfinite(sol)):
        coeffs = sol[:n].T  # (2, degree + 1)
        if np.max(np.abs(B @ coeffs.T - g)) <= 1e-6:
            return SegmentPoly(t_start=t0, t_end=t1, degree=degree, coeffs=coeffs,
                               kind=SegmentKind.FITTED, center=center, scale=scale)
    return _line_through(t0, t1, problem.anchor_start, problem.anchor_end,
                         SegmentKind.FITTED, degenerate=True)


def linear_chain(points, t_range, kinds) -> list[SegmentPoly]:
    """Piecewise-linear pieces through ``points`` over ``t_range``, with
    interior times placed proportionally to arc length.

    ``kinds`` is either one SegmentKind for the whole chain or one per
    piece. Coincident consecutive points are merged.
    """
    t0, t1 = float(t_range[0]), float(t_range[1])
    if not t1 > t0:
        raise ValueError("t_range must be non-degenerate")
    pts = [np.asarray(p, dtype=float) for p in points]
    if len(pts) < 2:
        raise ValueError("chain needs at least two points")
    if not isinstance(kinds, (list, tuple)):
        kinds = [kinds] * (len(pts) - 1)
    kept, kept_kinds = [pts[0]], []
    for p, kind in zip(pts[1:], kinds):
        if np.linalg.norm(p - kept[-1]) < 1e-12:
            continue
        kept.append(p)
        kept_kinds.append(kind)
    if len(kept) == 1:  # fully stationary chain
        kept.append(kept[0])
        kept_kinds.append(kinds[0])
    lengths = np.array([np.linalg.norm(b - a) for a, b in zip(kept, kept[1:])])
    total = float(lengths.sum())
    if total < 1e-12:
        fractions = np.linspace(0.0, 1.0, len(kept))
    else:
        fractions = np.concatenate([[0.0], np.cumsum(lengths) / total])
        fractions[-1] = 1.0
    breaks = t0 + (t1 - t0) * fractions
    pieces = []
    for a, b, ta, tb, kind in zip(kept, kept[1:], breaks, breaks[1:], kept_kinds):
        if tb - ta < 1e-12:
            continue
        pieces.append(_line_through(float(ta), float(tb), a, b, kind))
    if not pieces:  # all arc length collapsed; bridge directly
        pieces = [_line_through(t0, t1, kept[0], kept[-1], kept_kinds[0])]
    return pieces


def interpolate_bounce_frame(prev_segment_end: Point, bounce: Bounce,
                             next_segment_start: Point, t_range) -> list[SegmentPoly]:
    """Two linear pieces joining at the bounce point, timed by arc length.

    The same construction bridges gaps between non-intersecting parts,
    with the intersection point of the neighbouring segments in place of
    the bounce."""
    return linear_chain([prev_segment_end, bounce.position, next_segment_start],
                        t_range, SegmentKind.BOUNCE_LINEAR)


def extrapolate_ends(pieces: list[SegmentPoly], n_frames: int) -> list[SegmentPoly]:
    """Head/tail pieces extending the closest fitted polynomial so the
    trajectory covers [0, n_frames]. Returns only the added pieces."""
    if not pieces:
        raise ValueError("need at least one piece to extrapolate from")
    out = []
    first, last = pieces[0], pieces[-1]
    if first.t_start > 1e-9:
        out.append(SegmentPoly(t_start=0.0, t_end=first.t_start, degree=first.degree,
                               coeffs=first.coeffs, kind=SegmentKind.EXTRAPOLATED,
                               center=first.center, scale=first.scale))
    if last.t_end < n_frames - 1e-9:
        out.append(SegmentPoly(t_start=last.t_end, t_end=float(n_frames),
                               degree=last.degree, coeffs=last.coeffs,
                               kind=SegmentKind.EXTRAPOLATED,
                               center=last.center, scale=last.scale))
    return out
