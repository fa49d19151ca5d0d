"""Sequence splitting, bounce detection and frame-to-segment assignment.

A *part* is a maximal run of present frames whose motion keeps one
direction component at constant polarity, so the object never crosses
its own path and the DP grid search applies. Bounces split a part's
discrete path into *segments*; frames attach to the segment both their
endpoints are closest to, and frames straddling a bounce stay
unassigned (they are bridged by linear pieces later).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import EmptyInputError
from .types import BounceParams, DiscretePath, FrameCurve, Point, _frozen_array


class BounceOrigin(str, Enum):
    WITHIN_PART = "within_part"
    BETWEEN_PARTS = "between_parts"


@dataclass(frozen=True)
class Part:
    """A non-intersecting run of frames and its extracted discrete path."""

    frame_range: tuple[int, int]
    path: DiscretePath


@dataclass(frozen=True)
class Bounce:
    position: Point
    time_hint: float | None = None
    origin: BounceOrigin = BounceOrigin.WITHIN_PART

    def __post_init__(self):
        object.__setattr__(self, "position",
                           (float(self.position[0]), float(self.position[1])))


@dataclass(frozen=True)
class Segment:
    """One bounce-free piece of a part's path plus the frames that fully
    belong to it."""

    frame_list: tuple[int, ...]
    boundary: tuple[Point, Point]
    polyline: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "frame_list", tuple(int(t) for t in self.frame_list))
        if self.polyline is None:
            poly = np.array([self.boundary[0], self.boundary[1]], dtype=float)
        else:
            poly = np.asarray(self.polyline, dtype=float)
        _frozen_array(self, "polyline", poly)


def _sign(v: float) -> int:
    if v > 0:
        return 1
    if v < 0:
        return -1
    return 0


def split_nonintersecting(frames: list[FrameCurve]) -> list[tuple[int, int]]:
    """Maximal runs of present frames where sign(dx) or sign(dy) stays
    constant across consecutive start points (zero steps are neutral).

    Absent frames never terminate a run; deltas are taken between
    consecutive *present* frames.
    """
    present = [f for f in frames if f.present]
    if not present:
        raise EmptyInputError("no present frames to split")
    runs = []
    run_start = 0
    seen_x, seen_y = set(), set()
    for j in range(1, len(present)):
        dx = present[j].start[0] - present[j - 1].start[0]
        dy = present[j].start[1] - present[j - 1].start[1]
        nx = seen_x | ({_sign(dx)} if dx else set())
        ny = seen_y | ({_sign(dy)} if dy else set())
        if len(nx) > 1 and len(ny) > 1:
            runs.append((present[run_start].frame_index, present[j - 1].frame_index))
            run_start = j
            seen_x, seen_y = set(), set()
        else:
            seen_x, seen_y = nx, ny
    runs.append((present[run_start].frame_index, present[-1].frame_index))
    return runs


def _unit_steps(points: np.ndarray) -> np.ndarray:
    steps = np.diff(points, axis=0)
    norms = np.linalg.norm(steps, axis=1, keepdims=True)
    return steps / np.maximum(norms, 1e-300)


def _angle_deg(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Angle between direction vectors; near-zero means read as a full
    reversal (they only cancel when the window doubles back on itself)."""
    nu = np.linalg.norm(u, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    dot = np.sum(u * v, axis=-1)
    cross = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    ang = np.degrees(np.arctan2(np.abs(cross), dot))
    return np.where((nu < 1e-12) | (nv < 1e-12), 180.0, ang)


def direction_change_profile(points: np.ndarray, window: int):
    """Per-index angle between the mean step directions of the ``window``
    steps before and after each interior point.

    Returns (indices, angles_deg); empty when the polyline is shorter
    than 2 * window + 1 points.
    """
    n = len(points)
    if n < 2 * window + 1:
        return np.array([], dtype=int), np.array([])
    units = _unit_steps(points)
    cum = np.vstack([np.zeros(2), np.cumsum(units, axis=0)])
    idx = np.arange(window, n - window)
    before = (cum[idx] - cum[idx - window]) / window
    after = (cum[idx + window] - cum[idx]) / window
    return idx, _angle_deg(before, after)


def detect_bounces(path: DiscretePath, params: BounceParams) -> list[Bounce]:
    """Find abrupt direction changes on the discrete path.

    A point is a bounce when the mean directions of the ``window_px``
    steps on either side differ by more than the threshold and the angle
    is a local maximum within a window (non-maximum suppression). When
    no sharp peak exists but the direction still sweeps past the
    threshold from one end of the path to the other (e.g. circular
    motion), the maximum-curvature point is returned as the single split
    point.
    """
    pts = path.points_time_order()
    w = params.window_px
    idx, angles = direction_change_profile(pts, w)
    if len(idx) == 0:
        return []
    keep = []
    for k in range(len(idx)):
        if angles[k] <= params.angle_threshold_deg:
            continue
        lo, hi = max(0, k - w), min(len(idx), k + w + 1)
        window = angles[lo:hi]
        if angles[k] >= window.max() and k - lo == int(np.argmax(window)):
            keep.append(k)
    if not keep:
        units = _unit_steps(pts)
        total = float(_angle_deg(units[:w].mean(axis=0), units[-w:].mean(axis=0)))
        if total > params.angle_threshold_deg:
            keep = [int(np.argmax(angles))]
    return [Bounce(position=tuple(pts[idx[k]])) for k in keep]


def point_to_polyline_distance(point, polyline: np.ndarray) -> float:
    """Euclidean distance from a point to a polyline (single points allowed)."""
    p = np.asarray(point, dtype=float)
    poly = np.asarray(polyline, dtype=float)
    if len(poly) == 1:
        return float(np.linalg.norm(p - poly[0]))
    a = poly[:-1]
    ab = poly[1:] - a
    denom = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
    t = np.clip(np.sum((p - a) * ab, axis=1) / denom, 0.0, 1.0)
    closest = a + t[:, None] * ab
    return float(np.min(np.linalg.norm(p - closest, axis=1)))


def nearest_path_index(points: np.ndarray, position) -> int:
    d = np.linalg.norm(points - np.asarray(position, dtype=float), axis=1)
    return int(np.argmin(d))


def split_at_indices(points: np.ndarray, cut_indices) -> list[np.ndarray]:
    """Split a polyline at interior indices; neighbours share the cut point."""
    n = len(points)
    cuts = sorted({i for i in cut_indices if 0 < i < n - 1})
    bounds = [0] + cuts + [n - 1]
    return [points[a:b + 1] for a, b in zip(bounds, bounds[1:])]


def assign_frames_to_pieces(frames: list[FrameCurve], pieces) -> list[list[int]]:
    """Attach each present frame to the piece both endpoints are nearest
    to; frames whose endpoints disagree (they straddle a bounce) go
    nowhere."""
    lists = [[] for _ in pieces]
    for f in frames:
        if not f.present:
            continue
        d_start = [point_to_polyline_distance(f.start, piece) for piece in pieces]
        d_end = [point_to_polyline_distance(f.end, piece) for piece in pieces]
        k_start = int(np.argmin(d_start))
        k_end = int(np.argmin(d_end))
        if k_start == k_end:
            lists[k_start].append(f.frame_index)
    return lists


def assign_frames(frames: list[FrameCurve], bounces: list[Bounce],
                  parts: list[Part]) -> list[Segment]:
    """Cut each part's path at its bounces and distribute frames.

    ``bounces`` are matched to parts by proximity to the part's path;
    they must be ordered along the paths.
    """
    segments = []
    for part in parts:
        t_a, t_b = part.frame_range
        part_frames = [f for f in frames
                       if f.present and t_a <= f.frame_index <= t_b]
        pts = part.path.points_time_order()
        cut = []
        for b in bounces:
            if b.origin is not BounceOrigin.WITHIN_PART:
                continue
            if point_to_polyline_distance(b.position, pts) <= 1.0:
                cut.append(nearest_path_index(pts, b.position))
        pieces = split_at_indices(pts, cut)
        frame_lists = assign_frames_to_pieces(part_frames, pieces)
        for piece, flist in zip(pieces, frame_lists):
            segments.append(Segment(frame_list=tuple(flist),
                                    boundary=(tuple(piece[0]), tuple(piece[-1])),
                                    polyline=piece))
    return segments
