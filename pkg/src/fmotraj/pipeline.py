"""End-to-end trajectory reconstruction.

Per non-intersecting part: accumulate kernels, extract the discrete path
(best of both grid orientations), detect bounces and attach frames to
bounce-free path pieces. Pieces with frames get anchored polynomial
fits; the spans between fitted segments are bridged by piecewise-linear
pieces through bounce points (within a part) or the intersection of the
adjoining segment tangents (across parts). The head and tail of the
sequence extrapolate the nearest fitted segment, so the result covers
[0, N] without gaps.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import fitting
from .dp import accumulate_kernels, orientation_problems, solve_best_orientation
from .errors import EmptyInputError
from .segmentation import (Bounce, BounceOrigin, Part, Segment,
                           assign_frames_to_pieces, detect_bounces,
                           nearest_path_index, split_at_indices,
                           split_nonintersecting)
from .types import (BounceParams, DpParams, FrameCurve, SegmentKind,
                    SegmentPoly, SequenceBundle, TrajectoryFn, frame_time)

# Bridges shorter than this get carved out of the preceding fitted piece
# so breakpoints stay strictly increasing even at exposure 1.
_MIN_BRIDGE = 1e-3


@dataclass(frozen=True)
class ReconstructionConfig:
    dp: DpParams = DpParams()
    bounce: BounceParams = BounceParams()


@dataclass(frozen=True)
class StitchResult:
    """Trajectory plus the intermediate structure the CLI and plots report."""

    trajectory: TrajectoryFn
    exposure: float
    parts: tuple[Part, ...]
    segments: tuple[Segment, ...]
    bounces: tuple[Bounce, ...]

    @property
    def n_fitted_segments(self) -> int:
        return sum(1 for s in self.trajectory.segments
                   if s.kind is SegmentKind.FITTED)


@dataclass
class _PartAnalysis:
    part: Part
    pieces: list[np.ndarray]
    frame_lists: list[list[int]]
    bounces: list[Bounce]  # bounces[k] separates pieces[k] and pieces[k + 1]


@dataclass
class _FittedPiece:
    poly: SegmentPoly
    first_frame: int
    last_frame: int
    part_index: int
    piece_index: int
    t_end: float = field(init=False)

    def __post_init__(self):
        self.t_end = self.poly.t_end


def _bounce_time_hint(bounce: Bounce, frames: list[FrameCurve], eps: float) -> Bounce:
    """Nearest frame endpoint's time stamp, as a rough bounce time."""
    best, hint = np.inf, None
    pos = np.asarray(bounce.position)
    for f in frames:
        for point, tau in ((f.start, frame_time(f.frame_index)),
                           (f.end, frame_time(f.frame_index) + eps)):
            d = float(np.linalg.norm(pos - np.asarray(point)))
            if d < best:
                best, hint = d, tau
    return dataclasses.replace(bounce, time_hint=hint)


def _analyze_part(bundle: SequenceBundle, frame_range, config, eps) -> _PartAnalysis:
    t_a, t_b = frame_range
    frames = [c for c in bundle.present_curves() if t_a <= c.frame_index <= t_b]
    kernel = accumulate_kernels(bundle.frames, frame_range,
                                grid_size=bundle.image_size)
    colwise, rowwise = orientation_problems(kernel, frames[0].start,
                                            frames[-1].end, config.dp)
    path, _ = solve_best_orientation(colwise, rowwise)
    part = Part((t_a, t_b), path)

    bounces = [_bounce_time_hint(b, frames, eps)
               for b in detect_bounces(path, config.bounce)]
    pts = path.points_time_order()
    cuts, kept = [], []
    for b in bounces:
        i = nearest_path_index(pts, b.position)
        if 0 < i < len(pts) - 1 and i not in cuts:
            cuts.append(i)
            kept.append(b)
    order = np.argsort(cuts) if cuts else []
    cuts = [cuts[i] for i in order]
    kept = [kept[i] for i in order]
    pieces = split_at_indices(pts, cuts)
    frame_lists = assign_frames_to_pieces(frames, pieces)
    return _PartAnalysis(part, pieces, frame_lists, kept)


def _sanitize_frame_lists(analyses: list[_PartAnalysis]) -> None:
    """Frame lists must advance monotonically across pieces; a frame
    claimed out of order (noise artifact) is dropped to the bridge."""
    last_seen = 0
    for pa in analyses:
        for k, flist in enumerate(pa.frame_lists):
            kept = [t for t in flist if t > last_seen]
            if kept:
                last_seen = max(kept)
            pa.frame_lists[k] = kept


def _fit_pieces(analyses, curves, eps):
    fitted = []
    segments = []
    for pi, pa in enumerate(analyses):
        for qi, (piece, flist) in enumerate(zip(pa.pieces, pa.frame_lists)):
            segments.append(Segment(frame_list=tuple(flist),
                                    boundary=(tuple(piece[0]), tuple(piece[-1])),
                                    polyline=piece))
            if not flist:
                continue
            first, last = min(flist), max(flist)
            problem = fitting.FitProblem(
                segment=segments[-1],
                curves=tuple(curves[t - 1] for t in flist),
                degree=fitting.segment_degree(last - first + 1),
                exposure=eps,
                anchor_start=curves[first - 1].start,
                anchor_end=curves[last - 1].end,
            )
            fitted.append(_FittedPiece(fitting.fit_segment(problem),
                                       first, last, pi, qi))
    return fitted, segments


def _tangent_intersection(prev_poly, t_prev, next_poly, t_next):
    """Where the two fitted segments would meet if extended linearly;
    falls back to the midpoint for parallel or far-away intersections."""
    pa = prev_poly.evaluate(t_prev)
    pb = next_poly.evaluate(t_next)
    da = prev_poly.derivative(t_prev)
    db = next_poly.derivative(t_next)
    mid = (pa + pb) / 2.0
    det = -da[0] * db[1] + db[0] * da[1]
    norm = np.linalg.norm(da) * np.linalg.norm(db)
    if abs(det) < 1e-9 * max(norm, 1e-12):
        return mid
    s = np.linalg.solve(np.column_stack([da, -db]), pb - pa)
    point = pa + s[0] * da
    if np.linalg.norm(point - mid) > 5.0 * (np.linalg.norm(pb - pa) + 1.0):
        return mid
    return point


def _bridge(prev: _FittedPiece, nxt: _FittedPiece, analyses, eps, extra_bounces):
    """Linear pieces covering (prev.t_end, next.t_start]; may shrink
    prev.t_end to make room when the gap degenerates."""
    t1 = nxt.poly.t_start
    t0 = prev.t_end
    if t1 - t0 < _MIN_BRIDGE:
        t0 = max(t1 - _MIN_BRIDGE, (prev.poly.t_start + t1) / 2.0)
        prev.t_end = t0
    p0 = prev.poly.evaluate(t0)
    p1 = nxt.poly.evaluate(t1)

    interior = []  # (position, comes from a within-part bounce)
    if prev.part_index == nxt.part_index:
        pa = analyses[prev.part_index]
        for k in range(prev.piece_index, nxt.piece_index):
            interior.append((pa.bounces[k].position, True))
    else:
        pa = analyses[prev.part_index]
        for k in range(prev.piece_index, len(pa.bounces)):
            interior.append((pa.bounces[k].position, True))
        for mid in analyses[prev.part_index + 1:nxt.part_index]:
            interior.extend((b.position, True) for b in mid.bounces)
        cross = _tangent_intersection(prev.poly, t0, nxt.poly, t1)
        extra_bounces.append(Bounce(position=tuple(cross),
                                    time_hint=(t0 + t1) / 2.0,
                                    origin=BounceOrigin.BETWEEN_PARTS))
        interior.append((tuple(cross), False))
        for k in range(0, nxt.piece_index):
            interior.append((analyses[nxt.part_index].bounces[k].position, True))

    points = [p0] + [np.asarray(p, dtype=float) for p, _ in interior] + [p1]
    is_bounce = [False] + [flag for _, flag in interior] + [False]
    # a piece touching a bounce point on either side is a bounce piece
    piece_kinds = [SegmentKind.BOUNCE_LINEAR if (is_bounce[i] or is_bounce[i + 1])
                   else SegmentKind.GAP_LINEAR
                   for i in range(len(points) - 1)]
    return fitting.linear_chain(points, (t0, t1), piece_kinds)


def _degenerate_chain(analyses, curves, eps):
    """No piece kept any frame: fall back to a linear chain through the
    raw endpoints and every bounce point."""
    present = [c for c in curves if c.present]
    t0 = frame_time(present[0].frame_index)
    t1 = frame_time(present[-1].frame_index) + eps
    points = [present[0].start]
    for pa in analyses:
        points.extend(b.position for b in pa.bounces)
    points.append(present[-1].end)
    if t1 - t0 < _MIN_BRIDGE:  # single-frame-ish span
        t1 = t0 + max(eps, _MIN_BRIDGE)
    return fitting.linear_chain(points, (t0, t1), SegmentKind.GAP_LINEAR)


def reconstruct(bundle: SequenceBundle,
                config: ReconstructionConfig | None = None) -> StitchResult:
    """Run the full pipeline on one bundle."""
    config = config or ReconstructionConfig()
    curves = bundle.curves
    present = [c for c in curves if c.present]
    if not present:
        raise EmptyInputError("bundle has no present frames")
    # A single detection cannot constrain the exposure; its streak alone
    # defines the (degenerate) trajectory, so any value works.
    eps = 1.0 if len(present) == 1 else fitting.estimate_exposure(curves)

    analyses = [_analyze_part(bundle, r, config, eps)
                for r in split_nonintersecting(curves)]
    _sanitize_frame_lists(analyses)
    fitted, segments = _fit_pieces(analyses, curves, eps)
    fitted.sort(key=lambda f: f.first_frame)

    bounces = [b for pa in analyses for b in pa.bounces]
    pieces: list[SegmentPoly] = []
    if not fitted:
        pieces = _degenerate_chain(analyses, curves, eps)
    else:
        bridges = []
        for prev, nxt in zip(fitted, fitted[1:]):
            bridges.append(_bridge(prev, nxt, analyses, eps, bounces))
        for i, f in enumerate(fitted):
            poly = f.poly
            if f.t_end != poly.t_end:  # shrunk to host a bridge
                poly = SegmentPoly(t_start=poly.t_start, t_end=f.t_end,
                                   degree=poly.degree, coeffs=poly.coeffs,
                                   kind=poly.kind, center=poly.center,
                                   scale=poly.scale, degenerate=poly.degenerate)
            pieces.append(poly)
            if i < len(bridges):
                pieces.extend(bridges[i])

    extensions = fitting.extrapolate_ends(pieces, bundle.n_frames)
    for ext in extensions:
        if ext.t_start == 0.0 and ext.t_end == pieces[0].t_start:
            pieces.insert(0, ext)
        else:
            pieces.append(ext)

    trajectory = TrajectoryFn(n_frames=bundle.n_frames, exposure=eps,
                              segments=tuple(pieces))
    return StitchResult(trajectory=trajectory, exposure=eps,
                        parts=tuple(pa.part for pa in analyses),
                        segments=tuple(segments), bounces=tuple(bounces))


def build_trajectory(bundle: SequenceBundle,
                     config: ReconstructionConfig | None = None) -> TrajectoryFn:
    """The trajectory alone; see :func:`reconstruct` for the full result."""
    return reconstruct(bundle, config).trajectory
