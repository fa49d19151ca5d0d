"""Synthetic sequence generator: the ground-truth oracle for everything.

Motion is ballistic per axis (constant-velocity x, quadratic y with
coefficient ``gravity_px``) with instantaneous specular reflections
against axis-aligned planes, so the exact trajectory is piecewise
polynomial and representable losslessly. Blur kernels are rendered by
depositing exposure time along the exact curve with bilinear splatting,
which keeps the per-frame kernel mass equal to the exposure fraction.

All randomness flows from numpy's PCG64 generator seeded with
``spec.seed``; the same spec always yields a bit-identical bundle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SynthSpecError
from .physics import SpeedProfile, SpeedUnit
from .types import (BlurKernel, FrameCurve, FrameRecord, GroundTruth, Point,
                    SegmentKind, SegmentPoly, SequenceBundle, TrajectoryFn,
                    frame_time)

# the scene box: the image rectangle inflated to 4x its size
_SCENE_FACTOR = 1.5
_MAX_BOUNCE_EVENTS_PER_FRAME = 64


@dataclass(frozen=True)
class SynthSpec:
    n_frames: int = 20
    fps: float = 30.0
    exposure: float = 0.85
    gravity_px: float = 0.0  # quadratic y-coefficient, px/frame^2
    initial_position: Point = (12.0, 60.0)
    initial_velocity: Point = (5.5, -3.0)  # px/frame
    bounce_planes: tuple[tuple[str, float, float], ...] = ()  # (axis, coord, restitution)
    radius_px: float = 5.0
    image_size: tuple[int, int] = (128, 96)
    kernel_noise_sigma: float = 0.0
    endpoint_noise_sigma: float = 0.0
    dropout: tuple[int, ...] = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bounce_planes",
                           tuple((str(a), float(c), float(r))
                                 for a, c, r in self.bounce_planes))
        object.__setattr__(self, "dropout", tuple(int(t) for t in self.dropout))
        if self.n_frames < 1:
            raise SynthSpecError("n_frames must be positive")
        if not 0.0 < self.exposure <= 1.0:
            raise SynthSpecError("exposure must lie in (0, 1]")
        if self.fps <= 0 or self.radius_px <= 0:
            raise SynthSpecError("fps and radius_px must be positive")
        for axis, _, restitution in self.bounce_planes:
            if axis not in ("x", "y"):
                raise SynthSpecError("bounce plane axis must be 'x' or 'y'")
            if not 0.0 < restitution <= 1.0:
                raise SynthSpecError("restitution must lie in (0, 1]")
        for t in self.dropout:
            if not 1 <= t <= self.n_frames:
                raise SynthSpecError("dropout frame index out of range")


@dataclass
class _State:
    t: float
    pos: np.ndarray
    vel: np.ndarray


def _crossing_time(state: _State, axis: str, coord: float, a: float, horizon: float):
    """Earliest time offset (> tiny) at which the given plane is reached."""
    i = 0 if axis == "x" else 1
    p0 = state.pos[i] - coord
    v = state.vel[i]
    acc = a if axis == "y" else 0.0
    roots = []
    if abs(acc) > 1e-15:
        disc = v * v - 4.0 * acc * p0
        if disc >= 0:
            sq = math.sqrt(disc)
            roots = [(-v - sq) / (2.0 * acc), (-v + sq) / (2.0 * acc)]
    elif abs(v) > 1e-15:
        roots = [-p0 / v]
    valid = [s for s in roots if 1e-9 < s <= horizon]
    return min(valid) if valid else None


def _integrate_segments(spec: SynthSpec):
    """Closed-form ballistic pieces between bounces over [0, n_frames]."""
    a = spec.gravity_px
    state = _State(0.0, np.array(spec.initial_position, dtype=float),
                   np.array(spec.initial_velocity, dtype=float))
    boundaries = [(0.0, state.pos.copy(), state.vel.copy())]
    events = 0
    while True:
        horizon = spec.n_frames - state.t
        if horizon <= 1e-12:
            break
        hits = []
        for axis, coord, restitution in spec.bounce_planes:
            s = _crossing_time(state, axis, coord, a, horizon)
            if s is not None:
                hits.append((s, axis, coord, restitution))
        if not hits:
            break
        s, axis, coord, restitution = min(hits, key=lambda h: h[0])
        events += 1
        if events > _MAX_BOUNCE_EVENTS_PER_FRAME * spec.n_frames:
            raise SynthSpecError("object settled onto a plane (too many bounces)")
        new_pos = np.array([state.pos[0] + state.vel[0] * s,
                            state.pos[1] + state.vel[1] * s + a * s * s])
        new_vel = np.array([state.vel[0], state.vel[1] + 2.0 * a * s])
        i = 0 if axis == "x" else 1
        new_pos[i] = coord  # land exactly on the plane
        new_vel[i] = -restitution * new_vel[i]
        state = _State(state.t + s, new_pos, new_vel)
        boundaries.append((state.t, state.pos.copy(), state.vel.copy()))

    segments = []
    for k, (t0, pos, vel) in enumerate(boundaries):
        t1 = boundaries[k + 1][0] if k + 1 < len(boundaries) else float(spec.n_frames)
        if t1 - t0 < 1e-12:
            continue
        # local basis u = t - t0 keeps the piece exact
        if a != 0.0:
            coeffs = np.array([[pos[0], vel[0], 0.0], [pos[1], vel[1], a]])
            degree = 2
        else:
            coeffs = np.array([[pos[0], vel[0]], [pos[1], vel[1]]])
            degree = 1
        segments.append(SegmentPoly(t_start=t0, t_end=t1, degree=degree,
                                    coeffs=coeffs, kind=SegmentKind.FITTED,
                                    center=t0, scale=1.0))
    return segments


def _check_in_scene(traj: TrajectoryFn, spec: SynthSpec) -> None:
    w, h = spec.image_size
    ts = np.linspace(0.0, spec.n_frames, 50 * spec.n_frames + 1)
    pts = traj.evaluate(ts)
    if (pts[:, 0].min() < -_SCENE_FACTOR * w or pts[:, 0].max() > (1 + _SCENE_FACTOR) * w
            or pts[:, 1].min() < -_SCENE_FACTOR * h or pts[:, 1].max() > (1 + _SCENE_FACTOR) * h):
        raise SynthSpecError("trajectory leaves the 4x scene box")


def _render_kernel(traj: TrajectoryFn, tau: float, spec: SynthSpec,
                   rng: np.random.Generator) -> BlurKernel:
    w, h = spec.image_size
    eps = spec.exposure
    coarse = traj.evaluate(np.linspace(tau, tau + eps, 33))
    arc = float(np.sum(np.linalg.norm(np.diff(coarse, axis=0), axis=1)))
    n_sub = int(max(64, math.ceil(arc / 0.2)))
    times = tau + eps * (np.arange(n_sub) + 0.5) / n_sub
    pts = traj.evaluate(times)
    dt = eps / n_sub

    grid = np.zeros((h, w))
    x0 = np.floor(pts[:, 0]).astype(int)
    y0 = np.floor(pts[:, 1]).astype(int)
    fx = pts[:, 0] - x0
    fy = pts[:, 1] - y0
    for dx, dy, wgt in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                        (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        gx, gy = x0 + dx, y0 + dy
        ok = (gx >= 0) & (gx < w) & (gy >= 0) & (gy < h)
        np.add.at(grid, (gy[ok], gx[ok]), dt * wgt[ok])
    if spec.kernel_noise_sigma > 0:
        grid = np.clip(grid + rng.normal(0.0, spec.kernel_noise_sigma, grid.shape),
                       0.0, None)
    return BlurKernel(grid)


def generate(spec: SynthSpec):
    """Build (SequenceBundle, GroundTruth, SpeedProfile) for a spec."""
    trajectory = TrajectoryFn(n_frames=spec.n_frames, exposure=spec.exposure,
                              segments=tuple(_integrate_segments(spec)))
    _check_in_scene(trajectory, spec)
    rng = np.random.default_rng(spec.seed)

    records = []
    dropout = set(spec.dropout)
    for t in range(1, spec.n_frames + 1):
        if t in dropout:
            records.append(FrameRecord(FrameCurve(t, present=False), None))
            continue
        tau = frame_time(t)
        start = trajectory.evaluate(tau)
        end = trajectory.evaluate(tau + spec.exposure)
        kernel = _render_kernel(trajectory, tau, spec, rng)
        if spec.endpoint_noise_sigma > 0:
            start = start + rng.normal(0.0, spec.endpoint_noise_sigma, 2)
            end = end + rng.normal(0.0, spec.endpoint_noise_sigma, 2)
        records.append(FrameRecord(FrameCurve(t, tuple(start), tuple(end)), kernel))

    gt = GroundTruth(trajectory=trajectory, mask_radius_px=spec.radius_px)
    bundle = SequenceBundle(n_frames=spec.n_frames, fps=spec.fps,
                            image_size=spec.image_size, frames=tuple(records),
                            radius_px=spec.radius_px, ground_truth=gt)
    times = np.linspace(0.0, spec.n_frames, 10 * spec.n_frames + 1)
    profile = SpeedProfile(times, trajectory.speed(times), SpeedUnit.PX_PER_EXPOSURE)
    return bundle, gt, profile
