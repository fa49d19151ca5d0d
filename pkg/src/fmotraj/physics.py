"""Physical quantities derived from a reconstructed trajectory.

Speeds are measured in pixels per frame-time; since every frame has unit
duration this equals pixels per exposure, and dividing by the object
radius gives radii per exposure. Metric speed needs a pixel scale, which
either comes from measuring a known length in the scene or from
gravity: a vertical quadratic coefficient ``a`` (px/frame^2) observed at
frame rate ``f`` under gravity ``g`` fixes the scale p = g / (2 a f^2)
meters per pixel.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import GravityNotDominantError, KernelTooNoisyError, NoCurvatureError
from .types import BlurKernel, DiscretePath, TrajectoryFn, _frozen_array

MPH_PER_MPS = 2.2369362920544
EARTH_GRAVITY = 9.8  # m/s^2
FEET_TO_METERS = 0.3048

_KERNEL_MASK_FRACTION = 1e-3


class SpeedUnit(str, Enum):
    PX_PER_EXPOSURE = "px_per_exposure"
    RADII_PER_EXPOSURE = "radii_per_exposure"
    METERS_PER_SECOND = "meters_per_second"
    MPH = "mph"


@dataclass(frozen=True)
class SpeedProfile:
    times: np.ndarray
    speeds: np.ndarray
    unit: SpeedUnit = SpeedUnit.PX_PER_EXPOSURE

    def __post_init__(self):
        _frozen_array(self, "times", np.asarray(self.times, dtype=float))
        _frozen_array(self, "speeds", np.asarray(self.speeds, dtype=float))
        if self.times.shape != self.speeds.shape or self.times.ndim != 1:
            raise ValueError("times and speeds must be matching 1-D arrays")
        if len(self.times) and np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if np.any(self.speeds < 0):
            raise ValueError("speeds must be non-negative")
        object.__setattr__(self, "unit", SpeedUnit(self.unit))

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class Calibration:
    meters_per_pixel: float
    fps: float
    gravity: float = EARTH_GRAVITY

    def __post_init__(self):
        if min(self.meters_per_pixel, self.fps, self.gravity) <= 0:
            raise ValueError("calibration values must be positive")


def speed_profile(traj: TrajectoryFn, radius_px: float | None = None,
                  n_samples: int = 512) -> SpeedProfile:
    """Norm of the trajectory derivative at uniform times in [0, N],
    divided by the radius when one is given."""
    if n_samples < 2:
        raise ValueError("need at least two samples")
    times = np.linspace(0.0, traj.n_frames, n_samples)
    speeds = traj.speed(times)
    if radius_px is not None:
        if radius_px <= 0:
            raise ValueError("radius_px must be positive")
        return SpeedProfile(times, speeds / radius_px, SpeedUnit.RADII_PER_EXPOSURE)
    return SpeedProfile(times, speeds, SpeedUnit.PX_PER_EXPOSURE)


def speed_at_hit(traj: TrajectoryFn, hit_point) -> tuple[float, float]:
    """Time and speed where the trajectory passes closest to a point.

    Dense sampling (1000 per frame) picks the bracket — the earliest one
    on exact ties — and golden-section search refines it.
    """
    hit = np.asarray(hit_point, dtype=float)
    ts = np.linspace(0.0, traj.n_frames, 1000 * traj.n_frames + 1)
    d2 = np.sum((traj.evaluate(ts) - hit) ** 2, axis=1)
    i = int(np.argmin(d2))
    lo = ts[max(i - 1, 0)]
    hi = ts[min(i + 1, len(ts) - 1)]

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc = float(np.sum((traj.evaluate(c) - hit) ** 2))
    fd = float(np.sum((traj.evaluate(d) - hit) ** 2))
    for _ in range(80):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = float(np.sum((traj.evaluate(c) - hit) ** 2))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = float(np.sum((traj.evaluate(d) - hit) ** 2))
    t_hit = (a + b) / 2.0
    return t_hit, float(traj.speed(t_hit))


def calibrate_speed(speed_px_per_frame: float, meters_per_pixel: float,
                    fps: float) -> tuple[float, float]:
    """Convert a pixels-per-frame speed to (m/s, mph)."""
    if min(meters_per_pixel, fps) <= 0 or speed_px_per_frame < 0:
        raise ValueError("inputs must be positive (speed non-negative)")
    mps = speed_px_per_frame * meters_per_pixel * fps
    return mps, mps * MPH_PER_MPS


def radius_from_gravity(quadratic_coeff_a: float, fps: float, radius_px: float,
                        g: float = EARTH_GRAVITY) -> float:
    """Object radius in meters from the observed vertical quadratic
    coefficient, assuming gravity is the only force at work."""
    if quadratic_coeff_a <= 0:
        raise GravityNotDominantError(
            "vertical quadratic coefficient must be positive (downward bend)")
    if fps <= 0 or radius_px <= 0 or g <= 0:
        raise ValueError("fps, radius_px and g must be positive")
    meters_per_pixel = g / (2.0 * quadratic_coeff_a * fps**2)
    return radius_px * meters_per_pixel


def gravity_from_radius(quadratic_coeff_a: float, fps: float, radius_px: float,
                        radius_m: float) -> float:
    """Gravity implied by a known object size; inverse of
    :func:`radius_from_gravity`."""
    if quadratic_coeff_a <= 0:
        raise GravityNotDominantError(
            "vertical quadratic coefficient must be positive (downward bend)")
    if fps <= 0 or radius_px <= 0 or radius_m <= 0:
        raise ValueError("fps and radii must be positive")
    return 2.0 * quadratic_coeff_a * fps**2 * (radius_m / radius_px)


def quadratic_accel(traj: TrajectoryFn, segment_index: int) -> float:
    """Effective vertical quadratic coefficient of one segment: half the
    second derivative of its y-polynomial at the segment midpoint."""
    seg = traj.segments[segment_index]
    if seg.degree < 2:
        raise NoCurvatureError(f"segment {segment_index} has degree {seg.degree}")
    mid = (seg.t_start + seg.t_end) / 2.0
    return float(seg.second_derivative(mid)[1]) / 2.0


def speed_from_kernel(kernel: BlurKernel, path: DiscretePath,
                      exposure: float) -> SpeedProfile:
    """Per-pixel speeds from blur-kernel intensities along the path.

    Kernel values are proportional to the time the object spent in each
    pixel, so after renormalizing over the path pixels, pixel i with
    value h_i and step length l_i was traversed at l_i * sum(h) /
    (exposure * h_i). Pixels below 1e-3 of the path maximum are masked
    as unreliable. Sample times are the cumulative occupancy midpoints.
    """
    if not 0.0 < exposure <= 1.0:
        raise ValueError("exposure must lie in (0, 1]")
    pts = path.points_time_order()
    xs = pts[:, 0].astype(int)
    ys = pts[:, 1].astype(int)
    values = kernel.values[ys, xs]
    if len(pts) > 1:
        step_len = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        lengths = np.append(step_len, step_len[-1])
    else:
        lengths = np.ones(1)
    mask = values >= _KERNEL_MASK_FRACTION * float(values.max(initial=0.0))
    mask &= values > 0
    if not mask.any():
        raise KernelTooNoisyError("no reliable kernel values along the path")
    h = values[mask]
    l = lengths[mask]
    total = float(h.sum())
    dwell = exposure * h / total
    speeds = l * total / (exposure * h)
    times = np.cumsum(dwell) - dwell / 2.0
    return SpeedProfile(times, speeds, SpeedUnit.PX_PER_EXPOSURE)
