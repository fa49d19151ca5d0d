"""Shared domain types.

Conventions used throughout the package:

* Coordinates are real-valued, origin at the top-left pixel center,
  x growing rightward (columns), y growing downward (rows).
* A sequence of N frames maps onto the time axis [0, N]; frame t
  (1-based) starts at time t - 1 and the object is visible during
  [t - 1, t - 1 + exposure].
* All types are immutable after construction and safe to share across
  threads; arrays are defensively copied and marked read-only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import KernelDimensionError

Point = tuple[float, float]

_NORMALIZED_TOL = 1e-6


def _frozen_array(obj, name: str, values: np.ndarray) -> None:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    object.__setattr__(obj, name, arr)


def frame_time(frame_index: int) -> float:
    """Sequence time at which frame ``frame_index`` (1-based) starts."""
    return float(frame_index - 1)


class Axis(str, Enum):
    COLUMN_WISE = "column_wise"
    ROW_WISE = "row_wise"


class SegmentKind(str, Enum):
    FITTED = "fitted"
    BOUNCE_LINEAR = "bounce_linear"
    GAP_LINEAR = "gap_linear"
    EXTRAPOLATED = "extrapolated"


@dataclass(frozen=True)
class BlurKernel:
    """Per-frame non-negative grid accumulating object motion evidence.

    ``values[y, x]`` follows the image convention (row y, column x).
    """

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("kernel must be a non-empty 2-D grid")
        if not np.all(np.isfinite(arr)):
            raise ValueError("kernel values must be finite")
        if np.any(arr < 0):
            raise ValueError("kernel values must be non-negative")
        if self.normalized and abs(float(arr.sum()) - 1.0) > _NORMALIZED_TOL:
            raise ValueError("normalized kernel must sum to 1 within 1e-6")
        _frozen_array(self, "values", arr)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def value(self, x: int, y: int) -> float:
        return float(self.values[y, x])

    def transposed(self) -> "BlurKernel":
        return BlurKernel(self.values.T, normalized=self.normalized)

    def to_dict(self) -> dict:
        h, w = self.values.shape
        nonzero = np.argwhere(self.values != 0.0)
        # Sparse pays off once the triplet list is shorter than the grid.
        if 3 * len(nonzero) < h * w:
            triplets = sorted(
                [int(x), int(y), float(self.values[y, x])] for y, x in nonzero
            )
            return {
                "width": w,
                "height": h,
                "normalized": self.normalized,
                "encoding": "sparse",
                "values": triplets,
            }
        return {
            "width": w,
            "height": h,
            "normalized": self.normalized,
            "encoding": "dense",
            "values": [float(v) for v in self.values.ravel()],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BlurKernel":
        w, h = int(doc["width"]), int(doc["height"])
        encoding = doc.get("encoding", "dense")
        if encoding == "dense":
            arr = np.asarray(doc["values"], dtype=float).reshape(h, w)
        elif encoding == "sparse":
            arr = np.zeros((h, w))
            for x, y, v in doc["values"]:
                arr[int(y), int(x)] = float(v)
        else:
            raise ValueError(f"unknown kernel encoding {encoding!r}")
        return cls(arr, normalized=bool(doc.get("normalized", False)))


@dataclass(frozen=True)
class FrameCurve:
    """Causal per-frame curve endpoints: the object at the start and end
    of the frame's exposure. ``present=False`` marks frames where the
    causal tracker produced nothing; such frames keep their index so the
    numbering never shifts."""

    frame_index: int
    start: Point | None = None
    end: Point | None = None
    present: bool = True

    def __post_init__(self):
        if self.frame_index < 1:
            raise ValueError("frame_index is 1-based")
        if self.present:
            if self.start is None or self.end is None:
                raise ValueError("present frame needs both endpoints")
            object.__setattr__(self, "start", (float(self.start[0]), float(self.start[1])))
            object.__setattr__(self, "end", (float(self.end[0]), float(self.end[1])))
        elif self.start is not None or self.end is not None:
            raise ValueError("absent frame must not carry endpoints")

    @property
    def start_time(self) -> float:
        return frame_time(self.frame_index)

    def to_dict(self) -> dict:
        doc = {"frame_index": self.frame_index, "present": self.present}
        if self.present:
            doc["start"] = [self.start[0], self.start[1]]
            doc["end"] = [self.end[0], self.end[1]]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "FrameCurve":
        present = bool(doc.get("present", True))
        if present:
            sx, sy = doc["start"]
            ex, ey = doc["end"]
            return cls(int(doc["frame_index"]), (float(sx), float(sy)),
                       (float(ex), float(ey)), True)
        return cls(int(doc["frame_index"]), None, None, False)


@dataclass(frozen=True)
class DiscretePath:
    """Dynamic-programming output: one integer row per column of the
    (possibly transposed) kernel grid.

    ``axis`` records whether path columns index image columns
    (column-wise) or image rows (row-wise solve on the transposed
    kernel). ``flipped`` means the solver mirrored the grid because the
    causal end point sat left of the start point; coordinates here are
    already mapped back, so ``flipped`` only says that time runs from
    ``x_end`` down to ``x_begin``.
    """

    x_begin: int
    x_end: int
    rows: tuple[int, ...]
    axis: Axis = Axis.COLUMN_WISE
    flipped: bool = False

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(int(r) for r in self.rows))
        if self.x_begin > self.x_end:
            raise ValueError("x_begin must not exceed x_end")
        if len(self.rows) != self.x_end - self.x_begin + 1:
            raise ValueError("rows length must match the column span")
        steps = np.diff(self.rows)
        if steps.size and int(np.max(np.abs(steps))) > 2:
            raise ValueError("consecutive rows may differ by at most 2")
        object.__setattr__(self, "axis", Axis(self.axis))

    def __len__(self) -> int:
        return len(self.rows)

    def points(self) -> np.ndarray:
        """Path pixels as (x, y) image coordinates in column order."""
        xs = np.arange(self.x_begin, self.x_end + 1, dtype=float)
        ys = np.asarray(self.rows, dtype=float)
        if self.axis is Axis.ROW_WISE:
            xs, ys = ys, xs
        return np.column_stack([xs, ys])

    def points_time_order(self) -> np.ndarray:
        pts = self.points()
        return pts[::-1] if self.flipped else pts

    def to_dict(self) -> dict:
        return {
            "x_begin": self.x_begin,
            "x_end": self.x_end,
            "rows": list(self.rows),
            "axis": self.axis.value,
            "flipped": self.flipped,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DiscretePath":
        return cls(int(doc["x_begin"]), int(doc["x_end"]),
                   tuple(doc["rows"]), Axis(doc["axis"]), bool(doc["flipped"]))


@dataclass(frozen=True)
class SegmentPoly:
    """One polynomial piece of the trajectory.

    The polynomial is stored in the conditioned local variable
    ``u = (t - center) / scale`` so that evaluations stay accurate even
    for long sequences; ``global_coeffs`` converts back to plain powers
    of t when the raw coefficients are wanted. ``coeffs`` has shape
    (2, degree + 1), ascending powers, rows = (x, y).
    """

    t_start: float
    t_end: float
    degree: int
    coeffs: np.ndarray
    kind: SegmentKind = SegmentKind.FITTED
    center: float = 0.0
    scale: float = 1.0
    degenerate: bool = False

    MAX_DEGREE = 6

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError("t_start must be strictly below t_end")
        if not 1 <= self.degree <= self.MAX_DEGREE:
            raise ValueError("degree must lie in [1, 6]")
        arr = np.asarray(self.coeffs, dtype=float)
        if arr.shape != (2, self.degree + 1):
            raise ValueError("coeffs must have shape (2, degree + 1)")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficients must be finite")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        _frozen_array(self, "coeffs", arr)
        object.__setattr__(self, "kind", SegmentKind(self.kind))
        object.__setattr__(self, "t_start", float(self.t_start))
        object.__setattr__(self, "t_end", float(self.t_end))
        object.__setattr__(self, "center", float(self.center))
        object.__setattr__(self, "scale", float(self.scale))

    def _local(self, t):
        return (np.asarray(t, dtype=float) - self.center) / self.scale

    def evaluate(self, t):
        """Positions at time(s) t; shape (2,) for scalars, (n, 2) otherwise."""
        u = self._local(t)
        out = np.zeros(u.shape + (2,))
        for c in self.coeffs.T[::-1]:  # Horner, highest power first
            out = out * u[..., None] + c
        return out

    def derivative(self, t):
        u = self._local(t)
        out = np.zeros(u.shape + (2,))
        for k in range(self.degree, 0, -1):
            out = out * u[..., None] + k * self.coeffs[:, k]
        return out / self.scale

    def second_derivative(self, t):
        u = self._local(t)
        out = np.zeros(u.shape + (2,))
        for k in range(self.degree, 1, -1):
            out = out * u[..., None] + k * (k - 1) * self.coeffs[:, k]
        return out / self.scale**2

    def global_coeffs(self) -> np.ndarray:
        """Coefficients in plain powers of t, shape (2, degree + 1).

        Exact basis change; beware that for large centers the global
        representation itself is ill-conditioned, which is why it is
        derived rather than stored.
        """
        shift = np.polynomial.Polynomial([-self.center / self.scale, 1.0 / self.scale])
        out = np.zeros_like(self.coeffs)
        for i in range(2):
            composed = np.polynomial.Polynomial(self.coeffs[i])(shift)
            out[i, : len(composed.coef)] = composed.coef
        return out

    def to_dict(self) -> dict:
        return {
            "t_start": self.t_start,
            "t_end": self.t_end,
            "degree": self.degree,
            "kind": self.kind.value,
            "degenerate": self.degenerate,
            "center": self.center,
            "scale": self.scale,
            "coeffs_x": [float(v) for v in self.coeffs[0]],
            "coeffs_y": [float(v) for v in self.coeffs[1]],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SegmentPoly":
        coeffs = np.array([doc["coeffs_x"], doc["coeffs_y"]], dtype=float)
        return cls(
            t_start=float(doc["t_start"]),
            t_end=float(doc["t_end"]),
            degree=int(doc["degree"]),
            coeffs=coeffs,
            kind=SegmentKind(doc["kind"]),
            center=float(doc["center"]),
            scale=float(doc["scale"]),
            degenerate=bool(doc.get("degenerate", False)),
        )


_CONTINUITY_TOL = 1e-9


@dataclass(frozen=True)
class TrajectoryFn:
    """The reconstructed trajectory: a continuous, piecewise-polynomial
    map from sequence time [0, N] to image coordinates."""

    n_frames: int
    exposure: float
    segments: tuple[SegmentPoly, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.n_frames < 1:
            raise ValueError("need at least one frame")
        if not 0.0 < self.exposure <= 1.0:
            raise ValueError("exposure must lie in (0, 1]")
        if not self.segments:
            raise ValueError("trajectory needs at least one segment")
        segs = self.segments
        if abs(segs[0].t_start) > _CONTINUITY_TOL:
            raise ValueError("first segment must start at t = 0")
        if abs(segs[-1].t_end - self.n_frames) > _CONTINUITY_TOL:
            raise ValueError("last segment must end at t = n_frames")
        for a, b in zip(segs, segs[1:]):
            if abs(b.t_start - a.t_end) > _CONTINUITY_TOL:
                raise ValueError("segments must tile [0, N] without gaps")
            gap = np.linalg.norm(a.evaluate(a.t_end) - b.evaluate(b.t_start))
            if gap > _CONTINUITY_TOL:
                raise ValueError(f"C0 continuity violated at t={a.t_end}: gap {gap}")
        breaks = np.array([s.t_start for s in segs])
        breaks.setflags(write=False)
        object.__setattr__(self, "_starts", breaks)

    @property
    def breakpoints(self) -> np.ndarray:
        return np.append(self._starts, self.segments[-1].t_end)

    def _segment_index(self, t):
        # side="right": at a breakpoint the segment starting there wins,
        # which makes derivative() the right derivative.
        idx = np.searchsorted(self._starts, np.asarray(t, dtype=float), side="right") - 1
        return np.clip(idx, 0, len(self.segments) - 1)

    def _apply(self, t, method: str):
        t_arr = np.asarray(t, dtype=float)
        idx = self._segment_index(t_arr)
        out = np.empty(t_arr.shape + (2,))
        for i in np.unique(idx):
            mask = idx == i
            out[mask] = getattr(self.segments[int(i)], method)(t_arr[mask])
        return out if t_arr.shape else out.reshape(2)

    def evaluate(self, t):
        """Object position at time(s) t ∈ [0, N]."""
        return self._apply(t, "evaluate")

    def derivative(self, t):
        """Velocity at time(s) t; right derivative at breakpoints."""
        return self._apply(t, "derivative")

    def speed(self, t):
        d = self.derivative(t)
        return np.linalg.norm(d, axis=-1)

    def to_dict(self) -> dict:
        return {
            "n_frames": self.n_frames,
            "exposure": self.exposure,
            "segments": [s.to_dict() for s in self.segments],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrajectoryFn":
        return cls(
            n_frames=int(doc["n_frames"]),
            exposure=float(doc["exposure"]),
            segments=tuple(SegmentPoly.from_dict(s) for s in doc["segments"]),
        )


@dataclass(frozen=True)
class GroundTruth:
    trajectory: TrajectoryFn
    mask_radius_px: float

    def __post_init__(self):
        if not self.mask_radius_px > 0:
            raise ValueError("mask_radius_px must be positive")

    def to_dict(self) -> dict:
        return {
            "mask_radius_px": float(self.mask_radius_px),
            "trajectory": self.trajectory.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GroundTruth":
        return cls(TrajectoryFn.from_dict(doc["trajectory"]),
                   float(doc["mask_radius_px"]))


@dataclass(frozen=True)
class FrameRecord:
    """One frame of a bundle: the causal curve plus, optionally, the
    frame's blur kernel."""

    curve: FrameCurve
    kernel: BlurKernel | None = None

    def to_dict(self) -> dict:
        doc = self.curve.to_dict()
        if self.kernel is not None:
            doc["kernel"] = self.kernel.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "FrameRecord":
        kernel = BlurKernel.from_dict(doc["kernel"]) if "kernel" in doc else None
        return cls(FrameCurve.from_dict(doc), kernel)


# Causal endpoints may exit the image (extrapolation, tracker overshoot);
# they must still stay within the image extended by this many image sizes
# on each side.
COORDINATE_MARGIN = 2.0


@dataclass(frozen=True)
class SequenceBundle:
    """The on-disk unit: everything one sequence contributes."""

    n_frames: int
    fps: float
    image_size: tuple[int, int]
    frames: tuple[FrameRecord, ...]
    radius_px: float | None = None
    ground_truth: GroundTruth | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "image_size",
                           (int(self.image_size[0]), int(self.image_size[1])))
        if self.n_frames < 1:
            raise ValueError("n_frames must be positive")
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        if self.radius_px is not None and not self.radius_px > 0:
            raise ValueError("radius_px must be positive when given")
        w, h = self.image_size
        if w < 1 or h < 1:
            raise ValueError("image_size must be positive")
        if len(self.frames) != self.n_frames:
            raise ValueError("frames list must have exactly n_frames entries")
        for expected, rec in enumerate(self.frames, start=1):
            if rec.curve.frame_index != expected:
                raise ValueError("frames must be ordered by frame_index starting at 1")
            if rec.kernel is not None and (rec.kernel.width, rec.kernel.height) != (w, h):
                raise KernelDimensionError(
                    f"frame {expected}: kernel {rec.kernel.width}x{rec.kernel.height} "
                    f"does not match image size {w}x{h}")
            if rec.curve.present:
                for px, py in (rec.curve.start, rec.curve.end):
                    if not (-COORDINATE_MARGIN * w <= px <= (1 + COORDINATE_MARGIN) * w
                            and -COORDINATE_MARGIN * h <= py <= (1 + COORDINATE_MARGIN) * h):
                        raise ValueError(
                            f"frame {expected}: endpoint ({px}, {py}) outside the "
                            f"allowed margin around the {w}x{h} image")

    @property
    def curves(self) -> list[FrameCurve]:
        return [rec.curve for rec in self.frames]

    def present_curves(self) -> list[FrameCurve]:
        return [rec.curve for rec in self.frames if rec.curve.present]

    def to_dict(self) -> dict:
        doc = {
            "n_frames": self.n_frames,
            "fps": float(self.fps),
            "image_size": [self.image_size[0], self.image_size[1]],
            "radius_px": None if self.radius_px is None else float(self.radius_px),
            "frames": [rec.to_dict() for rec in self.frames],
            "ground_truth": None if self.ground_truth is None else self.ground_truth.to_dict(),
        }
        doc.update(self.extras)
        return doc

    @classmethod
    def from_dict(cls, doc: dict, extras: dict | None = None) -> "SequenceBundle":
        gt = doc.get("ground_truth")
        return cls(
            n_frames=int(doc["n_frames"]),
            fps=float(doc["fps"]),
            image_size=(int(doc["image_size"][0]), int(doc["image_size"][1])),
            frames=tuple(FrameRecord.from_dict(f) for f in doc["frames"]),
            radius_px=None if doc.get("radius_px") is None else float(doc["radius_px"]),
            ground_truth=None if gt is None else GroundTruth.from_dict(gt),
            extras=dict(extras or {}),
        )


@dataclass(frozen=True)
class DpParams:
    """Weights of the path energy: curvature (kappa1) and the two
    endpoint attraction terms (kappa2 starts, kappa3 ends).

    ``exact_state=True`` augments the DP state with the incoming step so
    the curvature term is exact and the returned energy is the true
    global minimum; ``False`` reproduces the plain per-pixel two-table
    scheme."""

    kappa1: float = 0.1
    kappa2: float = 0.1
    kappa3: float = 0.1
    exact_state: bool = True

    def __post_init__(self):
        if min(self.kappa1, self.kappa2, self.kappa3) < 0:
            raise ValueError("kappa weights must be non-negative")

    def to_dict(self) -> dict:
        return {"kappa1": self.kappa1, "kappa2": self.kappa2,
                "kappa3": self.kappa3, "exact_state": self.exact_state}

    @classmethod
    def from_dict(cls, doc: dict) -> "DpParams":
        return cls(float(doc["kappa1"]), float(doc["kappa2"]),
                   float(doc["kappa3"]), bool(doc["exact_state"]))


@dataclass(frozen=True)
class BounceParams:
    """Window half-width (in path pixels) and direction-change threshold
    for bounce detection."""

    window_px: int = 5
    angle_threshold_deg: float = 30.0

    def __post_init__(self):
        if self.window_px < 1:
            raise ValueError("window_px must be at least 1")
        if not 0.0 < self.angle_threshold_deg < 180.0:
            raise ValueError("angle_threshold_deg must lie in (0, 180)")

    def to_dict(self) -> dict:
        return {"window_px": self.window_px,
                "angle_threshold_deg": self.angle_threshold_deg}

    @classmethod
    def from_dict(cls, doc: dict) -> "BounceParams":
        return cls(int(doc["window_px"]), float(doc["angle_threshold_deg"]))
