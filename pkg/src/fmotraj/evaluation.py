"""Trajectory accuracy metrics against ground truth.

TIoU places a disk of the ground-truth mask radius at corresponding
times on both trajectories and averages the disk IoU over 10 evenly
spaced time stamps inside each frame's exposure span; sequence TIoU is
the mean over frames and recall the fraction of frames with any overlap
at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError
from .physics import SpeedProfile
from .types import GroundTruth, TrajectoryFn, frame_time

TIOU_TIMESTAMPS = 10


@dataclass(frozen=True)
class EvalReport:
    tiou: float
    recall: float
    per_frame_tiou: tuple[float, ...]
    mean_speed_abs_error: float | None = None

    def to_dict(self) -> dict:
        return {
            "tiou": self.tiou,
            "recall": self.recall,
            "per_frame_tiou": list(self.per_frame_tiou),
            "mean_speed_abs_error": self.mean_speed_abs_error,
        }


def disk_iou(c1, c2, r: float) -> float:
    """IoU of two equal disks of radius r at the given centers."""
    if r <= 0:
        raise ValueError("radius must be positive")
    d = math.dist((float(c1[0]), float(c1[1])), (float(c2[0]), float(c2[1])))
    if d >= 2.0 * r:
        return 0.0
    intersection = (2.0 * r * r * math.acos(d / (2.0 * r))
                    - (d / 2.0) * math.sqrt(4.0 * r * r - d * d))
    union = 2.0 * math.pi * r * r - intersection
    return intersection / union


def _frame_times(frame: int, exposure: float) -> np.ndarray:
    ks = np.arange(TIOU_TIMESTAMPS)
    return frame_time(frame) + exposure * (ks + 0.5) / TIOU_TIMESTAMPS


def tiou(estimated: TrajectoryFn, gt: GroundTruth, frame: int) -> float:
    """Mean disk IoU over 10 time stamps within one frame's exposure."""
    if not 1 <= frame <= gt.trajectory.n_frames:
        raise ValueError(f"ground truth does not cover frame {frame}")
    times = _frame_times(frame, gt.trajectory.exposure)
    est = estimated.evaluate(times)
    ref = gt.trajectory.evaluate(times)
    r = gt.mask_radius_px
    return float(np.mean([disk_iou(e, g, r) for e, g in zip(est, ref)]))


def sequence_report(estimated: TrajectoryFn, gt: GroundTruth,
                    speed_gt: SpeedProfile | None = None) -> EvalReport:
    """Per-frame TIoU, sequence TIoU (their mean), recall (fraction of
    frames with TIoU > 0) and, when a ground-truth speed profile is
    given, the mean absolute speed difference at its sample times."""
    n = min(estimated.n_frames, gt.trajectory.n_frames)
    if n < 1:
        raise EmptyInputError("no overlapping frames between estimate and ground truth")
    per_frame = tuple(tiou(estimated, gt, t) for t in range(1, n + 1))
    recall = float(np.mean([v > 0.0 for v in per_frame]))
    speed_err = None
    if speed_gt is not None and len(speed_gt):
        est_speed = estimated.speed(speed_gt.times)
        speed_err = float(np.mean(np.abs(est_speed - speed_gt.speeds)))
    return EvalReport(tiou=float(np.mean(per_frame)), recall=recall,
                      per_frame_tiou=per_frame, mean_speed_abs_error=speed_err)
