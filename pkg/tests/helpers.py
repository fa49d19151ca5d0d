"""Shared test utilities, chiefly the brute-force path-energy oracle."""

import numpy as np

from fmotraj.types import BlurKernel, FrameCurve, FrameRecord

# cache of (height, length) -> (valid paths (n, L) int16, curvature sums (n,))
_PATH_CACHE = {}


def _all_paths(height, length):
    key = (height, length)
    if key in _PATH_CACHE:
        return _PATH_CACHE[key]
    if length == 1:
        paths = np.arange(height, dtype=np.int16).reshape(-1, 1)
        curv = np.zeros(height)
    else:
        grids = np.indices((5,) * (length - 1)).reshape(length - 1, -1).T - 2
        cum = np.cumsum(grids, axis=1)
        y0 = np.arange(height, dtype=np.int16)
        paths = (y0[:, None, None] + np.concatenate(
            [np.zeros((grids.shape[0], 1), dtype=np.int64), cum], axis=1)[None])
        paths = paths.reshape(-1, length)
        valid = np.all((paths >= 0) & (paths < height), axis=1)
        paths = paths[valid].astype(np.int16)
        steps = np.diff(paths, axis=1)
        if length >= 3:
            curv = np.abs(np.diff(steps, axis=1)).sum(axis=1).astype(float)
        else:
            curv = np.zeros(len(paths))
    _PATH_CACHE[key] = (paths, curv)
    return paths, curv


def brute_force_min_energy(kernel_values, causal_start_x, causal_end_x, params):
    """Exhaustively enumerate every admissible path (all column spans, all
    step sequences with |dy| <= 2) and return the minimum energy."""
    K = np.asarray(kernel_values, dtype=float)
    h, w = K.shape
    cs, ce = int(round(causal_start_x)), int(round(causal_end_x))
    if cs > ce:
        K = K[:, ::-1]
        cs, ce = (w - 1) - cs, (w - 1) - ce
    best = np.inf
    for x_b in range(w):
        for x_e in range(x_b, w):
            length = x_e - x_b + 1
            paths, curv = _all_paths(h, length)
            cols = K[:, x_b:x_e + 1]
            data = cols[paths, np.arange(length)].sum(axis=1)
            e = (-data + params.kappa1 * curv
                 + params.kappa2 * (cs - x_b) + params.kappa3 * (x_e - ce))
            m = float(e.min())
            if m < best:
                best = m
    return best


def kernel_with_curve(width, height, ys, noise_sigma=0.0, rng=None):
    """Kernel with value 1 at (x, round(ys[x])) per column, plus optional
    clipped Gaussian noise."""
    values = np.zeros((height, width))
    rows = np.round(np.asarray(ys)).astype(int)
    values[rows, np.arange(width)] = 1.0
    if noise_sigma > 0:
        rng = rng or np.random.default_rng(0)
        values = np.clip(values + rng.normal(0.0, noise_sigma, values.shape), 0.0, None)
    return BlurKernel(values), rows


def frame_record(index, start=(0.0, 0.0), end=(1.0, 1.0), kernel=None):
    return FrameRecord(FrameCurve(index, start, end), kernel)
