"""Globally optimal discrete path extraction from accumulated blur kernels.

The path energy combines a data term (negative kernel mass under the
path), a curvature penalty on second differences, and two endpoint terms
pulling the path ends toward the causal start/end columns:

    E(P) = - sum_x H(x, P_x)
           + kappa1 * sum_x |(P_x - P_{x-1}) - (P_{x-1} - P_{x-2})|
           + kappa2 * (cs - x_b) + kappa3 * (x_e - ce)

Per-column steps are restricted to |dy| <= 2 and both path ends are free.
The end column is assumed right of the start column; the grid is mirrored
internally otherwise.

Two solver modes exist. ``exact_state`` tracks (column, row, incoming
step) so the curvature term is exact and the returned energy is the true
global minimum over all admissible paths. The plain mode keeps one energy
and one decision per pixel (six options: five predecessors or "start
here") and charges curvature against the predecessor's recorded decision,
which is greedy with respect to the curvature term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import KernelDimensionError, PathBoundsError
from .types import Axis, BlurKernel, DiscretePath, DpParams, FrameRecord

_STEPS = np.array([-2, -1, 0, 1, 2])
# Option preference on energy ties: smaller |dy| first, negative before
# positive, continuing a path before starting anew.
_STEP_PREF = (2, 1, 3, 0, 4)
_FROM_SINGLE = 5


@dataclass(frozen=True)
class DpProblem:
    """One part's path-extraction problem: the accumulated kernel plus the
    causal start/end columns constraining the path ends."""

    accumulated_kernel: BlurKernel
    causal_start_x: float
    causal_end_x: float
    params: DpParams = DpParams()

    @property
    def start_col(self) -> int:
        return int(round(self.causal_start_x))

    @property
    def end_col(self) -> int:
        return int(round(self.causal_end_x))

    @property
    def needs_flip(self) -> bool:
        return self.start_col > self.end_col


def accumulate_kernels(frames, frame_range, grid_size=None) -> BlurKernel:
    """Element-wise sum of the kernels of frames within ``frame_range``.

    Frames without a kernel contribute zero. ``grid_size`` (width,
    height) supplies the grid when no frame in range carries a kernel.
    """
    t_a, t_b = frame_range
    if t_a > t_b:
        raise ValueError("frame_range must satisfy t_a <= t_b")
    total = None
    for rec in frames:
        if not isinstance(rec, FrameRecord):
            curve, kernel = rec
            rec = FrameRecord(curve, kernel)
        if rec.kernel is None or not t_a <= rec.curve.frame_index <= t_b:
            continue
        values = rec.kernel.values
        if total is None:
            total = values.astype(float, copy=True)
        elif values.shape != total.shape:
            raise KernelDimensionError(
                f"kernel shapes differ: {values.shape} vs {total.shape}")
        else:
            total += values
    if total is None:
        if grid_size is None:
            raise KernelDimensionError("no kernel in range and no grid_size given")
        total = np.zeros((grid_size[1], grid_size[0]))
    return BlurKernel(total)


def energy(path: DiscretePath, problem: DpProblem) -> float:
    """Evaluate E(P) for a path on the problem's kernel grid.

    Independent of the solver: a direct term-by-term computation.
    """
    K = problem.accumulated_kernel.values
    h, w = K.shape
    if not (0 <= path.x_begin and path.x_end < w):
        raise PathBoundsError("path columns leave the kernel grid")
    rows = np.asarray(path.rows)
    if rows.min() < 0 or rows.max() >= h:
        raise PathBoundsError("path rows leave the kernel grid")
    xs = np.arange(path.x_begin, path.x_end + 1)
    data = float(K[rows, xs].sum())
    p = problem.params
    curv = 0.0
    if len(rows) >= 3:
        curv = p.kappa1 * float(np.abs(np.diff(rows, n=2)).sum())
    cs, ce = problem.start_col, problem.end_col
    if cs <= ce:
        ends = p.kappa2 * (cs - path.x_begin) + p.kappa3 * (path.x_end - ce)
    else:
        # Mirrored problem: the causal start sits right of the end, so the
        # roles of the path ends swap (the grid is flipped internally).
        ends = p.kappa2 * (path.x_end - cs) + p.kappa3 * (ce - path.x_begin)
    return -data + curv + ends


def solve(problem: DpProblem, axis: Axis = Axis.COLUMN_WISE):
    """Minimize E over all admissible paths; returns (path, energy).

    Never fails: a degenerate (e.g. all-zero) kernel yields a
    single-point path. The returned path is expressed in the problem's
    own grid coordinates with ``flipped`` recording an internal mirror.
    """
    K = problem.accumulated_kernel.values
    h, w = K.shape
    cs, ce = problem.start_col, problem.end_col
    flip = cs > ce
    if flip:
        K = K[:, ::-1]
        cs, ce = (w - 1) - cs, (w - 1) - ce
    if problem.params.exact_state:
        x_b, x_e, rows, best_e = _solve_exact(K, cs, ce, problem.params)
    else:
        x_b, x_e, rows, best_e = _solve_tables(K, cs, ce, problem.params)
    if flip:
        x_b, x_e = (w - 1) - x_e, (w - 1) - x_b
        rows = rows[::-1]
    path = DiscretePath(x_b, x_e, tuple(rows), axis=axis, flipped=flip)
    return path, best_e


def solve_best_orientation(problem_colwise: DpProblem, problem_rowwise: DpProblem):
    """Solve both grid orientations and keep the lower-energy path."""
    path_c, e_c = solve(problem_colwise, axis=Axis.COLUMN_WISE)
    path_r, e_r = solve(problem_rowwise, axis=Axis.ROW_WISE)
    return (path_c, e_c) if e_c <= e_r else (path_r, e_r)


def orientation_problems(kernel: BlurKernel, start, end, params: DpParams):
    """Column-wise and row-wise problems for one accumulated kernel and
    the causal start/end points (full 2-D points)."""
    colwise = DpProblem(kernel, float(start[0]), float(end[0]), params)
    rowwise = DpProblem(kernel.transposed(), float(start[1]), float(end[1]), params)
    return colwise, rowwise


class _Best:
    """Running minimum with the deterministic tie-break key
    (energy, |x - cs|, x, kind, y, step preference).

    Energies that agree to within a relative 1e-12 count as tied, since
    the endpoint terms are accumulated along different floating-point
    routes for different columns."""

    def __init__(self, cs):
        self.cs = cs
        self.energy = None
        self.tiekey = None
        self.state = None

    def offer(self, e, x, y, kind_rank, step_rank, state):
        tiekey = (abs(x - self.cs), x, kind_rank, y, step_rank)
        if self.energy is None:
            better = True
        else:
            tol = 1e-12 * max(1.0, abs(e), abs(self.energy))
            if e < self.energy - tol:
                better = True
            elif e <= self.energy + tol:
                better = tiekey < self.tiekey
            else:
                better = False
        if better:
            self.energy = e
            self.tiekey = tiekey
            self.state = state


def _solve_exact(K, cs, ce, p: DpParams):
    h, w = K.shape
    INF = np.inf
    option_map = np.array(list(_STEP_PREF) + [_FROM_SINGLE])
    # pre-computed curvature penalties, indexed [new step][preference slot]
    penalty = np.array([[p.kappa1 * abs(dv - _STEPS[dpi]) for dpi in _STEP_PREF]
                        for dv in _STEPS])

    single = -K[:, 0] + p.kappa2 * (cs - 0)
    multi = np.full((h, 5), INF)
    pointers = np.full((w, h, 5), -1, dtype=np.int8)

    best = _Best(cs)
    _offer_column(best, 0, single, multi, ce, p)

    for x in range(1, w):
        col = K[:, x]
        multi_new = np.full((h, 5), INF)
        ptr_col = pointers[x]
        for di, dv in enumerate(_STEPS):
            lo, hi = max(0, dv), h - 1 + min(0, dv)
            if lo > hi:
                continue
            here = slice(lo, hi + 1)
            prev = slice(lo - dv, hi + 1 - dv)
            n = hi - lo + 1
            cands = np.empty((n, 6))
            cands[:, :5] = multi[prev][:, _STEP_PREF] + penalty[di]
            cands[:, 5] = single[prev]
            opt = np.argmin(cands, axis=1)  # first hit respects preference
            multi_new[here, di] = cands[np.arange(n), opt] - col[here]
            ptr_col[here, di] = option_map[opt]
        single = -col + p.kappa2 * (cs - x)
        multi = multi_new
        _offer_column(best, x, single, multi, ce, p)

    x_b, x_e, rows = _backtrack_exact(best.state, pointers)
    return x_b, x_e, rows, float(best.energy)


def _offer_column(best, x, single, multi, ce, p):
    tail = p.kappa3 * (x - ce)
    pref = multi[:, _STEP_PREF]
    flat = int(np.argmin(pref))
    e_multi = float(pref.ravel()[flat])
    if np.isfinite(e_multi):
        y, slot = divmod(flat, 5)
        best.offer(e_multi + tail, x, y, 0, slot, ("multi", x, y, _STEP_PREF[slot]))
    y_s = int(np.argmin(single))
    best.offer(float(single[y_s]) + tail, x, y_s, 1, 0, ("single", x, y_s))


def _backtrack_exact(state, pointers):
    kind, x, y = state[0], state[1], state[2]
    rows = [y]
    if kind == "multi":
        di = state[3]
        while True:
            ptr = int(pointers[x, y, di])
            x, y = x - 1, y - int(_STEPS[di])
            rows.append(y)
            if ptr == _FROM_SINGLE:
                break
            di = ptr
    rows.reverse()
    return x, x + len(rows) - 1, rows


def _solve_tables(K, cs, ce, p: DpParams):
    h, w = K.shape
    M = -K[:, 0] + p.kappa2 * (cs - 0)
    decisions = np.full((w, h), -1, dtype=np.int8)  # -1 = starting point

    best = _Best(cs)
    _offer_tables(best, 0, M, decisions[0], ce, p)

    for x in range(1, w):
        col = K[:, x]
        start_e = -col + p.kappa2 * (cs - x)
        cands = np.full((h, 6), np.inf)
        prev_steps = np.where(decisions[x - 1] >= 0,
                              _STEPS[np.maximum(decisions[x - 1], 0)], 0)
        for slot, di in enumerate(_STEP_PREF):
            dv = int(_STEPS[di])
            lo, hi = max(0, dv), h - 1 + min(0, dv)
            if lo > hi:
                continue
            prev = slice(lo - dv, hi + 1 - dv)
            pen = p.kappa1 * np.abs(dv - prev_steps[prev])
            pen = np.where(decisions[x - 1][prev] >= 0, pen, 0.0)
            cands[lo:hi + 1, slot] = M[prev] + pen
        cands[:, 5] = start_e + col  # column data term added back below
        opt = np.argmin(cands, axis=1)
        M = cands[np.arange(h), opt] - col
        decisions[x] = np.where(opt == 5, -1,
                                np.asarray(_STEP_PREF, dtype=np.int8)[np.minimum(opt, 4)])
        _offer_tables(best, x, M, decisions[x], ce, p)

    _, x, y = best.state
    rows = [y]
    while decisions[x, y] >= 0:
        dv = int(_STEPS[decisions[x, y]])
        x, y = x - 1, y - dv
        rows.append(y)
    rows.reverse()
    return x, x + len(rows) - 1, rows, float(best.energy)


def _offer_tables(best, x, M, dec, ce, p):
    tail = p.kappa3 * (x - ce)
    order = np.lexsort((np.arange(len(M)), np.where(dec >= 0, 0, 1), M))
    y = int(order[0])
    rank = 0 if dec[y] >= 0 else 1
    best.offer(float(M[y]) + tail, x, y, rank, 0, ("table", x, y))
