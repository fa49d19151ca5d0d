import numpy as np
import pytest

from fmotraj.dp import (DpProblem, accumulate_kernels, energy,
                        orientation_problems, solve, solve_best_orientation)
from fmotraj.errors import KernelDimensionError, PathBoundsError
from fmotraj.types import Axis, BlurKernel, DiscretePath, DpParams

from helpers import brute_force_min_energy, frame_record, kernel_with_curve


def random_kernel(rng, width=None, height=None):
    w = width or rng.integers(1, 9)
    h = height or rng.integers(1, 9)
    return BlurKernel(rng.random((h, w)))


class TestAccumulate:
    def test_additivity(self):
        base = np.zeros((3, 3))
        base[1, 1] = 1.0
        frames = [frame_record(1, kernel=BlurKernel(base)),
                  frame_record(2, kernel=BlurKernel(base))]
        out = accumulate_kernels(frames, (1, 2))
        assert out.values[1, 1] == 2.0
        assert out.values.sum() == 2.0

    def test_single_frame_identity(self):
        rng = np.random.default_rng(1)
        k = random_kernel(rng, 4, 4)
        out = accumulate_kernels([frame_record(1, kernel=k)], (1, 1))
        assert np.array_equal(out.values, k.values)

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(2)
        kernels = [random_kernel(rng, 8, 8) for _ in range(10)]
        frames = [frame_record(i + 1, kernel=k) for i, k in enumerate(kernels)]
        out = accumulate_kernels(frames, (1, 10))
        expected = np.zeros((8, 8))
        for k in kernels:
            for y in range(8):
                for x in range(8):
                    expected[y, x] += k.values[y, x]
        assert np.allclose(out.values, expected, atol=1e-12)

    def test_absent_kernels_contribute_zero(self):
        rng = np.random.default_rng(3)
        k = random_kernel(rng, 5, 5)
        frames = [frame_record(1, kernel=k), frame_record(2, kernel=None)]
        out = accumulate_kernels(frames, (1, 2))
        assert np.array_equal(out.values, k.values)

    def test_dimension_mismatch(self):
        frames = [frame_record(1, kernel=BlurKernel(np.ones((3, 3)))),
                  frame_record(2, kernel=BlurKernel(np.ones((4, 3))))]
        with pytest.raises(KernelDimensionError):
            accumulate_kernels(frames, (1, 2))


class TestEnergy:
    def test_single_point(self):
        rng = np.random.default_rng(4)
        k = random_kernel(rng, 5, 5)
        params = DpParams(kappa1=0.1, kappa2=0.0, kappa3=0.0)
        problem = DpProblem(k, 2.0, 2.0, params)
        path = DiscretePath(2, 2, (3,))
        assert energy(path, problem) == pytest.approx(-k.values[3, 2], abs=1e-12)

    def test_straight_path_zero_curvature(self):
        k = BlurKernel(np.ones((5, 5)))
        params = DpParams(kappa1=0.1, kappa2=0.0, kappa3=0.0)
        problem = DpProblem(k, 0.0, 2.0, params)
        path = DiscretePath(0, 2, (2, 2, 2))
        assert energy(path, problem) == pytest.approx(-3.0, abs=1e-12)

    def test_term_by_term_oracle(self):
        rng = np.random.default_rng(5)
        k = random_kernel(rng, 6, 6)
        params = DpParams()
        problem = DpProblem(k, 1.0, 4.0, params)
        rows = (2, 4, 3, 1)
        path = DiscretePath(1, 4, rows)
        # independent scalar recomputation
        data = sum(k.values[rows[i], 1 + i] for i in range(4))
        curv = sum(abs((rows[i + 2] - rows[i + 1]) - (rows[i + 1] - rows[i]))
                   for i in range(2))
        expected = -data + 0.1 * curv + 0.1 * (1 - 1) + 0.1 * (4 - 4)
        assert energy(path, problem) == pytest.approx(expected, abs=1e-12)

    def test_out_of_bounds(self):
        k = BlurKernel(np.ones((3, 3)))
        problem = DpProblem(k, 0.0, 2.0, DpParams())
        with pytest.raises(PathBoundsError):
            energy(DiscretePath(0, 2, (0, 2, 4)), problem)


class TestSolve:
    def test_one_pixel_kernel(self):
        k = BlurKernel(np.array([[2.5]]))
        problem = DpProblem(k, 0.0, 0.0, DpParams(kappa2=0.0, kappa3=0.0))
        path, e = solve(problem)
        assert (path.x_begin, path.x_end, path.rows) == (0, 0, (0,))
        assert e == pytest.approx(-2.5, abs=1e-12)

    def test_all_zero_kernel_degenerates_near_start(self):
        k = BlurKernel(np.zeros((4, 9)))
        problem = DpProblem(k, 6.0, 2.0, DpParams())  # also exercises the flip
        path, e = solve(problem)
        assert len(path) == 1
        assert path.x_begin == 6
        assert e == pytest.approx(energy(path, problem), abs=1e-12)

    @pytest.mark.parametrize("exact", [True, False])
    def test_matches_brute_force_without_curvature(self, exact):
        # with kappa1 = 0 the per-pixel scheme is exact as well
        rng = np.random.default_rng(6)
        for _ in range(60):
            k = random_kernel(rng)
            params = DpParams(kappa1=0.0,
                              kappa2=float(rng.choice([0.0, 0.1, 0.5])),
                              kappa3=float(rng.choice([0.0, 0.1, 0.5])),
                              exact_state=exact)
            cs = float(rng.uniform(0, k.width - 1))
            ce = float(rng.uniform(0, k.width - 1))
            problem = DpProblem(k, cs, ce, params)
            path, e = solve(problem)
            expected = brute_force_min_energy(k.values, cs, ce, params)
            assert e == pytest.approx(expected, abs=1e-9)
            assert energy(path, problem) == pytest.approx(e, abs=1e-9)

    def test_exact_state_matches_brute_force(self):
        rng = np.random.default_rng(7)
        for _ in range(80):
            k = random_kernel(rng)
            params = DpParams(kappa1=float(rng.choice([0.0, 0.1, 0.5])),
                              kappa2=float(rng.choice([0.0, 0.1, 0.5])),
                              kappa3=float(rng.choice([0.0, 0.1, 0.5])))
            cs = float(rng.uniform(0, k.width - 1))
            ce = float(rng.uniform(0, k.width - 1))
            problem = DpProblem(k, cs, ce, params)
            path, e = solve(problem)
            expected = brute_force_min_energy(k.values, cs, ce, params)
            assert e == pytest.approx(expected, abs=1e-9)

    def test_paper_scheme_never_beats_global_minimum(self):
        rng = np.random.default_rng(8)
        for _ in range(40):
            k = random_kernel(rng)
            kw = dict(kappa1=0.1, kappa2=0.1, kappa3=0.1)
            cs = float(rng.uniform(0, k.width - 1))
            ce = float(rng.uniform(0, k.width - 1))
            _, e_exact = solve(DpProblem(k, cs, ce, DpParams(**kw)))
            path_t, e_tables = solve(DpProblem(k, cs, ce, DpParams(exact_state=False, **kw)))
            assert e_tables >= e_exact - 1e-9
            problem_t = DpProblem(k, cs, ce, DpParams(exact_state=False, **kw))
            assert energy(path_t, problem_t) == pytest.approx(e_tables, abs=1e-9)

    def test_recovers_rasterized_parabola(self):
        xs = np.arange(40)
        ys = 25.0 - 1.6 * xs + 0.04 * xs**2
        kernel, rows_true = kernel_with_curve(
            40, 30, ys, noise_sigma=0.05, rng=np.random.default_rng(9))
        problem = DpProblem(kernel, 0.0, 39.0, DpParams())
        path, _ = solve(problem)
        assert path.x_begin == 0 and path.x_end == 39
        rms = np.sqrt(np.mean((np.asarray(path.rows) - rows_true) ** 2))
        assert rms <= 1.0


class TestOrientation:
    def test_horizontal_line_prefers_column_wise(self):
        values = np.zeros((9, 9))
        values[4, :] = 1.0
        k = BlurKernel(values)
        colwise, rowwise = orientation_problems(k, (0.0, 4.0), (8.0, 4.0), DpParams())
        path, e = solve_best_orientation(colwise, rowwise)
        assert path.axis is Axis.COLUMN_WISE
        _, e_row = solve(rowwise)
        assert e < e_row

    def test_vertical_line_prefers_row_wise(self):
        values = np.zeros((9, 9))
        values[:, 4] = 1.0
        k = BlurKernel(values)
        colwise, rowwise = orientation_problems(k, (4.0, 0.0), (4.0, 8.0), DpParams())
        path, e = solve_best_orientation(colwise, rowwise)
        assert path.axis is Axis.ROW_WISE
        _, e_col = solve(colwise)
        assert e < e_col

    def test_returns_minimum_of_both(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            k = random_kernel(rng, 8, 8)
            colwise, rowwise = orientation_problems(
                k, (rng.uniform(0, 7), rng.uniform(0, 7)),
                (rng.uniform(0, 7), rng.uniform(0, 7)), DpParams())
            _, e = solve_best_orientation(colwise, rowwise)
            _, e_c = solve(colwise)
            _, e_r = solve(rowwise)
            assert e == pytest.approx(min(e_c, e_r), abs=1e-12)

    def test_row_wise_points_map_back_to_image(self):
        values = np.zeros((9, 5))
        values[:, 2] = 1.0
        k = BlurKernel(values)
        colwise, rowwise = orientation_problems(k, (2.0, 0.0), (2.0, 8.0), DpParams())
        path, _ = solve_best_orientation(colwise, rowwise)
        pts = path.points_time_order()
        assert np.all(pts[:, 0] == 2.0)
        assert np.all(np.diff(pts[:, 1]) == 1.0)


class TestInvariants:
    def test_step_bound(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            k = random_kernel(rng)
            problem = DpProblem(k, rng.uniform(0, k.width - 1),
                                rng.uniform(0, k.width - 1), DpParams())
            path, _ = solve(problem)
            if len(path) > 1:
                assert np.max(np.abs(np.diff(path.rows))) <= 2

    def test_monotone_in_added_mass(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            k = random_kernel(rng, 6, 6)
            params = DpParams(kappa3=0.0)
            _, e0 = solve(DpProblem(k, 0.0, 5.0, params))
            widened = np.concatenate([k.values, rng.uniform(0.1, 1.0, (6, 1))], axis=1)
            _, e1 = solve(DpProblem(BlurKernel(widened), 0.0, 5.0, params))
            assert e1 <= e0 + 1e-12

    def test_solver_and_evaluator_agree(self):
        rng = np.random.default_rng(13)
        for _ in range(40):
            k = random_kernel(rng)
            problem = DpProblem(k, rng.uniform(0, k.width - 1),
                                rng.uniform(0, k.width - 1), DpParams())
            path, e = solve(problem)
            assert energy(path, problem) == pytest.approx(e, abs=1e-9)

    def test_flip_equivariance(self):
        rng = np.random.default_rng(14)
        for _ in range(30):
            k = random_kernel(rng, 7, 6)
            cs, ce = sorted(rng.uniform(0, 6, size=2))
            params = DpParams()  # kappa2 == kappa3 is required for symmetry
            p1 = DpProblem(k, cs, ce, params)
            mirrored = BlurKernel(k.values[:, ::-1].copy())
            p2 = DpProblem(mirrored, 6.0 - ce, 6.0 - cs, params)
            path1, e1 = solve(p1)
            _, e2 = solve(p2)
            assert e1 == pytest.approx(e2, abs=1e-9)
            mirrored_path = DiscretePath(6 - path1.x_end, 6 - path1.x_begin,
                                         tuple(reversed(path1.rows)))
            assert energy(mirrored_path, p2) == pytest.approx(e1, abs=1e-9)

    def test_flipped_metadata_and_time_order(self):
        xs = np.arange(20)
        kernel, _ = kernel_with_curve(20, 10, 4 + 0.1 * xs)
        problem = DpProblem(kernel, 19.0, 0.0, DpParams())
        path, _ = solve(problem)
        assert path.flipped
        pts = path.points_time_order()
        assert pts[0, 0] > pts[-1, 0]  # time runs right to left
