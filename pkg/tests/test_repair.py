import math

import numpy as np
import pytest

from iplan import kernels
from iplan.core import RESOLUTION, Boundary
from iplan.errors import DataError, NumericsError
from iplan.repair import (
    RepairConfig,
    RepairProblem,
    canonical_box,
    coverage_grad,
    coverage_loss,
    interior_grad_smooth,
    interior_loss,
    interior_loss_smooth,
    point_box_distance,
    repair,
    total_loss,
)


def boundary_from_interior(interior: np.ndarray) -> Boundary:
    stroke = np.zeros_like(interior)
    padded = np.pad(interior.astype(bool), 1)
    grown = np.zeros_like(padded)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            grown |= np.roll(np.roll(padded, dr, 0), dc, 1)
    stroke = (grown[1:-1, 1:-1] & ~interior.astype(bool)).astype(np.uint8)
    return Boundary(
        boundary_mask=stroke,
        frontdoor_mask=np.zeros_like(stroke),
        interior_mask=interior.astype(np.uint8),
    )


def random_small_problem(rng, n_boxes=None):
    """Interior confined to a 16x16 window with random float boxes nearby."""
    top = int(rng.integers(8, 100))
    left = int(rng.integers(8, 100))
    h = int(rng.integers(8, 17))
    w = int(rng.integers(8, 17))
    interior = np.zeros((RESOLUTION, RESOLUTION), dtype=np.uint8)
    interior[top : top + h, left : left + w] = 1
    boundary = boundary_from_interior(interior)
    n = n_boxes or int(rng.integers(1, 5))
    boxes = []
    for _ in range(n):
        bt = rng.uniform(top - 4, top + h - 2)
        bl = rng.uniform(left - 4, left + w - 2)
        boxes.append([bt, bl, bt + rng.uniform(2, h), bl + rng.uniform(2, w)])
    return RepairProblem(boundary, np.array(boxes))


# -- independent pixel-level oracles ---------------------------------------

def oracle_distance(p, box):
    r, c = p
    top, left, bottom, right = box
    if top <= r < bottom and left <= c < right:
        return 0.0
    dr = max(top - r, r - bottom, 0.0)
    dc = max(left - c, c - right, 0.0)
    return math.sqrt(dr * dr + dc * dc)


def oracle_coverage(problem):
    rows, cols = np.nonzero(problem.boundary.interior_mask)
    total = 0.0
    for r, c in zip(rows.tolist(), cols.tolist()):
        total += min(oracle_distance((r, c), box) ** 2 for box in problem.boxes)
    return total / len(rows)


def oracle_interior(problem):
    bt, bl, bb, br = problem.bbox
    target = (bt, bl, bb - 1.0, br - 1.0)  # pixel-set extent of the bbox
    numer = 0.0
    denom = 0
    for top, left, bottom, right in problem.boxes:
        for r in range(max(math.ceil(top), 0), min(math.ceil(bottom), RESOLUTION)):
            for c in range(max(math.ceil(left), 0), min(math.ceil(right), RESOLUTION)):
                tr, tl, tb, trr = target
                dr = max(tr - r, r - tb, 0.0)
                dc = max(tl - c, c - trr, 0.0)
                numer += dr * dr + dc * dc
                denom += 1
    return numer / denom


class TestPointBoxDistance:
    def test_inside_zero(self):
        assert point_box_distance((15, 15), (10, 10, 20, 20)) == 0.0

    def test_axis_offset(self):
        assert point_box_distance((10, 25), (10, 10, 20, 20)) == 5.0

    def test_corner_offset(self):
        assert point_box_distance((7, 6), (10, 10, 20, 20)) == 5.0

    def test_against_boundary_sampling(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            box = sorted(rng.uniform(5, 60, 2)) + sorted(rng.uniform(5, 60, 2))
            box = (box[0], box[2], box[1] + 2, box[3] + 2)
            p = rng.uniform(0, 70, 2)
            top, left, bottom, right = box
            ts = np.linspace(0, 1, 200)
            edge_pts = np.concatenate(
                [
                    np.stack([np.full_like(ts, top), left + ts * (right - left)], 1),
                    np.stack([np.full_like(ts, bottom), left + ts * (right - left)], 1),
                    np.stack([top + ts * (bottom - top), np.full_like(ts, left)], 1),
                    np.stack([top + ts * (bottom - top), np.full_like(ts, right)], 1),
                ]
            )
            sampled = np.min(np.hypot(edge_pts[:, 0] - p[0], edge_pts[:, 1] - p[1]))
            d = point_box_distance(p, box)
            if d > 0:
                assert abs(d - sampled) < 0.51


class TestLossesAgainstOracle:
    def test_twenty_random_problems(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            problem = random_small_problem(rng)
            assert coverage_loss(problem) == pytest.approx(oracle_coverage(problem), abs=1e-9)
            assert interior_loss(problem) == pytest.approx(oracle_interior(problem), abs=1e-9)

    def test_coverage_zero_iff_covered(self):
        interior = np.zeros((RESOLUTION, RESOLUTION), dtype=np.uint8)
        interior[10:20, 10:26] = 1
        boundary = boundary_from_interior(interior)
        tiling = np.array([[10, 10, 20, 18], [10, 18, 20, 26]], float)
        assert coverage_loss(RepairProblem(boundary, tiling)) == 0.0
        shrunk = tiling.copy()
        shrunk[1, 3] -= 2  # uncovers two columns
        assert coverage_loss(RepairProblem(boundary, shrunk)) > 0.0

    def test_interior_zero_iff_inside(self):
        interior = np.zeros((RESOLUTION, RESOLUTION), dtype=np.uint8)
        interior[10:20, 10:26] = 1
        boundary = boundary_from_interior(interior)
        inside = np.array([[10, 10, 20, 26]], float)
        assert interior_loss(RepairProblem(boundary, inside)) == 0.0
        # one pixel row beyond the footprint bbox picks up loss
        poking = np.array([[10, 10, 22, 26]], float)
        assert interior_loss(RepairProblem(boundary, poking)) > 0.0

    def test_coverage_monotone_in_boxes(self):
        rng = np.random.default_rng(3)
        problem = random_small_problem(rng, n_boxes=2)
        bigger = RepairProblem(
            problem.boundary, np.vstack([problem.boxes, [[0.0, 0.0, 5.0, 5.0]]])
        )
        assert coverage_loss(bigger) <= coverage_loss(problem) + 1e-12

    def test_interior_permutation_invariant(self):
        rng = np.random.default_rng(4)
        problem = random_small_problem(rng, n_boxes=3)
        permuted = RepairProblem(problem.boundary, problem.boxes[::-1].copy())
        assert interior_loss(problem) == pytest.approx(interior_loss(permuted), abs=1e-12)

    def test_interior_protrusion_matches_oracle(self):
        interior = np.zeros((RESOLUTION, RESOLUTION), dtype=np.uint8)
        interior[10:20, 10:26] = 1
        boundary = boundary_from_interior(interior)
        # protrudes 3 px beyond the right bbox edge
        problem = RepairProblem(boundary, np.array([[10, 20, 20, 30]], float))
        assert interior_loss(problem) == pytest.approx(oracle_interior(problem), abs=1e-12)
        assert interior_loss(problem) > 0

    def test_strict_mode_sees_notches(self):
        # an L-shaped interior: the notch is inside the bbox, so only the
        # strict variant penalizes a box that covers it
        interior = np.zeros((RESOLUTION, RESOLUTION), dtype=np.uint8)
        interior[10:40, 10:40] = 1
        interior[10:25, 25:40] = 0  # carve the top-right notch
        boundary = boundary_from_interior(interior)
        over_notch = np.array([[12, 27, 22, 37]], float)
        problem = RepairProblem(boundary, over_notch)
        assert interior_loss(problem) == 0.0
        assert interior_loss(problem, strict=True) > 0.0
        # fully inside the remaining interior: both are zero
        inside = RepairProblem(boundary, np.array([[26, 12, 38, 38]], float))
        assert interior_loss(inside, strict=True) == 0.0

    def test_empty_boxes_raise(self):
        interior = np.zeros((RESOLUTION, RESOLUTION), dtype=np.uint8)
        interior[10:20, 10:20] = 1
        boundary = boundary_from_interior(interior)
        with pytest.raises(DataError):
            coverage_loss(RepairProblem(boundary, np.empty((0, 4))))


class TestGradients:
    def _jitter(self, rng, problem):
        jittered = problem.boxes + rng.uniform(0.15, 0.42, problem.boxes.shape)
        return RepairProblem(problem.boundary, jittered)

    def test_coverage_grad_matches_fd(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            problem = self._jitter(rng, random_small_problem(rng))
            grad = coverage_grad(problem)
            h = 1e-3
            for i in range(problem.boxes.shape[0]):
                for k in range(4):
                    plus = problem.boxes.copy()
                    plus[i, k] += h
                    minus = problem.boxes.copy()
                    minus[i, k] -= h
                    fd = (
                        coverage_loss(RepairProblem(problem.boundary, plus))
                        - coverage_loss(RepairProblem(problem.boundary, minus))
                    ) / (2 * h)
                    denom = max(abs(fd), abs(grad[i, k]), 1e-8)
                    assert abs(fd - grad[i, k]) / denom < 1e-3

    def test_interior_smooth_grad_matches_fd(self):
        rng = np.random.default_rng(22)
        for _ in range(5):
            problem = self._jitter(rng, random_small_problem(rng))
            grad = interior_grad_smooth(problem)
            h = 1e-3
            for i in range(problem.boxes.shape[0]):
                for k in range(4):
                    plus = problem.boxes.copy()
                    plus[i, k] += h
                    minus = problem.boxes.copy()
                    minus[i, k] -= h
                    fd = (
                        interior_loss_smooth(RepairProblem(problem.boundary, plus))
                        - interior_loss_smooth(RepairProblem(problem.boundary, minus))
                    ) / (2 * h)
                    denom = max(abs(fd), abs(grad[i, k]), 1e-8)
                    assert abs(fd - grad[i, k]) / denom < 1e-3


class TestRepair:
    def _tiling_problem(self):
        interior = np.zeros((RESOLUTION, RESOLUTION), dtype=np.uint8)
        interior[20:60, 20:80] = 1
        boundary = boundary_from_interior(interior)
        tiling = np.array([[20, 20, 60, 50], [20, 50, 60, 80]], float)
        return boundary, tiling

    def test_optimal_unchanged(self):
        boundary, tiling = self._tiling_problem()
        result = repair(RepairProblem(boundary, tiling))
        assert result.iterations == 0
        assert np.array_equal(result.boxes, tiling)

    def test_shifted_box_recovers(self):
        boundary, tiling = self._tiling_problem()
        shifted = tiling.copy()
        shifted[1] += [0, 5, 0, 5]
        initial = total_loss(RepairProblem(boundary, shifted))
        result = repair(RepairProblem(boundary, shifted))
        final = total_loss(RepairProblem(boundary, result.boxes))
        assert final < 0.1 * initial
        losses = result.losses
        assert all(losses[i + 1] <= losses[i] + 1e-12 for i in range(len(losses) - 1))

    def test_never_increases(self):
        rng = np.random.default_rng(33)
        for _ in range(5):
            problem = random_small_problem(rng)
            result = repair(problem, RepairConfig(max_iters=50))
            assert result.losses[-1] <= result.losses[0] + 1e-12

    def test_nonfinite_raises(self):
        boundary, tiling = self._tiling_problem()
        bad = tiling.copy()
        bad[0, 0] = np.nan
        with pytest.raises((NumericsError, DataError)):
            repair(RepairProblem(boundary, bad))


class TestCanonicalBox:
    def test_reorder(self):
        assert canonical_box((20, 30, 10, 5)).tolist() == [10, 5, 20, 30]


@pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba disabled")
class TestKernelPaths:
    def test_coverage_paths_agree(self):
        rng = np.random.default_rng(44)
        for _ in range(5):
            problem = random_small_problem(rng)
            rows, cols = problem.interior_points()
            v1, g1 = kernels.coverage_value_grad(rows, cols, problem.boxes)
            v2, g2 = kernels.coverage_value_grad_numpy(rows, cols, problem.boxes)
            assert v1 == pytest.approx(v2, rel=1e-12, abs=1e-12)
            assert np.allclose(g1, g2, atol=1e-10)

    def test_interior_paths_agree(self):
        rng = np.random.default_rng(45)
        for _ in range(5):
            problem = random_small_problem(rng)
            bbox = np.asarray(problem.bbox)
            closed = np.array([bbox[0], bbox[1], bbox[2] - 1, bbox[3] - 1])
            n1, d1 = kernels.interior_pixel_sums(problem.boxes, closed, RESOLUTION)
            n2, d2 = kernels.interior_pixel_sums_numpy(problem.boxes, closed, RESOLUTION)
            assert n1 == pytest.approx(n2, rel=1e-12, abs=1e-12)
            assert d1 == d2
