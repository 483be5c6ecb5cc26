"""Geometric repair of predicted boxes.

Two pixel-exact objectives drive the repair: a coverage term (mean squared
distance from each interior pixel to its nearest box) and an interior term
(mean squared distance from each box pixel to the footprint bounding box).
Boxes are adjusted by projected gradient descent with a backtracking line
search, so the reported loss never increases.

The coverage term is differentiable almost everywhere in the box corners and
is descended directly. The interior pixel sum is piecewise constant in the
corners (pixels enter and leave the box in discrete jumps), so its descent
direction comes from a closed-form continuous relaxation that integrates the
same squared clamp distance over the box area; the exact pixel sum is still
what the line search and the trace report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import RESOLUTION, Boundary
from .errors import DataError, NumericsError
from .kernels import coverage_value_grad, interior_pixel_sums

MIN_BOX_SIDE = 1.0


def canonical_box(box) -> np.ndarray:
    """Order a raw (top, left, bottom, right) tuple so top<bottom, left<right."""
    top, left, bottom, right = (float(v) for v in box)
    if top > bottom:
        top, bottom = bottom, top
    if left > right:
        left, right = right, left
    return np.array([top, left, bottom, right], dtype=np.float64)


def point_box_distance(p, box) -> float:
    """Distance from a point to a box: 0 inside (half-open), else the
    euclidean clamp distance to the closed box."""
    r, c = float(p[0]), float(p[1])
    top, left, bottom, right = (float(v) for v in box)
    if top <= r < bottom and left <= c < right:
        return 0.0
    dr = max(top - r, r - bottom, 0.0)
    dc = max(left - c, c - right, 0.0)
    return math.hypot(dr, dc)


@dataclass
class RepairProblem:
    boundary: Boundary
    boxes: np.ndarray
    w_coverage: float = 1.0
    w_interior: float = 1.0
    bbox: tuple[float, float, float, float] = field(init=False)

    def __post_init__(self):
        boxes = np.asarray(self.boxes, dtype=np.float64).reshape(-1, 4)
        self.boxes = np.stack([canonical_box(b) for b in boxes]) if len(boxes) else boxes
        self.bbox = self.boundary.footprint_bbox()

    def interior_points(self) -> tuple[np.ndarray, np.ndarray]:
        rows, cols = np.nonzero(self.boundary.interior_mask)
        return rows.astype(np.float64), cols.astype(np.float64)


def coverage_loss(problem: RepairProblem) -> float:
    value, _ = _coverage(problem)
    return value


def coverage_grad(problem: RepairProblem) -> np.ndarray:
    _, grad = _coverage(problem)
    return grad


def _coverage(problem: RepairProblem) -> tuple[float, np.ndarray]:
    if problem.boxes.shape[0] < 1:
        raise DataError("coverage loss needs at least one box")
    rows, cols = problem.interior_points()
    if rows.shape[0] == 0:
        raise DataError("boundary has an empty interior")
    value, grad = coverage_value_grad(rows, cols, problem.boxes)
    return value / rows.shape[0], grad / rows.shape[0]


def interior_loss(problem: RepairProblem, strict: bool = False) -> float:
    """Mean squared distance of box pixels to the footprint.

    Default: clamp distance to the footprint bounding box, measured to the
    closed pixel extent [top, bottom-1] x [left, right-1] so the loss is
    zero exactly when every box pixel lies inside the bbox. Boxes hanging
    over non-rectangular notches are thus not penalized; ``strict`` instead
    measures distance to the interior mask itself.
    """
    if problem.boxes.shape[0] < 1:
        raise DataError("interior loss needs at least one box")
    if strict:
        return _interior_loss_strict(problem)
    bbox = np.asarray(problem.bbox, dtype=np.float64)
    closed = np.array([bbox[0], bbox[1], bbox[2] - 1.0, bbox[3] - 1.0])
    numer, denom = interior_pixel_sums(problem.boxes, closed, RESOLUTION)
    if denom == 0:
        raise DataError("all boxes are degenerate (no pixels)")
    return numer / denom


def _interior_loss_strict(problem: RepairProblem) -> float:
    from scipy.ndimage import distance_transform_edt

    dist = distance_transform_edt(problem.boundary.interior_mask == 0)
    numer = 0.0
    denom = 0
    for top, left, bottom, right in problem.boxes:
        r0 = max(int(np.ceil(top)), 0)
        r1 = min(int(np.ceil(bottom)), RESOLUTION)
        c0 = max(int(np.ceil(left)), 0)
        c1 = min(int(np.ceil(right)), RESOLUTION)
        if r0 >= r1 or c0 >= c1:
            continue
        patch = dist[r0:r1, c0:c1]
        numer += float((patch * patch).sum())
        denom += patch.size
    if denom == 0:
        raise DataError("all boxes are degenerate (no pixels)")
    return numer / denom


def _clamp_sq_integral(a: float, b: float, lo: float, hi: float) -> float:
    # integral over [a, b] of max(lo - y, y - hi, 0)^2 dy, assuming a <= b
    total = 0.0
    if a < lo:
        u = min(b, lo)
        total += ((lo - a) ** 3 - (lo - u) ** 3) / 3.0
    if b > hi:
        v = max(a, hi)
        total += ((b - hi) ** 3 - (v - hi) ** 3) / 3.0
    return total


def _clamp_dist(y: float, lo: float, hi: float) -> float:
    return max(lo - y, y - hi, 0.0)


def interior_loss_smooth(problem: RepairProblem) -> float:
    value, _ = _interior_smooth(problem)
    return value


def interior_grad_smooth(problem: RepairProblem) -> np.ndarray:
    _, grad = _interior_smooth(problem)
    return grad


def _interior_smooth(problem: RepairProblem) -> tuple[float, np.ndarray]:
    """Continuous relaxation of the interior pixel sum and its gradient.

    Replaces the sum over box pixels with the integral of the squared clamp
    distance over the box rectangle, which is differentiable in the corners.
    """
    boxes = problem.boxes
    if boxes.shape[0] < 1:
        raise DataError("interior loss needs at least one box")
    bt, bl, bb, br = problem.bbox
    bb -= 1.0
    br -= 1.0

    numer = 0.0
    denom = 0.0
    parts = []
    for top, left, bottom, right in boxes:
        w = right - left
        h = bottom - top
        i_row = _clamp_sq_integral(top, bottom, bt, bb)
        i_col = _clamp_sq_integral(left, right, bl, br)
        numer += w * i_row + h * i_col
        denom += w * h
        parts.append((w, h, i_row, i_col))
    if denom <= 0.0:
        raise DataError("all boxes are degenerate (zero area)")

    grad = np.zeros_like(boxes)
    for i, ((top, left, bottom, right), (w, h, i_row, i_col)) in enumerate(
        zip(boxes, parts)
    ):
        dn = np.array(
            [
                -w * _clamp_dist(top, bt, bb) ** 2 - i_col,
                -h * _clamp_dist(left, bl, br) ** 2 - i_row,
                w * _clamp_dist(bottom, bt, bb) ** 2 + i_col,
                h * _clamp_dist(right, bl, br) ** 2 + i_row,
            ]
        )
        dd = np.array([-w, -h, w, h])
        grad[i] = (dn * denom - numer * dd) / (denom * denom)
    return numer / denom, grad


def total_loss(problem: RepairProblem) -> float:
    return problem.w_coverage * coverage_loss(problem) + problem.w_interior * interior_loss(
        problem
    )


def _project(boxes: np.ndarray) -> np.ndarray:
    out = boxes.copy()
    for i in range(out.shape[0]):
        out[i] = canonical_box(out[i])
        top, left, bottom, right = out[i]
        top = min(max(top, 0.0), RESOLUTION - MIN_BOX_SIDE)
        left = min(max(left, 0.0), RESOLUTION - MIN_BOX_SIDE)
        bottom = min(max(bottom, top + MIN_BOX_SIDE), RESOLUTION)
        right = min(max(right, left + MIN_BOX_SIDE), RESOLUTION)
        out[i] = (top, left, bottom, right)
    return out


@dataclass
class RepairConfig:
    max_iters: int = 500
    tol: float = 1e-6
    window: int = 10
    step_init: float = 1.0
    backtrack: float = 0.5
    max_halvings: int = 25


@dataclass
class RepairResult:
    boxes: np.ndarray
    trace: list[tuple[int, float, float]]
    iterations: int

    @property
    def losses(self) -> list[float]:
        return [c + i for _, c, i in self.trace]


def repair(problem: RepairProblem, cfg: RepairConfig | None = None) -> RepairResult:
    """Descend the combined loss over continuous box coordinates.

    Monotone by construction: a step is only taken when it strictly reduces
    the exact total loss; otherwise the step is halved, and the run stops
    when no admissible step remains or the loss plateaus within cfg.tol.
    """
    cfg = cfg or RepairConfig()
    boxes = _project(problem.boxes)
    work = RepairProblem(
        problem.boundary, boxes, problem.w_coverage, problem.w_interior
    )

    history: list[float] = []
    trace: list[tuple[int, float, float]] = []
    current = _evaluate(work)
    trace.append((0, current[0], current[1]))
    history.append(_combine(work, current))

    iterations = 0
    for it in range(1, cfg.max_iters + 1):
        loss = history[-1]
        if not np.isfinite(loss):
            raise NumericsError(f"non-finite repair loss at iteration {it}")
        if loss <= 0.0:
            break
        direction = -(
            work.w_coverage * coverage_grad(work)
            + work.w_interior * interior_grad_smooth(work)
        )
        if not np.isfinite(direction).all():
            raise NumericsError(f"non-finite gradient at iteration {it}")
        step = cfg.step_init
        accepted = False
        for _ in range(cfg.max_halvings):
            candidate = _project(work.boxes + step * direction)
            trial = RepairProblem(
                work.boundary, candidate, work.w_coverage, work.w_interior
            )
            values = _evaluate(trial)
            if _combine(trial, values) < loss:
                work = trial
                current = values
                accepted = True
                break
            step *= cfg.backtrack
        if not accepted:
            break
        iterations = it
        trace.append((it, current[0], current[1]))
        history.append(_combine(work, current))
        if len(history) > cfg.window and history[-cfg.window - 1] - history[-1] < cfg.tol:
            break
    return RepairResult(boxes=work.boxes.copy(), trace=trace, iterations=iterations)


def _evaluate(problem: RepairProblem) -> tuple[float, float]:
    return coverage_loss(problem), interior_loss(problem)


def _combine(problem: RepairProblem, values: tuple[float, float]) -> float:
    return problem.w_coverage * values[0] + problem.w_interior * values[1]
