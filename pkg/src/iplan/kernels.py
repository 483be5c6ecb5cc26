"""Numeric inner loops for the geometric losses.

Every kernel ships in two equivalent forms: a numba @njit build and a pure
numpy build. The numpy path is selected by setting IPLAN_NUMBA=0 in the
environment (or automatically when numba is unavailable). Run
benchmarks/bench_kernels.py to compare the two.

Distance convention: pixels live at integer (row, col) coordinates; a pixel
belongs to a box under the half-open test top <= r < bottom,
left <= c < right; the distance of an outside pixel is the euclidean clamp
distance to the closed box.
"""

from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("IPLAN_NUMBA", "1").strip().lower()
_want_numba = _flag not in ("0", "false", "no", "off")

if _want_numba:
    try:
        from numba import njit

        HAS_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        HAS_NUMBA = False
else:
    HAS_NUMBA = False


def using_numba() -> bool:
    return HAS_NUMBA


# ---------------------------------------------------------------------------
# coverage: per interior pixel, squared clamp distance to the nearest box
# ---------------------------------------------------------------------------

def _coverage_value_grad_py(rows, cols, boxes):
    top = boxes[:, 0][None, :]
    left = boxes[:, 1][None, :]
    bottom = boxes[:, 2][None, :]
    right = boxes[:, 3][None, :]
    r = rows[:, None]
    c = cols[:, None]

    dr = np.maximum(np.maximum(top - r, r - bottom), 0.0)
    dc = np.maximum(np.maximum(left - c, c - right), 0.0)
    inside = (top <= r) & (r < bottom) & (left <= c) & (c < right)
    d2 = np.where(inside, 0.0, dr * dr + dc * dc)

    nearest = np.argmin(d2, axis=1)
    pix = np.arange(rows.shape[0])
    value = float(d2[pix, nearest].sum())

    grad = np.zeros_like(boxes)
    dr_n = dr[pix, nearest]
    dc_n = dc[pix, nearest]
    inside_n = inside[pix, nearest]
    top_n = top[0, nearest]
    bottom_n = bottom[0, nearest]
    left_n = left[0, nearest]
    right_n = right[0, nearest]

    above = ~inside_n & (top_n - rows > 0) & (top_n - rows >= rows - bottom_n)
    below = ~inside_n & (rows - bottom_n > 0) & (rows - bottom_n > top_n - rows)
    before = ~inside_n & (left_n - cols > 0) & (left_n - cols >= cols - right_n)
    after = ~inside_n & (cols - right_n > 0) & (cols - right_n > left_n - cols)

    np.add.at(grad[:, 0], nearest[above], 2.0 * dr_n[above])
    np.add.at(grad[:, 2], nearest[below], -2.0 * dr_n[below])
    np.add.at(grad[:, 1], nearest[before], 2.0 * dc_n[before])
    np.add.at(grad[:, 3], nearest[after], -2.0 * dc_n[after])
    return value, grad


def _interior_pixel_sums_py(boxes, bbox, canvas):
    bt, bl, bb, br = bbox
    numer = 0.0
    denom = 0
    for top, left, bottom, right in boxes:
        r0 = max(int(np.ceil(top)), 0)
        r1 = min(int(np.ceil(bottom)), canvas)
        c0 = max(int(np.ceil(left)), 0)
        c1 = min(int(np.ceil(right)), canvas)
        if r0 >= r1 or c0 >= c1:
            continue
        rr = np.arange(r0, r1, dtype=np.float64)
        cc = np.arange(c0, c1, dtype=np.float64)
        dr = np.maximum(np.maximum(bt - rr, rr - bb), 0.0)
        dc = np.maximum(np.maximum(bl - cc, cc - br), 0.0)
        numer += float((dr * dr).sum() * cc.shape[0] + (dc * dc).sum() * rr.shape[0])
        denom += rr.shape[0] * cc.shape[0]
    return numer, denom


if HAS_NUMBA:

    @njit(cache=True)
    def _coverage_value_grad_nb(rows, cols, boxes):  # pragma: no cover - jitted
        n_pix = rows.shape[0]
        n_box = boxes.shape[0]
        value = 0.0
        grad = np.zeros((n_box, 4), dtype=np.float64)
        for p in range(n_pix):
            r = rows[p]
            c = cols[p]
            best = np.inf
            best_i = 0
            for i in range(n_box):
                top, left, bottom, right = (
                    boxes[i, 0],
                    boxes[i, 1],
                    boxes[i, 2],
                    boxes[i, 3],
                )
                if top <= r < bottom and left <= c < right:
                    d2 = 0.0
                else:
                    dr = max(max(top - r, r - bottom), 0.0)
                    dc = max(max(left - c, c - right), 0.0)
                    d2 = dr * dr + dc * dc
                if d2 < best:
                    best = d2
                    best_i = i
            value += best
            if best > 0.0:
                top, left, bottom, right = (
                    boxes[best_i, 0],
                    boxes[best_i, 1],
                    boxes[best_i, 2],
                    boxes[best_i, 3],
                )
                d_top = top - r
                d_bot = r - bottom
                if d_top > 0.0 and d_top >= d_bot:
                    grad[best_i, 0] += 2.0 * d_top
                elif d_bot > 0.0:
                    grad[best_i, 2] += -2.0 * d_bot
                d_left = left - c
                d_right = c - right
                if d_left > 0.0 and d_left >= d_right:
                    grad[best_i, 1] += 2.0 * d_left
                elif d_right > 0.0:
                    grad[best_i, 3] += -2.0 * d_right
        return value, grad

    @njit(cache=True)
    def _interior_pixel_sums_nb(boxes, bbox, canvas):  # pragma: no cover - jitted
        bt, bl, bb, br = bbox[0], bbox[1], bbox[2], bbox[3]
        numer = 0.0
        denom = 0
        for i in range(boxes.shape[0]):
            top, left, bottom, right = (
                boxes[i, 0],
                boxes[i, 1],
                boxes[i, 2],
                boxes[i, 3],
            )
            r0 = max(int(np.ceil(top)), 0)
            r1 = min(int(np.ceil(bottom)), canvas)
            c0 = max(int(np.ceil(left)), 0)
            c1 = min(int(np.ceil(right)), canvas)
            if r0 >= r1 or c0 >= c1:
                continue
            sum_dr2 = 0.0
            for r in range(r0, r1):
                dr = max(max(bt - r, r - bb), 0.0)
                sum_dr2 += dr * dr
            sum_dc2 = 0.0
            for c in range(c0, c1):
                dc = max(max(bl - c, c - br), 0.0)
                sum_dc2 += dc * dc
            numer += sum_dr2 * (c1 - c0) + sum_dc2 * (r1 - r0)
            denom += (r1 - r0) * (c1 - c0)
        return numer, denom

    coverage_value_grad = _coverage_value_grad_nb
    interior_pixel_sums = _interior_pixel_sums_nb
else:
    coverage_value_grad = _coverage_value_grad_py
    interior_pixel_sums = _interior_pixel_sums_py

# Always-available aliases so the benchmark can compare the two paths.
coverage_value_grad_numpy = _coverage_value_grad_py
interior_pixel_sums_numpy = _interior_pixel_sums_py
