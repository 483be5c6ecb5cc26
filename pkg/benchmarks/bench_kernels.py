"""Compare the numba and pure-numpy builds of the geometry kernels.

Run directly:  python benchmarks/bench_kernels.py
Force the numpy path package-wide by exporting IPLAN_NUMBA=0.
"""

import time

import numpy as np

from iplan import kernels
from iplan.core import RESOLUTION
from iplan.data import synth_corpus
from iplan.repair import RepairConfig, RepairProblem, repair


def time_fn(fn, *args, repeats=50):
    fn(*args)  # warm up (includes JIT compile on the numba path)
    start = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - start) / repeats


def main() -> None:
    rng = np.random.default_rng(0)
    layout = synth_corpus(1, rng=rng)[0]
    boxes = np.array([room.box for room in layout.rooms], dtype=np.float64)
    boxes += rng.uniform(-4, 4, boxes.shape)
    problem = RepairProblem(layout.boundary, boxes)
    rows, cols = problem.interior_points()
    bbox = np.asarray(problem.bbox)
    closed = np.array([bbox[0], bbox[1], bbox[2] - 1, bbox[3] - 1])

    print(f"interior pixels: {rows.shape[0]}, boxes: {boxes.shape[0]}")
    print(f"numba available and active: {kernels.using_numba()}")
    print()
    print(f"{'kernel':<28}{'numba (ms)':>12}{'numpy (ms)':>12}{'speedup':>9}")

    if kernels.using_numba():
        t_nb = time_fn(kernels.coverage_value_grad, rows, cols, problem.boxes) * 1e3
    else:
        t_nb = float("nan")
    t_np = time_fn(kernels.coverage_value_grad_numpy, rows, cols, problem.boxes) * 1e3
    print(f"{'coverage value+grad':<28}{t_nb:>12.3f}{t_np:>12.3f}{t_np / t_nb:>9.1f}x")

    if kernels.using_numba():
        t_nb = time_fn(kernels.interior_pixel_sums, problem.boxes, closed, RESOLUTION) * 1e3
    else:
        t_nb = float("nan")
    t_np = time_fn(kernels.interior_pixel_sums_numpy, problem.boxes, closed, RESOLUTION) * 1e3
    print(f"{'interior pixel sums':<28}{t_nb:>12.3f}{t_np:>12.3f}{t_np / t_nb:>9.1f}x")

    start = time.perf_counter()
    result = repair(problem, RepairConfig(max_iters=200))
    elapsed = time.perf_counter() - start
    print()
    print(
        f"full repair ({result.iterations} iterations): {elapsed * 1e3:.1f} ms "
        f"on the {'numba' if kernels.using_numba() else 'numpy'} path"
    )


if __name__ == "__main__":
    main()
