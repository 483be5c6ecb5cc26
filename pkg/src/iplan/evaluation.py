"""Teacher-forced accuracy probes and image diffing for overfit checks."""

from __future__ import annotations

import numpy as np

from .core import Layout, RoomTypeRegistry
from .locator import CenterLocator, build_state, predict_center
from .partitioner import Partitioner, initial_state, blend, hard_box_mask, regress_box, type_code


def center_accuracy(
    net: CenterLocator,
    corpus: list[Layout],
    registry: RoomTypeRegistry,
    tolerance_px: float = 4.0,
) -> float:
    """Fraction of chain steps whose argmax center lands within tolerance of
    the ground truth, with earlier rooms teacher-forced."""
    hits = 0
    total = 0
    for layout in corpus:
        placed: list[tuple[int, tuple[int, int]]] = []
        for room in layout.rooms:
            state = build_state(layout.boundary, placed, registry)
            pred = predict_center(net, state, room.type_id, mode="argmax")
            dist = float(np.hypot(pred[0] - room.center[0], pred[1] - room.center[1]))
            hits += dist <= tolerance_px
            total += 1
            placed.append((room.type_id, room.center))
    return hits / max(total, 1)


def box_accuracy(
    gen: Partitioner,
    corpus: list[Layout],
    tolerance_px: float = 3.0,
) -> float:
    """Fraction of rooms whose predicted box is within tolerance on every
    corner coordinate, with the state history teacher-forced."""
    hits = 0
    total = 0
    k = gen.registry_size
    for layout in corpus:
        state = initial_state(layout.boundary)
        for room in layout.rooms:
            box, _ = regress_box(gen, state, room.center, room.type_id)
            err = float(np.max(np.abs(box - np.asarray(room.box, dtype=np.float64))))
            hits += err <= tolerance_px
            total += 1
            state = blend(state, hard_box_mask(room.box), type_code(room.type_id, k))
    return hits / max(total, 1)


def pixel_difference(img_a: np.ndarray, img_b: np.ndarray) -> float:
    """Fraction of pixels that differ in any channel."""
    a = np.asarray(img_a)
    b = np.asarray(img_b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 3:
        diff = np.any(a != b, axis=2)
    else:
        diff = a != b
    return float(diff.mean())
