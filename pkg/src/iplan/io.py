"""Layout file format (iplan-layout/1), mask run-length codec, image export."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .core import RESOLUTION, Boundary, Layout, Room, RoomTypeRegistry
from .errors import ParseError

LAYOUT_FORMAT = "iplan-layout/1"


def rle_encode(mask: np.ndarray) -> list[int]:
    """Row-major run lengths of a binary mask, starting with a run of zeros.

    The first entry may be 0 when the mask begins with a 1.
    """
    flat = np.asarray(mask, dtype=np.uint8).reshape(-1)
    counts: list[int] = []
    value = 0
    run = 0
    for bit in flat:
        if bit == value:
            run += 1
        else:
            counts.append(run)
            value = 1 - value
            run = 1
    counts.append(run)
    return counts


def rle_decode(counts: list[int], shape: tuple[int, int]) -> np.ndarray:
    total = shape[0] * shape[1]
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts):
        raise ParseError("negative run length in RLE data")
    if sum(counts) != total:
        raise ParseError(f"RLE runs sum to {sum(counts)}, expected {total}")
    flat = np.zeros(total, dtype=np.uint8)
    pos = 0
    value = 0
    for run in counts:
        if value:
            flat[pos : pos + run] = 1
        pos += run
        value = 1 - value
    return flat.reshape(shape)


def boundary_to_dict(b: Boundary) -> dict:
    return {
        "boundary": rle_encode(b.boundary_mask),
        "frontdoor": rle_encode(b.frontdoor_mask),
        "interior": rle_encode(b.interior_mask),
    }


def boundary_from_dict(d: dict) -> Boundary:
    shape = (RESOLUTION, RESOLUTION)
    return Boundary(
        boundary_mask=rle_decode(d["boundary"], shape),
        frontdoor_mask=rle_decode(d["frontdoor"], shape),
        interior_mask=rle_decode(d["interior"], shape),
    )


def layout_to_dict(layout: Layout, registry: RoomTypeRegistry) -> dict:
    return {
        "format": LAYOUT_FORMAT,
        "registry": registry.to_dict(),
        "boundary": boundary_to_dict(layout.boundary),
        "rooms": [room.to_dict() for room in layout.rooms],
    }


def layout_from_dict(d: dict) -> tuple[Layout, RoomTypeRegistry]:
    if d.get("format") != LAYOUT_FORMAT:
        raise ParseError(f"unsupported layout format {d.get('format')!r}")
    try:
        registry = RoomTypeRegistry.from_dict(d["registry"])
        boundary = boundary_from_dict(d["boundary"])
        rooms = tuple(Room.from_dict(r) for r in d["rooms"])
    except KeyError as exc:
        raise ParseError(f"missing field {exc}") from exc
    return Layout(boundary=boundary, rooms=rooms), registry


def save_layout(layout: Layout, registry: RoomTypeRegistry, path: str | Path) -> None:
    Path(path).write_text(json.dumps(layout_to_dict(layout, registry)), encoding="utf-8")


def load_layout(path: str | Path) -> tuple[Layout, RoomTypeRegistry]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(str(exc), item=str(path)) from exc
    try:
        return layout_from_dict(payload)
    except ParseError as exc:
        raise ParseError(str(exc), item=str(path)) from exc


def save_image(img: np.ndarray, path: str | Path) -> None:
    """Write an 8-bit grayscale or RGB array losslessly (PNG)."""
    arr = np.asarray(img, dtype=np.uint8)
    Image.fromarray(arr).save(Path(path), format="PNG")


def load_image(path: str | Path) -> np.ndarray:
    return np.asarray(Image.open(Path(path)))
