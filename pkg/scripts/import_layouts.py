"""Convert a generic intermediate floorplan description into a corpus.

Upstream datasets arrive in many raw forms (images, vector files, CSV
dumps); parsing those is out of scope here. This converter consumes one
small, documented intermediate JSON and writes an iplan-layout/1 corpus
directory, so an adapter only has to produce:

{
  "registry": {"names": [...], "max_counts": [...]},
  "source": "rplan-like",
  "layouts": [
    {
      "footprint": [[row, col], ...],   # closed rectilinear polygon, px
      "door": [row, col],               # a cell on the footprint outline
      "rooms": [
        {"type": "bedroom", "center": [row, col], "box": [t, l, b, r]}
      ]
    }
  ]
}

Coordinates are pixels on the 128x128 canvas; boxes are half-open. If a
room has no center, the box center is used.

Usage: python scripts/import_layouts.py --in layouts.json --out corpus_dir
"""

import argparse
import json
from pathlib import Path

import numpy as np

from iplan.core import RESOLUTION, Boundary, Layout, Room, RoomTypeRegistry
from iplan.data import save_corpus
from iplan.errors import ParseError


def _draw_outline(mask: np.ndarray, polygon: list[list[int]]) -> None:
    n = len(polygon)
    for i in range(n):
        (r0, c0), (r1, c1) = polygon[i], polygon[(i + 1) % n]
        steps = max(abs(r1 - r0), abs(c1 - c0), 1)
        for s in range(steps + 1):
            r = round(r0 + (r1 - r0) * s / steps)
            c = round(c0 + (c1 - c0) * s / steps)
            mask[r, c] = 1


def _fill(polygon: list[list[int]]) -> np.ndarray:
    mask = np.zeros((RESOLUTION, RESOLUTION), dtype=np.uint8)
    n = len(polygon)
    for r in range(RESOLUTION):
        crossings = []
        for i in range(n):
            (r1, c1), (r2, c2) = polygon[i], polygon[(i + 1) % n]
            if r1 == r2:
                continue
            lo, hi = min(r1, r2), max(r1, r2)
            if lo <= r < hi:
                t = (r - r1) / (r2 - r1)
                crossings.append(c1 + t * (c2 - c1))
        crossings.sort()
        for k in range(0, len(crossings) - 1, 2):
            c0 = int(np.ceil(crossings[k]))
            c1 = int(np.floor(crossings[k + 1]))
            mask[r, c0 : c1 + 1] = 1
    return mask


def boundary_from_footprint(polygon: list[list[int]], door: list[int]) -> Boundary:
    stroke = np.zeros((RESOLUTION, RESOLUTION), dtype=np.uint8)
    _draw_outline(stroke, polygon)
    interior = _fill(polygon)
    interior[stroke == 1] = 0
    door_mask = np.zeros_like(stroke)
    r, c = int(door[0]), int(door[1])
    if stroke[r, c] != 1:
        raise ParseError(f"door {door} is not on the footprint outline")
    horizontal = c + 1 < RESOLUTION and stroke[r, c + 1] == 1
    for k in range(4):
        rr, cc = (r, c + k) if horizontal else (r + k, c)
        if rr < RESOLUTION and cc < RESOLUTION and stroke[rr, cc] == 1:
            door_mask[rr, cc] = 1
    return Boundary(boundary_mask=stroke, frontdoor_mask=door_mask, interior_mask=interior)


def convert(payload: dict) -> tuple[list[Layout], RoomTypeRegistry, str]:
    registry = RoomTypeRegistry.from_dict(payload["registry"])
    layouts = []
    for i, item in enumerate(payload["layouts"]):
        try:
            boundary = boundary_from_footprint(item["footprint"], item["door"])
            rooms = []
            for entry in item["rooms"]:
                t, l, b, r = (int(v) for v in entry["box"])
                center = entry.get("center") or [(t + b) // 2, (l + r) // 2]
                rooms.append(
                    Room(
                        type_id=registry.index_of(entry["type"]),
                        center=(int(center[0]), int(center[1])),
                        box=(t, l, b, r),
                    )
                )
            layouts.append(Layout(boundary=boundary, rooms=tuple(rooms)).validate(registry))
        except Exception as exc:
            raise ParseError(str(exc), item=f"layouts[{i}]") from exc
    return layouts, registry, payload.get("source", "rplan-like")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--in", dest="infile", required=True)
    parser.add_argument("--out", dest="outdir", required=True)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    payload = json.loads(Path(args.infile).read_text(encoding="utf-8"))
    layouts, registry, source = convert(payload)
    save_corpus(layouts, registry, args.outdir, source=source, seed=args.seed)
    print(f"wrote {len(layouts)} layouts to {args.outdir}")


if __name__ == "__main__":
    main()
