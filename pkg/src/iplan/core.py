"""Domain types and raster conventions shared by every stage of the pipeline.

Coordinate convention: (row, col) with the origin at the top-left corner.
Boxes are (top, left, bottom, right) and half-open, i.e. they cover the
pixels top <= r < bottom, left <= c < right. The canvas is fixed at
128 x 128 pixels.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CountOverflow, DomainError, RegistryError, ShapeError

RESOLUTION = 128

# Room centers are marked with a square stamp of this side length.
STAMP_SIDE = 9
STAMP_HALF = STAMP_SIDE // 2

# Fixed fill colors, indexed by type_id modulo the table length.
ROOM_PALETTE = (
    (238, 77, 77),    # living room red
    (255, 210, 116),  # warm yellow
    (198, 124, 123),  # muted rose
    (190, 190, 190),  # gray
    (232, 122, 144),  # pink
    (191, 227, 232),  # pale cyan
    (255, 140, 105),  # salmon
    (123, 167, 121),  # green
    (31, 132, 155),   # teal
    (211, 162, 199),  # lilac
    (120, 90, 103),   # plum
    (244, 177, 131),  # apricot
    (142, 162, 210),  # periwinkle
    (176, 204, 140),  # light olive
    (222, 184, 135),  # tan
    (160, 160, 210),  # slate
)

INTERIOR_FILL = (242, 242, 242)
EXTERIOR_FILL = (255, 255, 255)
BOUNDARY_STROKE = (60, 60, 60)
FRONTDOOR_STROKE = (170, 100, 40)


@dataclass(frozen=True)
class RoomTypeRegistry:
    """The K room-type labels of a corpus and their per-type count caps."""

    names: tuple[str, ...]
    max_counts: tuple[int, ...]

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        caps = tuple(int(c) for c in self.max_counts)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "max_counts", caps)
        if len(names) < 1:
            raise RegistryError("registry needs at least one type")
        if len(names) != len(set(names)):
            raise RegistryError("type names must be unique")
        if len(caps) != len(names):
            raise RegistryError("max_counts length must equal number of names")
        if any(c < 1 for c in caps):
            raise RegistryError("every max_count must be >= 1")

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def n_bits(self) -> int:
        """Length of the binary count encoding: sum of the per-type caps."""
        return sum(self.max_counts)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise RegistryError(f"unknown room type {name!r}") from None

    def check_type_id(self, type_id: int) -> int:
        if not 0 <= type_id < self.size:
            raise RegistryError(f"type_id {type_id} out of range for K={self.size}")
        return int(type_id)

    def to_dict(self) -> dict:
        return {"names": list(self.names), "max_counts": list(self.max_counts)}

    @classmethod
    def from_dict(cls, d: dict) -> "RoomTypeRegistry":
        return cls(names=tuple(d["names"]), max_counts=tuple(d["max_counts"]))

    def content_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class TypeCount:
    """Per-type room counts for one layout."""

    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if any(c < 0 for c in self.counts):
            raise DomainError("counts must be non-negative")

    def validate(self, registry: RoomTypeRegistry) -> "TypeCount":
        if len(self.counts) != registry.size:
            raise ShapeError(
                f"expected {registry.size} counts, got {len(self.counts)}"
            )
        for k, (q, cap) in enumerate(zip(self.counts, registry.max_counts)):
            if q > cap:
                raise CountOverflow(
                    f"count {q} for type {registry.names[k]!r} exceeds cap {cap}"
                )
        return self

    @property
    def total(self) -> int:
        return sum(self.counts)

    def to_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.int64)


def _as_binary_mask(arr, name: str) -> np.ndarray:
    a = np.asarray(arr)
    if a.shape != (RESOLUTION, RESOLUTION):
        raise ShapeError(f"{name} must be {RESOLUTION}x{RESOLUTION}, got {a.shape}")
    a = a.astype(np.uint8)
    if not np.isin(a, (0, 1)).all():
        raise DomainError(f"{name} must be 0/1 valued")
    a.setflags(write=False)
    return a


def _is_4_connected(mask: np.ndarray) -> bool:
    total = int(mask.sum())
    if total == 0:
        return True
    rows, cols = np.nonzero(mask)
    seen = np.zeros(mask.shape, dtype=bool)
    stack = [(int(rows[0]), int(cols[0]))]
    seen[stack[0]] = True
    count = 0
    h, w = mask.shape
    while stack:
        r, c = stack.pop()
        count += 1
        for rr, cc in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
            if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] and not seen[rr, cc]:
                seen[rr, cc] = True
                stack.append((rr, cc))
    return count == total


@dataclass(frozen=True, eq=False)
class Boundary:
    """Building footprint: boundary stroke, front door and interior masks."""

    boundary_mask: np.ndarray
    frontdoor_mask: np.ndarray
    interior_mask: np.ndarray

    def __post_init__(self):
        bd = _as_binary_mask(self.boundary_mask, "boundary_mask")
        fd = _as_binary_mask(self.frontdoor_mask, "frontdoor_mask")
        it = _as_binary_mask(self.interior_mask, "interior_mask")
        object.__setattr__(self, "boundary_mask", bd)
        object.__setattr__(self, "frontdoor_mask", fd)
        object.__setattr__(self, "interior_mask", it)
        if np.any(fd & ~(bd | it)):
            raise DomainError("front door must lie on the boundary or interior")
        if np.any(it & bd):
            raise DomainError("interior and boundary masks must be disjoint")
        if not _is_4_connected(it):
            raise DomainError("interior must be 4-connected")

    def composite(self) -> np.ndarray:
        """Single-channel float encoding: exterior 0, interior 1/3, stroke 2/3,
        front door 1. Used as conditioning input by the conv embeddings."""
        img = np.zeros((RESOLUTION, RESOLUTION), dtype=np.float32)
        img[self.interior_mask == 1] = 1.0 / 3.0
        img[self.boundary_mask == 1] = 2.0 / 3.0
        img[self.frontdoor_mask == 1] = 1.0
        return img

    def footprint_bbox(self) -> tuple[float, float, float, float]:
        """Tight half-open box around boundary plus interior pixels."""
        mask = (self.boundary_mask | self.interior_mask).astype(bool)
        rows, cols = np.nonzero(mask)
        if rows.size == 0:
            raise DomainError("boundary has no pixels")
        return (
            float(rows.min()),
            float(cols.min()),
            float(rows.max() + 1),
            float(cols.max() + 1),
        )

    def equals(self, other: "Boundary") -> bool:
        return (
            np.array_equal(self.boundary_mask, other.boundary_mask)
            and np.array_equal(self.frontdoor_mask, other.frontdoor_mask)
            and np.array_equal(self.interior_mask, other.interior_mask)
        )


@dataclass(frozen=True)
class Room:
    """One placed room: categorical type, center pixel and bounding box."""

    type_id: int
    center: tuple[int, int]
    box: tuple[int, int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "type_id", int(self.type_id))
        object.__setattr__(self, "center", tuple(int(v) for v in self.center))
        object.__setattr__(self, "box", tuple(int(v) for v in self.box))
        top, left, bottom, right = self.box
        if not (0 <= top < bottom <= RESOLUTION):
            raise DomainError(f"bad vertical extent {self.box}")
        if not (0 <= left < right <= RESOLUTION):
            raise DomainError(f"bad horizontal extent {self.box}")
        r, c = self.center
        if not (top <= r < bottom and left <= c < right):
            raise DomainError(f"center {self.center} outside box {self.box}")

    @property
    def area(self) -> int:
        top, left, bottom, right = self.box
        return (bottom - top) * (right - left)

    def to_dict(self) -> dict:
        return {"type": self.type_id, "center": list(self.center), "box": list(self.box)}

    @classmethod
    def from_dict(cls, d: dict) -> "Room":
        return cls(type_id=d["type"], center=tuple(d["center"]), box=tuple(d["box"]))


@dataclass(frozen=True, eq=False)
class Layout:
    """A boundary plus its ordered list of rooms."""

    boundary: Boundary
    rooms: tuple[Room, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "rooms", tuple(self.rooms))

    @property
    def n_rooms(self) -> int:
        return len(self.rooms)

    def validate(self, registry: RoomTypeRegistry) -> "Layout":
        if self.n_rooms < 1:
            raise DomainError("layout must contain at least one room")
        for room in self.rooms:
            registry.check_type_id(room.type_id)
        self.type_count(registry).validate(registry)
        return self

    def type_count(self, registry: RoomTypeRegistry) -> TypeCount:
        counts = [0] * registry.size
        for room in self.rooms:
            counts[registry.check_type_id(room.type_id)] += 1
        return TypeCount(tuple(counts))


def encode_type_bits(q: TypeCount, registry: RoomTypeRegistry) -> np.ndarray:
    """Expand per-type counts into the fixed-length binary vector.

    Segment k has length max_counts[k]; its first q_k entries are 1.
    """
    q.validate(registry)
    bits = np.zeros(registry.n_bits, dtype=np.float32)
    offset = 0
    for count, cap in zip(q.counts, registry.max_counts):
        bits[offset : offset + count] = 1.0
        offset += cap
    return bits


def decode_type_bits(bits, registry: RoomTypeRegistry) -> TypeCount:
    """Invert the count encoding by counting entries >= 0.5 per segment.

    Counting on-bits (rather than requiring a contiguous prefix) makes the
    decoder robust to sigmoid outputs that are not prefix-shaped.
    """
    v = np.asarray(bits, dtype=np.float64).reshape(-1)
    if v.shape[0] != registry.n_bits:
        raise ShapeError(f"expected {registry.n_bits} bits, got {v.shape[0]}")
    counts = []
    offset = 0
    for cap in registry.max_counts:
        counts.append(int((v[offset : offset + cap] >= 0.5).sum()))
        offset += cap
    return TypeCount(tuple(counts))


def stamp_center(grid: np.ndarray, center: tuple[int, int]) -> np.ndarray:
    """Set the 9x9 block around ``center`` to 1, clipped at canvas edges.

    Mutates ``grid`` in place and returns it; stamping twice is a no-op.
    """
    r, c = int(center[0]), int(center[1])
    h, w = grid.shape
    if not (0 <= r < h and 0 <= c < w):
        raise DomainError(f"center {center} outside canvas")
    top = max(r - STAMP_HALF, 0)
    bottom = min(r + STAMP_HALF + 1, h)
    left = max(c - STAMP_HALF, 0)
    right = min(c + STAMP_HALF + 1, w)
    grid[top:bottom, left:right] = 1
    return grid


def room_color(type_id: int) -> tuple[int, int, int]:
    return ROOM_PALETTE[type_id % len(ROOM_PALETTE)]


def render_layout(layout: Layout) -> np.ndarray:
    """Render a layout to a 128x128 RGB image.

    Rooms are painted in list order so later rooms overpaint earlier ones;
    the boundary stroke and front door are painted last. Purely a function
    of the layout, so equal layouts render bit-identically.
    """
    img = np.empty((RESOLUTION, RESOLUTION, 3), dtype=np.uint8)
    img[:, :] = EXTERIOR_FILL
    b = layout.boundary
    img[b.interior_mask == 1] = INTERIOR_FILL
    for room in layout.rooms:
        top, left, bottom, right = room.box
        top = max(top, 0)
        left = max(left, 0)
        bottom = min(bottom, RESOLUTION)
        right = min(right, RESOLUTION)
        if top < bottom and left < right:
            img[top:bottom, left:right] = room_color(room.type_id)
    img[b.boundary_mask == 1] = BOUNDARY_STROKE
    img[b.frontdoor_mask == 1] = FRONTDOOR_STROKE
    return img
