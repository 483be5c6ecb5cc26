import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iplan.core import (
    RESOLUTION,
    Boundary,
    Layout,
    Room,
    RoomTypeRegistry,
    TypeCount,
    decode_type_bits,
    encode_type_bits,
    render_layout,
    stamp_center,
)
from iplan.errors import CountOverflow, DomainError, RegistryError, ShapeError


@pytest.fixture
def reg23():
    return RoomTypeRegistry(names=("a", "b"), max_counts=(2, 3))


def simple_boundary(top=20, left=20, bottom=100, right=100):
    interior = np.zeros((RESOLUTION, RESOLUTION), dtype=np.uint8)
    interior[top:bottom, left:right] = 1
    stroke = np.zeros_like(interior)
    stroke[top - 1, left - 1 : right + 1] = 1
    stroke[bottom, left - 1 : right + 1] = 1
    stroke[top - 1 : bottom + 1, left - 1] = 1
    stroke[top - 1 : bottom + 1, right] = 1
    door = np.zeros_like(interior)
    door[top - 1, left + 2 : left + 6] = 1
    return Boundary(boundary_mask=stroke, frontdoor_mask=door, interior_mask=interior)


class TestRegistry:
    def test_basic(self, reg23):
        assert reg23.size == 2
        assert reg23.n_bits == 5

    def test_duplicate_names(self):
        with pytest.raises(RegistryError):
            RoomTypeRegistry(names=("a", "a"), max_counts=(1, 1))

    def test_zero_cap(self):
        with pytest.raises(RegistryError):
            RoomTypeRegistry(names=("a",), max_counts=(0,))

    def test_hash_changes_with_content(self, reg23):
        other = RoomTypeRegistry(names=("a", "b"), max_counts=(2, 4))
        assert reg23.content_hash() != other.content_hash()


class TestTypeBits:
    def test_prefix_encoding(self, reg23):
        bits = encode_type_bits(TypeCount((1, 2)), reg23)
        assert bits.tolist() == [1, 0, 1, 1, 0]

    def test_zero_counts(self, reg23):
        assert encode_type_bits(TypeCount((0, 0)), reg23).tolist() == [0] * 5

    def test_overflow(self, reg23):
        with pytest.raises(CountOverflow):
            encode_type_bits(TypeCount((3, 0)), reg23)

    def test_decode_inverse(self, reg23):
        assert decode_type_bits([1, 0, 1, 1, 0], reg23).counts == (1, 2)

    def test_decode_sigmoid_threshold(self, reg23):
        assert decode_type_bits([0.9, 0.2, 0.6, 0.7, 0.1], reg23).counts == (1, 2)

    def test_decode_below_threshold(self, reg23):
        assert decode_type_bits([0.5 - 1e-9] * 5, reg23).counts == (0, 0)

    def test_decode_wrong_length(self, reg23):
        with pytest.raises(ShapeError):
            decode_type_bits([1, 0, 1], reg23)

    def test_roundtrip_exhaustive_222(self):
        reg = RoomTypeRegistry(names=("a", "b", "c"), max_counts=(2, 2, 2))
        for counts in itertools.product(range(3), repeat=3):
            q = TypeCount(counts)
            assert decode_type_bits(encode_type_bits(q, reg), reg).counts == counts

    @given(st.data())
    @settings(max_examples=50, deadline=None)
    def test_roundtrip_random_registries(self, data):
        k = data.draw(st.integers(1, 5))
        caps = tuple(data.draw(st.integers(1, 4)) for _ in range(k))
        reg = RoomTypeRegistry(names=tuple(f"t{i}" for i in range(k)), max_counts=caps)
        counts = tuple(data.draw(st.integers(0, cap)) for cap in caps)
        q = TypeCount(counts)
        assert decode_type_bits(encode_type_bits(q, reg), reg).counts == counts


class TestStamp:
    def test_full_stamp(self):
        grid = np.zeros((RESOLUTION, RESOLUTION), dtype=np.float32)
        stamp_center(grid, (64, 64))
        assert grid.sum() == 81

    def test_corner_clip(self):
        grid = np.zeros((RESOLUTION, RESOLUTION), dtype=np.float32)
        stamp_center(grid, (0, 0))
        assert grid.sum() == 25

    def test_idempotent(self):
        grid = np.zeros((RESOLUTION, RESOLUTION), dtype=np.float32)
        stamp_center(grid, (10, 10))
        once = grid.copy()
        stamp_center(grid, (10, 10))
        assert np.array_equal(grid, once)

    def test_outside_canvas(self):
        grid = np.zeros((RESOLUTION, RESOLUTION), dtype=np.float32)
        with pytest.raises(DomainError):
            stamp_center(grid, (-1, 4))

    @given(st.integers(0, 127), st.integers(0, 127))
    @settings(max_examples=60, deadline=None)
    def test_clipped_count(self, r, c):
        grid = np.zeros((RESOLUTION, RESOLUTION), dtype=np.float32)
        stamp_center(grid, (r, c))
        rows = min(r + 4, 127) - max(r - 4, 0) + 1
        cols = min(c + 4, 127) - max(c - 4, 0) + 1
        assert grid.sum() == rows * cols
        assert set(np.unique(grid)) <= {0.0, 1.0}


class TestBoundary:
    def test_door_outside_rejected(self):
        interior = np.zeros((RESOLUTION, RESOLUTION), dtype=np.uint8)
        interior[10:20, 10:20] = 1
        stroke = np.zeros_like(interior)
        stroke[9, 9:21] = 1
        door = np.zeros_like(interior)
        door[50, 50] = 1
        with pytest.raises(DomainError):
            Boundary(boundary_mask=stroke, frontdoor_mask=door, interior_mask=interior)

    def test_overlap_rejected(self):
        interior = np.zeros((RESOLUTION, RESOLUTION), dtype=np.uint8)
        interior[10:20, 10:20] = 1
        with pytest.raises(DomainError):
            Boundary(
                boundary_mask=interior.copy(),
                frontdoor_mask=np.zeros_like(interior),
                interior_mask=interior,
            )

    def test_disconnected_rejected(self):
        interior = np.zeros((RESOLUTION, RESOLUTION), dtype=np.uint8)
        interior[10:20, 10:20] = 1
        interior[40:50, 40:50] = 1
        with pytest.raises(DomainError):
            Boundary(
                boundary_mask=np.zeros_like(interior),
                frontdoor_mask=np.zeros_like(interior),
                interior_mask=interior,
            )

    def test_footprint_bbox(self):
        b = simple_boundary(20, 30, 90, 110)
        assert b.footprint_bbox() == (19.0, 29.0, 91.0, 111.0)


class TestRoomAndLayout:
    def test_center_outside_box(self):
        with pytest.raises(DomainError):
            Room(type_id=0, center=(5, 5), box=(10, 10, 20, 20))

    def test_bad_extent(self):
        with pytest.raises(DomainError):
            Room(type_id=0, center=(10, 10), box=(20, 10, 10, 20))

    def test_layout_validate_type_ids(self, reg23):
        b = simple_boundary()
        room = Room(type_id=5, center=(50, 50), box=(40, 40, 60, 60))
        with pytest.raises(RegistryError):
            Layout(boundary=b, rooms=(room,)).validate(reg23)


class TestRender:
    def test_empty_rooms_boundary_only(self):
        b = simple_boundary()
        img = render_layout(Layout(boundary=b, rooms=()))
        interior_px = img[b.interior_mask == 1]
        assert (interior_px == (242, 242, 242)).all()
        stroke_px = img[(b.boundary_mask == 1) & (b.frontdoor_mask == 0)]
        assert (stroke_px == (60, 60, 60)).all()

    def test_full_interior_uniform(self):
        b = simple_boundary()
        room = Room(type_id=2, center=(60, 60), box=(20, 20, 100, 100))
        img = render_layout(Layout(boundary=b, rooms=(room,)))
        inside = img[b.interior_mask == 1]
        assert (inside == inside[0]).all()

    def test_determinism(self, reg23):
        b = simple_boundary()
        rooms = (
            Room(type_id=0, center=(40, 40), box=(20, 20, 60, 60)),
            Room(type_id=1, center=(70, 70), box=(60, 20, 100, 100)),
        )
        a = render_layout(Layout(boundary=b, rooms=rooms))
        c = render_layout(Layout(boundary=b, rooms=rooms))
        assert np.array_equal(a, c)

    def test_later_rooms_overpaint(self):
        b = simple_boundary()
        r1 = Room(type_id=0, center=(50, 50), box=(20, 20, 100, 100))
        r2 = Room(type_id=1, center=(50, 50), box=(40, 40, 60, 60))
        img = render_layout(Layout(boundary=b, rooms=(r1, r2)))
        from iplan.core import room_color

        assert tuple(img[50, 50]) == room_color(1)
        assert tuple(img[25, 25]) == room_color(0)
