"""Corpus ingestion, the synthetic stand-in corpus, splits and persistence.

Corpora live on disk as one iplan-layout/1 file per design plus a versioned
manifest. The synthetic generator produces rectilinear boundaries whose
interiors are exactly tiled by guillotine-cut boxes, so every sample starts
with zero coverage and interior loss.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    RESOLUTION,
    Boundary,
    Layout,
    Room,
    RoomTypeRegistry,
)
from .errors import DataError, DomainError, ParseError, RegistryError
from .io import layout_from_dict, layout_to_dict

MANIFEST_FORMAT = "iplan-manifest/1"
MANIFEST_NAME = "manifest.json"

SYNTH_REGISTRY = RoomTypeRegistry(
    names=("living", "bedroom", "kitchen", "bathroom", "balcony", "storage"),
    max_counts=(1, 3, 1, 2, 2, 2),
)

# pool of non-living, non-smallest types; multiplicity encodes the caps
_FILLER_POOL = ("bedroom", "bedroom", "bedroom", "kitchen", "balcony", "storage", "storage")


@dataclass(frozen=True)
class CorpusManifest:
    source: str = "synthetic"
    registry: RoomTypeRegistry = SYNTH_REGISTRY
    split: tuple[float, float, float] = (0.7, 0.15, 0.15)
    seed: int = 0
    items: tuple[str, ...] = ()

    def __post_init__(self):
        if self.source not in ("rplan-like", "lifull-like", "synthetic"):
            raise DataError(f"unknown corpus source {self.source!r}")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise DataError(f"split fractions {self.split} must sum to 1")

    def to_dict(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "source": self.source,
            "registry": self.registry.to_dict(),
            "split": list(self.split),
            "seed": self.seed,
            "items": list(self.items),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusManifest":
        if d.get("format") != MANIFEST_FORMAT:
            raise ParseError(f"unsupported manifest format {d.get('format')!r}")
        return cls(
            source=d["source"],
            registry=RoomTypeRegistry.from_dict(d["registry"]),
            split=tuple(d["split"]),
            seed=int(d["seed"]),
            items=tuple(d["items"]),
        )


@dataclass
class SynthConfig:
    registry: RoomTypeRegistry = SYNTH_REGISTRY
    min_rooms: int = 2
    max_rooms: int = 6
    min_side: int = 16
    margin: int = 10
    notch_prob: float = 0.6


def _subtract_box(region: tuple, notch: tuple) -> list[tuple]:
    """Decompose region \\ notch into at most four disjoint rectangles."""
    rt, rl, rb, rr = region
    nt, nl, nb, nr = notch
    nt, nl = max(nt, rt), max(nl, rl)
    nb, nr = min(nb, rb), min(nr, rr)
    if nt >= nb or nl >= nr:
        return [region]
    pieces = []
    if rt < nt:
        pieces.append((rt, rl, nt, rr))
    if nb < rb:
        pieces.append((nb, rl, rb, rr))
    if rl < nl:
        pieces.append((nt, rl, nb, nl))
    if nr < rr:
        pieces.append((nt, nr, nb, rr))
    return pieces


def _dilate_ring(mask: np.ndarray) -> np.ndarray:
    padded = np.pad(mask.astype(bool), 1)
    grown = np.zeros_like(padded)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            grown |= np.roll(np.roll(padded, dr, axis=0), dc, axis=1)
    return (grown[1:-1, 1:-1] & ~mask.astype(bool)).astype(np.uint8)


def _boundary_from_boxes(boxes: list[tuple], rng: np.random.Generator) -> Boundary:
    interior = np.zeros((RESOLUTION, RESOLUTION), dtype=np.uint8)
    for top, left, bottom, right in boxes:
        interior[top:bottom, left:right] = 1
    stroke = _dilate_ring(interior)

    # front door: a short run of stroke pixels 4-adjacent to the interior
    side = np.zeros_like(stroke, dtype=bool)
    for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        side |= np.roll(np.roll(interior.astype(bool), dr, 0), dc, 1)
    candidates = np.argwhere((stroke == 1) & side)
    anchor = candidates[rng.integers(len(candidates))]
    door = np.zeros_like(stroke)
    r, c = int(anchor[0]), int(anchor[1])
    horizontal = stroke[r, min(c + 1, RESOLUTION - 1)] == 1
    for k in range(4):
        rr, cc = (r, c + k) if horizontal else (r + k, c)
        if 0 <= rr < RESOLUTION and 0 <= cc < RESOLUTION and stroke[rr, cc] == 1:
            door[rr, cc] = 1
    return Boundary(boundary_mask=stroke, frontdoor_mask=door, interior_mask=interior)


def _guillotine(regions: list[tuple], target: int, min_side: int, rng) -> list[tuple]:
    regions = list(regions)
    while len(regions) < target:
        splittable = [
            i
            for i, (t, l, b, r) in enumerate(regions)
            if (b - t) >= 2 * min_side or (r - l) >= 2 * min_side
        ]
        if not splittable:
            break
        idx = splittable[int(rng.integers(len(splittable)))]
        top, left, bottom, right = regions.pop(idx)
        h, w = bottom - top, right - left
        if h >= 2 * min_side and (h >= w or w < 2 * min_side):
            cut = int(rng.integers(min_side, h - min_side + 1))
            regions.append((top, left, top + cut, right))
            regions.append((top + cut, left, bottom, right))
        else:
            cut = int(rng.integers(min_side, w - min_side + 1))
            regions.append((top, left, bottom, left + cut))
            regions.append((top, left + cut, bottom, right))
    return regions


def synth_layout(cfg: SynthConfig, rng: np.random.Generator) -> Layout:
    reg = cfg.registry
    m = cfg.margin
    span = RESOLUTION - 2 * m
    height = int(rng.integers(int(span * 0.7), span + 1))
    width = int(rng.integers(int(span * 0.7), span + 1))
    top = m + int(rng.integers(0, span - height + 1))
    left = m + int(rng.integers(0, span - width + 1))
    footprint = (top, left, top + height, left + width)

    regions = [footprint]
    corners = ["tl", "tr", "bl", "br"]
    rng.shuffle(corners)
    n_notches = int(rng.random() < cfg.notch_prob) + int(rng.random() < cfg.notch_prob / 2)
    for corner in corners[:n_notches]:
        nh = int(rng.integers(cfg.min_side, max(height // 2, cfg.min_side + 1)))
        nw = int(rng.integers(cfg.min_side, max(width // 2, cfg.min_side + 1)))
        nt = top if corner[0] == "t" else top + height - nh
        nl = left if corner[1] == "l" else left + width - nw
        notch = (nt, nl, nt + nh, nl + nw)
        candidate = [piece for region in regions for piece in _subtract_box(region, notch)]
        # apply the notch only when no resulting piece drops below min_side,
        # keeping the union an exact (and connected) tiling
        if all(min(b - t, r - l) >= cfg.min_side for t, l, b, r in candidate):
            regions = candidate

    n_rooms = int(rng.integers(cfg.min_rooms, cfg.max_rooms + 1))
    n_rooms = max(n_rooms, len(regions))
    regions = _guillotine(regions, n_rooms, cfg.min_side, rng)

    by_area = sorted(regions, key=lambda b: ((b[2] - b[0]) * (b[3] - b[1]), b))
    assignments: dict[tuple, str] = {}
    assignments[by_area[-1]] = "living"
    if len(by_area) > 1:
        assignments[by_area[0]] = "bathroom"
    middle = by_area[1:-1]
    filler = list(_FILLER_POOL)
    rng.shuffle(filler)
    for box, name in zip(middle, filler):
        assignments[box] = name

    order = list(regions)
    rng.shuffle(order)
    rooms = []
    for box in order:
        t, l, b, r = box
        center = ((t + b) // 2, (l + r) // 2)
        rooms.append(Room(type_id=reg.index_of(assignments[box]), center=center, box=box))

    boundary = _boundary_from_boxes(regions, rng)
    return Layout(boundary=boundary, rooms=tuple(rooms)).validate(reg)


def synth_corpus(n: int, cfg: SynthConfig | None = None, rng=None) -> list[Layout]:
    if n < 1:
        raise DataError("need n >= 1")
    cfg = cfg or SynthConfig()
    if cfg.max_rooms > 2 + len(_FILLER_POOL):
        raise DataError(f"max_rooms must be <= {2 + len(_FILLER_POOL)}")
    rng = rng if rng is not None else np.random.default_rng(0)
    out = []
    for _ in range(n):
        # defensive: resample if an unusual config slips past validation
        for _attempt in range(20):
            try:
                out.append(synth_layout(cfg, rng))
                break
            except DomainError:
                continue
        else:
            raise DataError("could not synthesize a valid layout")
    return out


def save_corpus(
    layouts: list[Layout],
    registry: RoomTypeRegistry,
    path: str | Path,
    source: str = "synthetic",
    split: tuple[float, float, float] = (0.7, 0.15, 0.15),
    seed: int = 0,
) -> CorpusManifest:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    items = []
    for i, layout in enumerate(layouts):
        item = f"{i:05d}"
        (path / f"{item}.json").write_text(
            json.dumps(layout_to_dict(layout, registry)), encoding="utf-8"
        )
        items.append(item)
    manifest = CorpusManifest(
        source=source, registry=registry, split=split, seed=seed, items=tuple(items)
    )
    (path / MANIFEST_NAME).write_text(json.dumps(manifest.to_dict()), encoding="utf-8")
    return manifest


def load_manifest(path: str | Path) -> CorpusManifest:
    file = Path(path) / MANIFEST_NAME
    try:
        return CorpusManifest.from_dict(json.loads(file.read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(str(exc), item=str(file)) from exc


def load_corpus(path: str | Path, manifest: CorpusManifest | None = None) -> list[Layout]:
    """Load every layout under ``path`` in deterministic id order.

    Raises ParseError naming the offending file on the first schema
    violation; nothing is returned partially. A RegistryError is raised if
    any file disagrees with the manifest registry.
    """
    path = Path(path)
    if manifest is None and (path / MANIFEST_NAME).exists():
        manifest = load_manifest(path)
    if manifest is not None and manifest.items:
        files = [path / f"{item}.json" for item in manifest.items]
    else:
        files = sorted(p for p in path.glob("*.json") if p.name != MANIFEST_NAME)
    if not files:
        warnings.warn(f"no layout files under {path}", stacklevel=2)
        return []
    layouts = []
    for file in files:
        try:
            payload = json.loads(file.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(str(exc), item=file.name) from exc
        try:
            layout, registry = layout_from_dict(payload)
        except ParseError as exc:
            raise ParseError(str(exc), item=file.name) from exc
        if manifest is not None and registry.to_dict() != manifest.registry.to_dict():
            raise RegistryError(f"{file.name}: registry differs from manifest")
        layouts.append(layout.validate(registry))
    return layouts


def split_corpus(
    corpus: list[Layout], manifest: CorpusManifest
) -> tuple[list[Layout], list[Layout], list[Layout]]:
    """Seed-deterministic partition into train/val/test by manifest fractions."""
    if not corpus:
        raise DataError("cannot split an empty corpus")
    rng = np.random.default_rng(manifest.seed)
    order = rng.permutation(len(corpus))
    n = len(corpus)
    n_train = int(round(manifest.split[0] * n))
    n_val = int(round(manifest.split[1] * n))
    n_train = min(n_train, n)
    n_val = min(n_val, n - n_train)
    train = [corpus[i] for i in order[:n_train]]
    val = [corpus[i] for i in order[n_train : n_train + n_val]]
    test = [corpus[i] for i in order[n_train + n_val :]]
    return train, val, test
