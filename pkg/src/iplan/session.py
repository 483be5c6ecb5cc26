"""Interactive design sessions over the staged pipeline.

A session walks the phases TYPES -> LOCATE -> PARTITION -> REPAIR -> DONE.
Each step() computes exactly one proposal (a type multiset, one center, one
box, or the repaired box set) and parks it as pending; the client then
accepts it or edits it. Every proposal, accept and edit is appended to an
event log whose payloads carry the sampled values, so replaying a log
rebuilds the identical session state without touching the models.

Randomness is drawn from a generator seeded per proposal index with
(seed, index), which keeps live runs, rollbacks and replays aligned.

Edit causality: an edit holds the user's value at its chain position and
invalidates only what is downstream of it. Moving center j during LOCATE
drops centers after j (they are re-proposed); during PARTITION it only
retargets room j, which has no box yet.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    RESOLUTION,
    Boundary,
    Layout,
    Room,
    RoomTypeRegistry,
    TypeCount,
)
from .errors import DomainError, EditError, VariantError
from .io import boundary_from_dict, boundary_to_dict
from .locator import CenterLocator, build_state, predict_center
from .partitioner import (
    Partitioner,
    hard_box_mask,
    initial_state,
    regress_box,
    blend,
    type_code,
)
from .repair import RepairConfig, RepairProblem, repair
from .typegen import TypeCountVae, sample_type_counts

PHASE_TYPES = "TYPES"
PHASE_LOCATE = "LOCATE"
PHASE_PARTITION = "PARTITION"
PHASE_REPAIR = "REPAIR"
PHASE_DONE = "DONE"

VARIANTS = ("auto", "typed", "full")


@dataclass
class ModelBundle:
    """Read-only models shared by all sessions."""

    registry: RoomTypeRegistry
    type_vae: TypeCountVae
    locator: CenterLocator
    partitioner: Partitioner
    locate_mode: str = "sample"
    temperature: float = 1.0
    repair_config: RepairConfig = field(default_factory=RepairConfig)


def _expand_counts(counts: TypeCount) -> list[int]:
    """Registry-order expansion of a count vector into a type-id list."""
    out: list[int] = []
    for type_id, q in enumerate(counts.counts):
        out.extend([type_id] * q)
    return out


class Session:
    def __init__(self, models: ModelBundle, create_event: dict):
        self.models = models
        self.journal: list[dict] = []
        self._apply_create(create_event)
        self.journal.append(create_event)

    # -- construction ------------------------------------------------------

    @classmethod
    def create(
        cls,
        models: ModelBundle,
        boundary: Boundary,
        variant: str,
        seed: int,
        types: Optional[list[int]] = None,
        centers: Optional[list[tuple[int, int]]] = None,
    ) -> "Session":
        if variant not in VARIANTS:
            raise VariantError(f"unknown variant {variant!r}")
        if variant == "typed" and types is None:
            raise VariantError("variant 'typed' requires room types")
        if variant == "full" and (types is None or centers is None):
            raise VariantError("variant 'full' requires room types and centers")
        if centers is not None and types is None:
            raise VariantError("centers cannot be given without types")
        if centers is not None and len(centers) != len(types):
            raise VariantError("types and centers must have equal length")
        event = {
            "op": "create",
            "variant": variant,
            "seed": int(seed),
            "boundary": boundary_to_dict(boundary),
            "types": None if types is None else [int(t) for t in types],
            "centers": None
            if centers is None
            else [[int(r), int(c)] for r, c in centers],
        }
        return cls(models, event)

    def _apply_create(self, event: dict) -> None:
        self.variant: str = event["variant"]
        self.seed: int = event["seed"]
        self.boundary: Boundary = boundary_from_dict(event["boundary"])
        registry = self.models.registry
        types = event["types"]
        if types is not None:
            for t in types:
                registry.check_type_id(t)
            TypeCount(
                tuple(types.count(k) for k in range(registry.size))
            ).validate(registry)
        self.types: Optional[list[int]] = None if types is None else list(types)
        self.centers: list[tuple[int, int]] = []
        if event["centers"] is not None:
            self.centers = [(int(r), int(c)) for r, c in event["centers"]]
        self.boxes: list[list[float]] = []
        self.repaired = False
        self.pending: Optional[dict] = None
        self.proposal_count = 0
        self.box_overrides: dict[int, list[float]] = {}

    # -- derived state -----------------------------------------------------

    @property
    def phase(self) -> str:
        if self.types is None:
            return PHASE_TYPES
        if len(self.centers) < len(self.types):
            return PHASE_LOCATE
        if len(self.boxes) < len(self.types):
            return PHASE_PARTITION
        if not self.repaired:
            return PHASE_REPAIR
        return PHASE_DONE

    def _rng(self) -> np.random.Generator:
        return np.random.default_rng([self.seed, self.proposal_count])

    def partition_state(self) -> np.ndarray:
        state = initial_state(self.boundary)
        k = self.models.registry.size
        for j, box in enumerate(self.boxes):
            state = blend(state, hard_box_mask(np.asarray(box)), type_code(self.types[j], k))
        return state

    # -- protocol ----------------------------------------------------------

    def step(self) -> dict:
        """Compute one proposal for the current phase and mark it pending."""
        if self.pending is not None:
            raise EditError("a proposal is pending; accept or edit it first")
        phase = self.phase
        if phase == PHASE_DONE:
            raise EditError("session is complete")
        rng = self._rng()
        if phase == PHASE_TYPES:
            counts = sample_type_counts(
                self.models.type_vae, self.boundary, self.models.registry, rng, 1
            )[0]
            if counts.total == 0:
                counts = TypeCount(tuple([1] + [0] * (self.models.registry.size - 1)))
            payload = {"counts": list(counts.counts), "types": _expand_counts(counts)}
        elif phase == PHASE_LOCATE:
            j = len(self.centers)
            state = build_state(
                self.boundary,
                list(zip(self.types[:j], self.centers)),
                self.models.registry,
            )
            center = predict_center(
                self.models.locator,
                state,
                self.types[j],
                mode=self.models.locate_mode,
                rng=rng,
                temperature=self.models.temperature,
            )
            payload = {"index": j, "type": self.types[j], "center": list(center)}
        elif phase == PHASE_PARTITION:
            j = len(self.boxes)
            if j in self.box_overrides:
                box = np.asarray(self.box_overrides[j], dtype=np.float64)
                flagged = False
            else:
                box, flagged = regress_box(
                    self.models.partitioner,
                    self.partition_state(),
                    self.centers[j],
                    self.types[j],
                )
            payload = {
                "index": j,
                "type": self.types[j],
                "box": [float(v) for v in box],
                "flagged": bool(flagged),
            }
        else:  # REPAIR
            problem = RepairProblem(self.boundary, np.asarray(self.boxes, dtype=np.float64))
            result = repair(problem, self.models.repair_config)
            payload = {
                "boxes": [[float(v) for v in b] for b in result.boxes],
                "iterations": result.iterations,
                "initial_loss": result.losses[0],
                "final_loss": result.losses[-1],
            }
        self.proposal_count += 1
        event = {"op": "propose", "phase": phase, "payload": payload}
        # pending is a copy so edits to it never mutate the logged event
        self.pending = copy.deepcopy(event)
        self.journal.append(event)
        return {"phase": phase, "pending": True, "payload": copy.deepcopy(payload)}

    def accept(self) -> dict:
        if self.pending is None:
            raise EditError("no pending proposal to accept")
        event = {"op": "accept"}
        self._commit(self.pending)
        self.pending = None
        self.journal.append(event)
        return {"phase": self.phase, "pending": False}

    def _commit(self, proposal: dict) -> None:
        phase = proposal["phase"]
        payload = proposal["payload"]
        if phase == PHASE_TYPES:
            self.types = list(payload["types"])
        elif phase == PHASE_LOCATE:
            self.centers.append(tuple(payload["center"]))
        elif phase == PHASE_PARTITION:
            self.boxes.append(list(payload["box"]))
            self.box_overrides.pop(payload["index"], None)
        else:
            self.boxes = [list(b) for b in payload["boxes"]]
            self.repaired = True

    # -- edits ---------------------------------------------------------------

    def edit(self, op: str, **kwargs) -> dict:
        handler = {
            "accept": lambda: self.accept(),
            "set_types": lambda: self._edit_set_types(**kwargs),
            "move_center": lambda: self._edit_move_center(**kwargs),
            "set_box": lambda: self._edit_set_box(**kwargs),
            "reorder_remaining": lambda: self._edit_reorder(**kwargs),
            "rollback_to": lambda: self._edit_rollback(**kwargs),
        }.get(op)
        if handler is None:
            raise EditError(f"unknown edit op {op!r}")
        return handler()

    def _edit_set_types(self, types: list[int]) -> dict:
        if self.centers:
            raise EditError("cannot reset types after centers are placed")
        registry = self.models.registry
        types = [registry.check_type_id(int(t)) for t in types]
        if not types:
            raise EditError("types list cannot be empty")
        TypeCount(tuple(types.count(k) for k in range(registry.size))).validate(registry)
        self.types = types
        self.pending = None
        self.journal.append({"op": "edit", "kind": "set_types", "types": types})
        return {"phase": self.phase, "types": types}

    def _edit_move_center(self, index: int, center) -> dict:
        index = int(index)
        if not 0 <= index < len(self.centers):
            raise EditError(f"no placed center at index {index}")
        if index < len(self.boxes):
            raise EditError(f"room {index} is already partitioned")
        r, c = int(center[0]), int(center[1])
        if not (0 <= r < RESOLUTION and 0 <= c < RESOLUTION):
            raise DomainError(f"center {center} outside canvas")
        if self.boundary.interior_mask[r, c] != 1:
            raise DomainError(f"center {center} is not an interior pixel")
        in_locate = len(self.centers) < len(self.types)
        self.centers[index] = (r, c)
        if in_locate:
            # downstream placements were conditioned on the old center
            self.centers = self.centers[: index + 1]
        self.pending = None
        self.journal.append(
            {"op": "edit", "kind": "move_center", "index": index, "center": [r, c]}
        )
        return {"phase": self.phase, "index": index, "center": [r, c]}

    def _edit_set_box(self, box, index: int | None = None) -> dict:
        # index is informational (journal audit); the target is always the
        # next unboxed room
        if self.phase != PHASE_PARTITION:
            raise EditError("set_box is only valid while partitioning")
        from .repair import canonical_box

        values = [float(v) for v in canonical_box(box)]
        index = len(self.boxes)
        if self.pending is not None and self.pending["phase"] == PHASE_PARTITION:
            self.pending["payload"]["box"] = values
            self.pending["payload"]["flagged"] = False
        else:
            self.box_overrides[index] = values
        self.journal.append({"op": "edit", "kind": "set_box", "index": index, "box": values})
        return {"phase": self.phase, "index": index, "box": values}

    def _edit_reorder(self, order: list[int]) -> dict:
        if self.types is None:
            raise EditError("no types to reorder yet")
        start = len(self.boxes) if self.phase == PHASE_PARTITION else len(self.centers)
        if self.phase not in (PHASE_LOCATE, PHASE_PARTITION):
            raise EditError("nothing left to reorder")
        remaining = list(range(start, len(self.types)))
        if sorted(order) != remaining:
            raise EditError(f"order must be a permutation of {remaining}")
        self.types = self.types[:start] + [self.types[i] for i in order]
        if self.phase == PHASE_PARTITION:
            tail = [self.centers[i] for i in order]
            self.centers = self.centers[:start] + tail
        self.pending = None
        self.journal.append({"op": "edit", "kind": "reorder_remaining", "order": list(order)})
        return {"phase": self.phase, "types": self.types}

    def _edit_rollback(self, step: int) -> dict:
        """Rewind to the state after the first ``step`` post-create events."""
        step = int(step)
        effective = effective_events(self.journal)
        if not 0 <= step <= len(effective) - 1:
            raise EditError(f"cannot roll back to step {step} of {len(effective) - 1}")
        self.journal.append({"op": "rollback", "to": step})
        replayed = replay(self.models, self.journal)
        self._adopt(replayed)
        return {"phase": self.phase, "rolled_back_to": step}

    def _adopt(self, other: "Session") -> None:
        self.variant = other.variant
        self.seed = other.seed
        self.boundary = other.boundary
        self.types = other.types
        self.centers = other.centers
        self.boxes = other.boxes
        self.repaired = other.repaired
        self.pending = other.pending
        self.proposal_count = other.proposal_count
        self.box_overrides = other.box_overrides

    # -- serialization -------------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "variant": self.variant,
            "seed": self.seed,
            "phase": self.phase,
            "types": self.types,
            "centers": [list(c) for c in self.centers],
            "boxes": [list(b) for b in self.boxes],
            "repaired": self.repaired,
            "pending": self.pending,
            "proposal_count": self.proposal_count,
            "boundary": boundary_to_dict(self.boundary),
            "registry_hash": self.models.registry.content_hash(),
        }

    def state_bytes(self) -> bytes:
        return json.dumps(self.state_dict(), sort_keys=True).encode()

    def to_layout(self) -> Layout:
        """Materialize the finished session as a Layout (integer boxes)."""
        if self.phase != PHASE_DONE:
            raise EditError("session is not finished")
        rooms = []
        for type_id, center, box in zip(self.types, self.centers, self.boxes):
            top = int(np.clip(round(box[0]), 0, RESOLUTION - 1))
            left = int(np.clip(round(box[1]), 0, RESOLUTION - 1))
            bottom = int(np.clip(round(box[2]), top + 1, RESOLUTION))
            right = int(np.clip(round(box[3]), left + 1, RESOLUTION))
            r = int(np.clip(center[0], top, bottom - 1))
            c = int(np.clip(center[1], left, right - 1))
            rooms.append(Room(type_id=type_id, center=(r, c), box=(top, left, bottom, right)))
        return Layout(boundary=self.boundary, rooms=tuple(rooms))

    def render(self) -> np.ndarray:
        """Render the partial design: committed boxes over the boundary."""
        from .core import render_layout

        rooms = []
        for type_id, box in zip(self.types or [], self.boxes):
            top = int(np.clip(round(box[0]), 0, RESOLUTION - 1))
            left = int(np.clip(round(box[1]), 0, RESOLUTION - 1))
            bottom = int(np.clip(round(box[2]), top + 1, RESOLUTION))
            right = int(np.clip(round(box[3]), left + 1, RESOLUTION))
            rooms.append(
                Room(
                    type_id=type_id,
                    center=((top + bottom) // 2, (left + right) // 2),
                    box=(top, left, bottom, right),
                )
            )
        return render_layout(Layout(boundary=self.boundary, rooms=tuple(rooms)))


def effective_events(log: list[dict]) -> list[dict]:
    """Fold rollback events: each one truncates history to its target index,
    where index n means "after the n-th post-create event"."""
    eff: list[dict] = []
    for event in log:
        if event["op"] == "rollback":
            eff = eff[: event["to"] + 1]
        else:
            eff.append(event)
    return eff


def replay(models: ModelBundle, log: list[dict]) -> Session:
    """Rebuild a session from its event log without running any model."""
    if not log or log[0]["op"] != "create":
        raise EditError("log must start with a create event")
    effective = effective_events(log)
    session = Session(models, effective[0])
    for event in effective[1:]:
        if event["op"] == "propose":
            session.proposal_count += 1
            session.pending = copy.deepcopy(event)
        elif event["op"] == "accept":
            if session.pending is None:
                raise EditError("accept event without a pending proposal")
            session._commit(session.pending)
            session.pending = None
        elif event["op"] == "edit":
            kind = event["kind"]
            payload = {k: v for k, v in event.items() if k not in ("op", "kind")}
            session.edit(kind, **payload)
        else:
            raise EditError(f"unknown event op {event['op']!r}")
    # the journal keeps the raw history, including rollbacks
    session.journal = copy.deepcopy(log)
    return session


def run_auto(
    models: ModelBundle,
    boundary: Boundary,
    variant: str,
    seed: int,
    types: Optional[list[int]] = None,
    centers: Optional[list[tuple[int, int]]] = None,
    max_steps: int = 256,
) -> tuple[Layout, Session]:
    """Drive a session to DONE with auto-accepted proposals."""
    session = Session.create(models, boundary, variant, seed, types=types, centers=centers)
    steps = 0
    while session.phase != PHASE_DONE:
        session.step()
        session.accept()
        steps += 1
        if steps > max_steps:
            raise EditError("session did not terminate")
    return session.to_layout(), session
