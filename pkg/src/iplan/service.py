"""HTTP API over design sessions, consumed by the browser designer.

One lock per session serializes its step/edit traffic; separate sessions
run concurrently against the shared read-only models. Journals stream to
disk as JSONL with a state snapshot every 20 events, and unknown session
ids are recovered from disk by replay.
"""

from __future__ import annotations

import io
import json
import threading
import uuid
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import Response
from pydantic import BaseModel

from .errors import IplanError, NoFreeSpace
from .io import boundary_from_dict
from .session import ModelBundle, Session, effective_events, replay

SNAPSHOT_EVERY = 20


class CreateSessionRequest(BaseModel):
    boundary: dict
    variant: str
    seed: int = 0
    types: Optional[list[int]] = None
    centers: Optional[list[list[int]]] = None


class EditRequest(BaseModel):
    op: str
    index: Optional[int] = None
    center: Optional[list[int]] = None
    box: Optional[list[float]] = None
    types: Optional[list[int]] = None
    order: Optional[list[int]] = None
    step: Optional[int] = None


class _SessionSlot:
    def __init__(self, session: Session):
        self.session = session
        self.lock = threading.Lock()
        self.persisted_events = 0


def create_app(models: ModelBundle, session_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="iplan session service")
    slots: dict[str, _SessionSlot] = {}
    store = Path(session_dir) if session_dir else None
    if store:
        store.mkdir(parents=True, exist_ok=True)

    def persist(sid: str, slot: _SessionSlot) -> None:
        if store is None:
            return
        journal = slot.session.journal
        if slot.persisted_events < len(journal):
            with (store / f"{sid}.jsonl").open("a", encoding="utf-8") as fh:
                for event in journal[slot.persisted_events :]:
                    fh.write(json.dumps(event) + "\n")
            slot.persisted_events = len(journal)
            if slot.persisted_events % SNAPSHOT_EVERY == 0:
                (store / f"{sid}.snapshot.json").write_text(
                    json.dumps(slot.session.state_dict(), sort_keys=True),
                    encoding="utf-8",
                )

    def get_slot(sid: str) -> _SessionSlot:
        slot = slots.get(sid)
        if slot is None and store is not None:
            log_file = store / f"{sid}.jsonl"
            if log_file.exists():
                journal = [
                    json.loads(line)
                    for line in log_file.read_text(encoding="utf-8").splitlines()
                    if line.strip()
                ]
                slot = _SessionSlot(replay(models, journal))
                slot.persisted_events = len(journal)
                slots[sid] = slot
        if slot is None:
            raise HTTPException(status_code=404, detail=f"unknown session {sid}")
        return slot

    def state_payload(sid: str, session: Session) -> dict:
        return {
            "id": sid,
            "state": session.state_dict(),
            "registry": models.registry.to_dict(),
            "events": len(effective_events(session.journal)) - 1,
        }

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest) -> dict:
        try:
            boundary = boundary_from_dict(req.boundary)
            centers = None
            if req.centers is not None:
                centers = [(int(r), int(c)) for r, c in req.centers]
            session = Session.create(
                models, boundary, req.variant, req.seed, types=req.types, centers=centers
            )
        except IplanError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        sid = uuid.uuid4().hex[:12]
        slot = _SessionSlot(session)
        slots[sid] = slot
        persist(sid, slot)
        return state_payload(sid, session)

    @app.post("/sessions/{sid}/step")
    def step(sid: str) -> dict:
        slot = get_slot(sid)
        with slot.lock:
            try:
                delta = slot.session.step()
            except NoFreeSpace as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except IplanError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            persist(sid, slot)
            return {"delta": delta, **state_payload(sid, slot.session)}

    @app.post("/sessions/{sid}/edit")
    def edit(sid: str, req: EditRequest) -> dict:
        slot = get_slot(sid)
        with slot.lock:
            kwargs = {
                k: v
                for k, v in req.model_dump().items()
                if k != "op" and v is not None
            }
            try:
                delta = slot.session.edit(req.op, **kwargs)
            except IplanError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            persist(sid, slot)
            return {"delta": delta, **state_payload(sid, slot.session)}

    @app.get("/sessions/{sid}/state")
    def state(sid: str) -> dict:
        slot = get_slot(sid)
        with slot.lock:
            return state_payload(sid, slot.session)

    @app.get("/sessions/{sid}/render")
    def render(sid: str) -> Response:
        from PIL import Image

        slot = get_slot(sid)
        with slot.lock:
            img = slot.session.render()
        buf = io.BytesIO()
        Image.fromarray(img).save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    return app


def mount_ui(app: FastAPI, ui_dir: str | Path) -> None:
    from fastapi.staticfiles import StaticFiles

    app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
