// App wiring: boundary editor on the left, live board plus controls on the
// right. All state lives on the server; this file only routes events.

import { ApiClient } from "./api.js";
import { Board, roomColor } from "./board.js";
import { BoundaryEditor } from "./editor.js";
import { SessionStore } from "./store.js";
import { SessionResponse } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const api = new ApiClient("");
const store = new SessionStore(api);

const editor = new BoundaryEditor($<HTMLCanvasElement>("editor-canvas"), 4);
const board = new Board($<HTMLCanvasElement>("board-canvas"), store);

const statusEl = $<HTMLDivElement>("status");
const errorEl = $<HTMLDivElement>("error");
const stepBtn = $<HTMLButtonElement>("step");
const acceptBtn = $<HTMLButtonElement>("accept");
const startBtn = $<HTMLButtonElement>("start");
const resetBtn = $<HTMLButtonElement>("reset-editor");
const autoRunBtn = $<HTMLButtonElement>("auto-run");
const variantSel = $<HTMLSelectElement>("variant");
const seedInput = $<HTMLInputElement>("seed");
const rollback = $<HTMLInputElement>("rollback");
const renderImg = $<HTMLImageElement>("render");
const queueEl = $<HTMLUListElement>("queue");
const proposalEl = $<HTMLDivElement>("proposal");

function showError(message: string): void {
  errorEl.textContent = message;
  errorEl.classList.add("visible");
  setTimeout(() => errorEl.classList.remove("visible"), 4000);
}

editor.onError = showError;
board.onError = showError;

editor.onChange = () => {
  startBtn.disabled = editor.phase !== "done";
};

function describeProposal(snap: SessionResponse): string {
  const pending = snap.state.pending;
  if (!pending) return "";
  const names = snap.registry.names;
  const payload = pending.payload;
  switch (pending.phase) {
    case "TYPES":
      return `proposed rooms: ${(payload.types ?? []).map((t) => names[t]).join(", ")}`;
    case "LOCATE":
      return `center for ${names[payload.type ?? 0]} at (${payload.center})`;
    case "PARTITION":
      return `box for ${names[payload.type ?? 0]}: ${(payload.box as number[])
        .map((v) => v.toFixed(1))
        .join(", ")}`;
    case "REPAIR":
      return `repair pass over ${(payload.boxes as number[][]).length} boxes`;
    default:
      return "";
  }
}

function renderQueue(snap: SessionResponse): void {
  queueEl.innerHTML = "";
  const { state, registry } = snap;
  if (!state.types) return;
  const start = state.phase === "PARTITION" ? state.boxes.length : state.centers.length;
  state.types.forEach((typeId, i) => {
    const li = document.createElement("li");
    li.textContent = registry.names[typeId];
    li.style.borderLeft = `10px solid ${roomColor(typeId)}`;
    if (i < start) {
      li.classList.add("done");
    } else if (state.phase === "LOCATE" || state.phase === "PARTITION") {
      const up = document.createElement("button");
      up.textContent = "^";
      up.title = "move earlier in the remaining queue";
      up.disabled = i === start;
      up.onclick = () => {
        const remaining = state.types!.map((_, j) => j).filter((j) => j >= start);
        const pos = remaining.indexOf(i);
        if (pos <= 0) return;
        [remaining[pos - 1], remaining[pos]] = [remaining[pos], remaining[pos - 1]];
        store.reorderRemaining(remaining).catch((err) => showError(err.message));
      };
      li.appendChild(up);
    }
    queueEl.appendChild(li);
  });
}

store.subscribe((snap) => {
  stepBtn.disabled = !store.canStep;
  acceptBtn.disabled = !store.canAccept;
  autoRunBtn.disabled = !snap || snap.state.phase === "DONE";
  if (!snap) {
    statusEl.textContent = "draw a boundary, then start a session";
    return;
  }
  statusEl.textContent = `session ${snap.id} | phase ${snap.state.phase} | ` +
    `${snap.state.centers.length} centers, ${snap.state.boxes.length} boxes`;
  proposalEl.textContent = describeProposal(snap);
  rollback.max = String(snap.events);
  rollback.value = String(snap.events);
  renderQueue(snap);
  const url = store.renderUrl();
  if (url) renderImg.src = `${url}&e=${snap.events}`;
});

startBtn.onclick = async () => {
  const payload = editor.payload();
  if (!payload) {
    showError("finish the boundary first");
    return;
  }
  try {
    await store.create(payload, variantSel.value, Number(seedInput.value) || 0);
  } catch (err) {
    showError(String((err as Error).message));
  }
};

resetBtn.onclick = () => editor.reset();

stepBtn.onclick = () => store.step().catch((err) => showError(err.message));
acceptBtn.onclick = () => store.accept().catch((err) => showError(err.message));

autoRunBtn.onclick = async () => {
  try {
    for (let guard = 0; guard < 128; guard++) {
      const snap = store.current;
      if (!snap || snap.state.phase === "DONE") break;
      if (snap.state.pending) {
        await store.accept();
      } else {
        await store.step();
      }
    }
  } catch (err) {
    showError(String((err as Error).message));
  }
};

rollback.onchange = () => {
  store.rollbackTo(Number(rollback.value)).catch((err) => showError(err.message));
};

// reload path: ?session=<id> reattaches to a live session
const params = new URLSearchParams(window.location.search);
const existing = params.get("session");
if (existing) {
  store.attach(existing).catch((err) => showError(err.message));
}
store.subscribe((snap) => {
  if (snap) {
    const url = new URL(window.location.href);
    url.searchParams.set("session", snap.id);
    window.history.replaceState(null, "", url.toString());
  }
});
