// End-to-end: the scripted UI path (rasterizer + SessionStore, the exact
// code the browser runs) must produce a server layout identical to the same
// script issued as raw API calls, and a reload must reconstruct the board.
//
// Spawns the python dev server; requires the package to be installed.

import { ChildProcess, spawn } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { rectangleBoundary } from "../src/raster.js";
import { SessionStore } from "../src/store.js";
import { BoundaryPayload, SessionResponse } from "../src/types.js";

const PORT = 8974;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;

async function waitForHealth(timeoutMs = 60_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const res = await fetch(`${BASE}/health`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("dev server did not come up");
    await new Promise((r) => setTimeout(r, 500));
  }
}

beforeAll(async () => {
  server = spawn("python3", ["scripts/dev_server.py", "--port", String(PORT)], {
    cwd: new URL("../..", import.meta.url).pathname,
    stdio: "ignore",
  });
  await waitForHealth();
}, 90_000);

afterAll(() => {
  server?.kill();
});

const SEED = 5;
const TYPES = [0, 1, 1];
const DRAG_TARGET: [number, number] = [55, 60];

/** The scripted design session: one mid-chain center drag, then finish. */
async function scriptThroughUi(boundary: BoundaryPayload): Promise<SessionResponse> {
  const store = new SessionStore(new ApiClient(BASE));
  await store.create(boundary, "typed", SEED, TYPES);
  await store.step(); // propose first center
  await store.accept();
  await store.dragCenter(0, DRAG_TARGET[0], DRAG_TARGET[1]); // user adjusts it
  for (let guard = 0; guard < 32; guard++) {
    const snap = store.current!;
    if (snap.state.phase === "DONE") break;
    if (snap.state.pending) {
      await store.accept();
    } else {
      await store.step();
    }
  }
  return store.current!;
}

async function post(path: string, body?: unknown): Promise<SessionResponse> {
  const res = await fetch(`${BASE}${path}`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  if (!res.ok) throw new Error(`${path}: ${res.status} ${await res.text()}`);
  return (await res.json()) as SessionResponse;
}

async function scriptThroughRawApi(boundary: BoundaryPayload): Promise<SessionResponse> {
  const created = await post("/sessions", {
    boundary,
    variant: "typed",
    seed: SEED,
    types: TYPES,
  });
  const id = created.id;
  await post(`/sessions/${id}/step`);
  await post(`/sessions/${id}/edit`, { op: "accept" });
  await post(`/sessions/${id}/edit`, { op: "move_center", index: 0, center: DRAG_TARGET });
  for (let guard = 0; guard < 32; guard++) {
    const res = await fetch(`${BASE}/sessions/${id}/state`);
    const snap = (await res.json()) as SessionResponse;
    if (snap.state.phase === "DONE") return snap;
    if (snap.state.pending) {
      await post(`/sessions/${id}/edit`, { op: "accept" });
    } else {
      await post(`/sessions/${id}/step`);
    }
  }
  throw new Error("raw script did not finish");
}

describe("designer against the live service", () => {
  it("UI-driven session equals the same script through the raw API", async () => {
    const boundary = rectangleBoundary(20, 20, 90, 100);
    const viaUi = await scriptThroughUi(boundary);
    const viaApi = await scriptThroughRawApi(boundary);
    expect(viaUi.state.phase).toBe("DONE");
    // same layout: types, centers and boxes agree exactly
    expect(viaUi.state.types).toEqual(viaApi.state.types);
    expect(viaUi.state.centers).toEqual(viaApi.state.centers);
    expect(viaUi.state.boxes).toEqual(viaApi.state.boxes);
    expect(viaUi.state.centers[0]).toEqual(DRAG_TARGET);
  }, 120_000);

  it("reload mid-session reconstructs the identical board", async () => {
    const boundary = rectangleBoundary(24, 24, 88, 96);
    const store = new SessionStore(new ApiClient(BASE));
    await store.create(boundary, "typed", 9, [0, 1]);
    await store.step();
    await store.accept();
    await store.step(); // leave a proposal pending
    const before = store.current!;

    // fresh store over the same session id: the reload path
    const reloaded = new SessionStore(new ApiClient(BASE));
    await reloaded.attach(before.id);
    expect(reloaded.current!.state).toEqual(before.state);
    expect(reloaded.current!.events).toEqual(before.events);
  }, 60_000);

  it("renders a PNG for the live board", async () => {
    const boundary = rectangleBoundary(30, 30, 80, 90);
    const store = new SessionStore(new ApiClient(BASE));
    await store.create(boundary, "auto", 1);
    const res = await fetch(store.renderUrl()!);
    expect(res.status).toBe(200);
    expect(res.headers.get("content-type")).toBe("image/png");
  }, 60_000);
});
