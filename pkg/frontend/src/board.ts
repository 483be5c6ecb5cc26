// Canvas board: draws the session state at 4x scale and turns pointer
// gestures (center drags, box corner drags) into store edits.

import { SessionStore } from "./store.js";
import { rleDecode } from "./raster.js";
import { GRID, SessionResponse } from "./types.js";

export const SCALE = 4;

const ROOM_COLORS = [
  "#ee4d4d",
  "#ffd274",
  "#c67c7b",
  "#bebebe",
  "#e87a90",
  "#bfe3e8",
  "#ff8c69",
  "#7ba779",
  "#1f849b",
  "#d3a2c7",
  "#785a67",
  "#f4b183",
];

export function roomColor(typeId: number): string {
  return ROOM_COLORS[typeId % ROOM_COLORS.length];
}

interface DragState {
  kind: "center" | "corner";
  index: number;
  corner?: number; // 0 tl, 1 tr, 2 br, 3 bl
  row: number;
  col: number;
}

export class Board {
  private drag: DragState | null = null;
  onError: (message: string) => void = () => {};

  constructor(
    readonly canvas: HTMLCanvasElement,
    readonly store: SessionStore
  ) {
    canvas.width = GRID * SCALE;
    canvas.height = GRID * SCALE;
    canvas.addEventListener("pointerdown", (e) => this.pointerDown(e));
    canvas.addEventListener("pointermove", (e) => this.pointerMove(e));
    canvas.addEventListener("pointerup", (e) => this.pointerUp(e));
    store.subscribe(() => this.draw());
  }

  private toGrid(e: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const col = ((e.clientX - rect.left) / rect.width) * GRID;
    const row = ((e.clientY - rect.top) / rect.height) * GRID;
    return [Math.max(0, Math.min(GRID - 1, row)), Math.max(0, Math.min(GRID - 1, col))];
  }

  draw(): void {
    const snap = this.store.current;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (!snap) return;
    const { state } = snap;

    const interior = rleDecode(state.boundary.interior, GRID * GRID);
    const stroke = rleDecode(state.boundary.boundary, GRID * GRID);
    const door = rleDecode(state.boundary.frontdoor, GRID * GRID);

    ctx.fillStyle = "#ffffff";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    this.paintMask(ctx, interior, "#f2f2f2");

    state.boxes.forEach((box, i) => {
      const typeId = state.types?.[i] ?? 0;
      this.paintBox(ctx, box, roomColor(typeId), 0.85);
    });

    const pending = state.pending;
    if (pending?.phase === "PARTITION" && pending.payload.box) {
      this.paintBox(ctx, pending.payload.box as number[], "#3b82f6", 0.35, true);
    }
    if (pending?.phase === "REPAIR" && pending.payload.boxes) {
      for (const box of pending.payload.boxes as number[][]) {
        this.paintBox(ctx, box, "#10b981", 0.3, true);
      }
    }

    this.paintMask(ctx, stroke, "#3c3c3c");
    this.paintMask(ctx, door, "#aa6428");

    state.centers.forEach(([r, c], i) => {
      const partitioned = i < state.boxes.length;
      ctx.beginPath();
      ctx.arc(c * SCALE + SCALE / 2, r * SCALE + SCALE / 2, 6, 0, Math.PI * 2);
      ctx.fillStyle = partitioned ? "#00000055" : "#1d4ed8";
      ctx.fill();
      ctx.strokeStyle = "#ffffff";
      ctx.stroke();
    });
    const pendingCenter = pending?.phase === "LOCATE" ? pending.payload.center : null;
    if (pendingCenter) {
      const [r, c] = pendingCenter as [number, number];
      ctx.beginPath();
      ctx.arc(c * SCALE + SCALE / 2, r * SCALE + SCALE / 2, 7, 0, Math.PI * 2);
      ctx.strokeStyle = "#1d4ed8";
      ctx.setLineDash([4, 3]);
      ctx.stroke();
      ctx.setLineDash([]);
    }
  }

  private paintMask(ctx: CanvasRenderingContext2D, mask: Uint8Array, color: string): void {
    ctx.fillStyle = color;
    for (let r = 0; r < GRID; r++) {
      let runStart = -1;
      for (let c = 0; c <= GRID; c++) {
        const on = c < GRID && mask[r * GRID + c] === 1;
        if (on && runStart < 0) runStart = c;
        if (!on && runStart >= 0) {
          ctx.fillRect(runStart * SCALE, r * SCALE, (c - runStart) * SCALE, SCALE);
          runStart = -1;
        }
      }
    }
  }

  private paintBox(
    ctx: CanvasRenderingContext2D,
    box: number[],
    color: string,
    alpha: number,
    outline = false
  ): void {
    const [top, left, bottom, right] = box;
    ctx.globalAlpha = alpha;
    ctx.fillStyle = color;
    ctx.fillRect(left * SCALE, top * SCALE, (right - left) * SCALE, (bottom - top) * SCALE);
    ctx.globalAlpha = 1;
    if (outline) {
      ctx.strokeStyle = color;
      ctx.lineWidth = 2;
      ctx.strokeRect(left * SCALE, top * SCALE, (right - left) * SCALE, (bottom - top) * SCALE);
    }
  }

  // -- gestures -------------------------------------------------------------

  private pointerDown(e: PointerEvent): void {
    const snap = this.store.current;
    if (!snap) return;
    const [row, col] = this.toGrid(e);

    const pendingBox = this.pendingBox(snap);
    if (pendingBox) {
      const corner = hitCorner(pendingBox, row, col);
      if (corner !== null) {
        this.drag = { kind: "corner", index: -1, corner, row, col };
        this.canvas.setPointerCapture(e.pointerId);
        return;
      }
    }
    const idx = this.hitCenter(snap, row, col);
    if (idx !== null) {
      this.drag = { kind: "center", index: idx, row, col };
      this.canvas.setPointerCapture(e.pointerId);
    }
  }

  private pendingBox(snap: SessionResponse): number[] | null {
    const pending = snap.state.pending;
    if (pending?.phase === "PARTITION" && pending.payload.box) {
      return pending.payload.box as number[];
    }
    return null;
  }

  private hitCenter(snap: SessionResponse, row: number, col: number): number | null {
    const { centers, boxes } = snap.state;
    for (let i = centers.length - 1; i >= 0; i--) {
      if (i < boxes.length) continue; // partitioned rooms are frozen
      const [r, c] = centers[i];
      if (Math.hypot(r - row, c - col) <= 3) return i;
    }
    return null;
  }

  private pointerMove(e: PointerEvent): void {
    if (!this.drag) return;
    const [row, col] = this.toGrid(e);
    this.drag.row = row;
    this.drag.col = col;
    this.draw();
    const ctx = this.canvas.getContext("2d");
    if (ctx) {
      ctx.beginPath();
      ctx.arc(col * SCALE, row * SCALE, 8, 0, Math.PI * 2);
      ctx.strokeStyle = "#f59e0b";
      ctx.lineWidth = 2;
      ctx.stroke();
    }
  }

  private pointerUp(e: PointerEvent): void {
    const drag = this.drag;
    this.drag = null;
    if (!drag) return;
    const snap = this.store.current;
    if (!snap) return;
    const [row, col] = this.toGrid(e);
    if (drag.kind === "center") {
      this.store
        .dragCenter(drag.index, Math.round(row), Math.round(col))
        .catch((err) => this.onError(String(err?.message ?? err)));
    } else {
      const box = this.pendingBox(snap);
      if (!box) return;
      const next = resizeToCorner(box, drag.corner ?? 0, row, col);
      this.store.resizeBox(next).catch((err) => this.onError(String(err?.message ?? err)));
    }
  }
}

export function hitCorner(box: number[], row: number, col: number): number | null {
  const [top, left, bottom, right] = box;
  const corners: [number, number][] = [
    [top, left],
    [top, right],
    [bottom, right],
    [bottom, left],
  ];
  for (let i = 0; i < corners.length; i++) {
    if (Math.hypot(corners[i][0] - row, corners[i][1] - col) <= 3) return i;
  }
  return null;
}

/** New box with the dragged corner moved; opposite corner stays fixed. */
export function resizeToCorner(
  box: number[],
  corner: number,
  row: number,
  col: number
): [number, number, number, number] {
  let [top, left, bottom, right] = box;
  if (corner === 0) {
    top = row;
    left = col;
  } else if (corner === 1) {
    top = row;
    right = col;
  } else if (corner === 2) {
    bottom = row;
    right = col;
  } else {
    bottom = row;
    left = col;
  }
  return [
    Math.min(top, bottom),
    Math.min(left, right),
    Math.max(top, bottom),
    Math.max(left, right),
  ];
}
