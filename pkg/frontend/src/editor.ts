// Boundary editor: click to drop grid-snapped vertices, close the loop,
// then click a stroke cell to place the front door.

import { BoundaryError, Cell, rasterizeBoundary, RasterizedBoundary, toPayload } from "./raster.js";
import { BoundaryPayload, GRID } from "./types.js";

const CLOSE_RADIUS = 3; // grid cells

export type EditorPhase = "drawing" | "door" | "done";

export class BoundaryEditor {
  polygon: Cell[] = [];
  phase: EditorPhase = "drawing";
  raster: RasterizedBoundary | null = null;
  badEdges: [number, number][] = [];
  onChange: () => void = () => {};
  onError: (message: string) => void = () => {};

  constructor(readonly canvas: HTMLCanvasElement, readonly scale: number) {
    canvas.width = GRID * scale;
    canvas.height = GRID * scale;
    canvas.addEventListener("pointerdown", (e) => this.click(e));
  }

  private toCell(e: PointerEvent): Cell {
    const rect = this.canvas.getBoundingClientRect();
    const col = Math.round(((e.clientX - rect.left) / rect.width) * GRID);
    const row = Math.round(((e.clientY - rect.top) / rect.height) * GRID);
    return [
      Math.max(1, Math.min(GRID - 2, row)),
      Math.max(1, Math.min(GRID - 2, col)),
    ];
  }

  private click(e: PointerEvent): void {
    const cell = this.toCell(e);
    if (this.phase === "drawing") {
      this.addVertex(cell);
    } else if (this.phase === "door") {
      this.placeDoor(cell);
    }
    this.onChange();
    this.draw();
  }

  addVertex(cell: Cell): void {
    if (this.polygon.length >= 3) {
      const [r0, c0] = this.polygon[0];
      if (Math.hypot(cell[0] - r0, cell[1] - c0) <= CLOSE_RADIUS) {
        this.closePolygon();
        return;
      }
    }
    this.polygon.push(cell);
  }

  closePolygon(): void {
    try {
      // probe-rasterize with a dummy door on the first vertex
      rasterizeBoundary(this.polygon, this.polygon[0]);
      this.badEdges = [];
      this.phase = "door";
    } catch (err) {
      if (err instanceof BoundaryError) {
        this.badEdges = err.edges;
        this.onError(err.message);
      } else {
        throw err;
      }
    }
  }

  placeDoor(cell: Cell): void {
    try {
      this.raster = rasterizeBoundary(this.polygon, cell);
      this.phase = "done";
    } catch (err) {
      if (err instanceof BoundaryError) {
        this.onError(err.message);
      } else {
        throw err;
      }
    }
  }

  reset(): void {
    this.polygon = [];
    this.phase = "drawing";
    this.raster = null;
    this.badEdges = [];
    this.onChange();
    this.draw();
  }

  payload(): BoundaryPayload | null {
    return this.raster ? toPayload(this.raster) : null;
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const s = this.scale;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    ctx.fillStyle = "#ffffff";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);

    // light grid every 8 cells
    ctx.strokeStyle = "#eeeeee";
    ctx.lineWidth = 1;
    for (let k = 0; k <= GRID; k += 8) {
      ctx.beginPath();
      ctx.moveTo(k * s, 0);
      ctx.lineTo(k * s, GRID * s);
      ctx.moveTo(0, k * s);
      ctx.lineTo(GRID * s, k * s);
      ctx.stroke();
    }

    if (this.raster) {
      this.paintMask(ctx, this.raster.interior, "#f2f2f2");
      this.paintMask(ctx, this.raster.stroke, "#3c3c3c");
      this.paintMask(ctx, this.raster.door, "#aa6428");
      return;
    }

    for (let i = 0; i < this.polygon.length; i++) {
      const [r1, c1] = this.polygon[i];
      if (i + 1 < this.polygon.length || this.phase !== "drawing") {
        const [r2, c2] = this.polygon[(i + 1) % this.polygon.length];
        const bad = this.badEdges.some(([a, b]) => a === i || b === i);
        ctx.strokeStyle = bad ? "#dc2626" : "#1f2937";
        ctx.lineWidth = bad ? 3 : 2;
        ctx.beginPath();
        ctx.moveTo(c1 * s, r1 * s);
        ctx.lineTo(c2 * s, r2 * s);
        ctx.stroke();
      }
      ctx.fillStyle = i === 0 ? "#2563eb" : "#1f2937";
      ctx.beginPath();
      ctx.arc(c1 * s, r1 * s, 4, 0, Math.PI * 2);
      ctx.fill();
    }
    if (this.phase === "door") {
      ctx.fillStyle = "#6b7280";
      ctx.font = "12px sans-serif";
      ctx.fillText("click the outline to place the front door", 8, 14);
    }
  }

  private paintMask(ctx: CanvasRenderingContext2D, mask: Uint8Array, color: string): void {
    ctx.fillStyle = color;
    for (let r = 0; r < GRID; r++) {
      for (let c = 0; c < GRID; c++) {
        if (mask[r * GRID + c] === 1) {
          ctx.fillRect(c * this.scale, r * this.scale, this.scale, this.scale);
        }
      }
    }
  }
}
