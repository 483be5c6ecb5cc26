// Client-side boundary rasterization at the pipeline's native 128x128 grid.
// The masks and their RLE wire format must match the server codec exactly.

import { BoundaryPayload, GRID } from "./types.js";

export type Cell = [number, number]; // (row, col), integer grid cells

/** Row-major run lengths of a 0/1 mask; the first run counts zeros. */
export function rleEncode(mask: Uint8Array): number[] {
  const counts: number[] = [];
  let value = 0;
  let run = 0;
  for (const bit of mask) {
    if (bit === value) {
      run += 1;
    } else {
      counts.push(run);
      value = 1 - value;
      run = 1;
    }
  }
  counts.push(run);
  return counts;
}

export function rleDecode(counts: number[], total: number): Uint8Array {
  const out = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const run of counts) {
    if (run < 0 || pos + run > total) {
      throw new Error("invalid RLE data");
    }
    if (value === 1) {
      out.fill(1, pos, pos + run);
    }
    pos += run;
    value = 1 - value;
  }
  if (pos !== total) {
    throw new Error(`RLE runs cover ${pos} of ${total} cells`);
  }
  return out;
}

function orientation(a: Cell, b: Cell, c: Cell): number {
  const v = (b[1] - a[1]) * (c[0] - a[0]) - (b[0] - a[0]) * (c[1] - a[1]);
  return v > 0 ? 1 : v < 0 ? -1 : 0;
}

function onSegment(a: Cell, b: Cell, p: Cell): boolean {
  return (
    Math.min(a[0], b[0]) <= p[0] &&
    p[0] <= Math.max(a[0], b[0]) &&
    Math.min(a[1], b[1]) <= p[1] &&
    p[1] <= Math.max(a[1], b[1])
  );
}

function segmentsIntersect(p1: Cell, p2: Cell, q1: Cell, q2: Cell): boolean {
  const o1 = orientation(p1, p2, q1);
  const o2 = orientation(p1, p2, q2);
  const o3 = orientation(q1, q2, p1);
  const o4 = orientation(q1, q2, p2);
  if (o1 !== o2 && o3 !== o4) return true;
  if (o1 === 0 && onSegment(p1, p2, q1)) return true;
  if (o2 === 0 && onSegment(p1, p2, q2)) return true;
  if (o3 === 0 && onSegment(q1, q2, p1)) return true;
  if (o4 === 0 && onSegment(q1, q2, p2)) return true;
  return false;
}

/** Index pairs of polygon edges that cross; empty for a simple polygon. */
export function selfIntersections(polygon: Cell[]): [number, number][] {
  const n = polygon.length;
  const bad: [number, number][] = [];
  for (let i = 0; i < n; i++) {
    const a1 = polygon[i];
    const a2 = polygon[(i + 1) % n];
    for (let j = i + 1; j < n; j++) {
      // skip edges sharing a vertex
      if (j === i || (j + 1) % n === i || (i + 1) % n === j) continue;
      const b1 = polygon[j];
      const b2 = polygon[(j + 1) % n];
      if (segmentsIntersect(a1, a2, b1, b2)) {
        bad.push([i, j]);
      }
    }
  }
  return bad;
}

function drawSegment(mask: Uint8Array, a: Cell, b: Cell): void {
  // integer Bresenham along a grid-snapped edge
  let [r0, c0] = a;
  const [r1, c1] = b;
  const dr = Math.abs(r1 - r0);
  const dc = Math.abs(c1 - c0);
  const sr = r0 < r1 ? 1 : -1;
  const sc = c0 < c1 ? 1 : -1;
  let err = dc - dr;
  for (;;) {
    mask[r0 * GRID + c0] = 1;
    if (r0 === r1 && c0 === c1) break;
    const e2 = 2 * err;
    if (e2 > -dr) {
      err -= dr;
      c0 += sc;
    }
    if (e2 < dc) {
      err += dc;
      r0 += sr;
    }
  }
}

function fillPolygon(polygon: Cell[]): Uint8Array {
  // even-odd scanline over pixel centers
  const mask = new Uint8Array(GRID * GRID);
  const n = polygon.length;
  for (let r = 0; r < GRID; r++) {
    const crossings: number[] = [];
    for (let i = 0; i < n; i++) {
      const [r1, c1] = polygon[i];
      const [r2, c2] = polygon[(i + 1) % n];
      if (r1 === r2) continue;
      const lo = Math.min(r1, r2);
      const hi = Math.max(r1, r2);
      if (r >= lo && r < hi) {
        const t = (r - r1) / (r2 - r1);
        crossings.push(c1 + t * (c2 - c1));
      }
    }
    crossings.sort((x, y) => x - y);
    for (let k = 0; k + 1 < crossings.length; k += 2) {
      const from = Math.ceil(crossings[k]);
      const to = Math.floor(crossings[k + 1]);
      for (let c = from; c <= to; c++) {
        if (c >= 0 && c < GRID) mask[r * GRID + c] = 1;
      }
    }
  }
  return mask;
}

export interface RasterizedBoundary {
  interior: Uint8Array;
  stroke: Uint8Array;
  door: Uint8Array;
}

export class BoundaryError extends Error {
  constructor(message: string, readonly edges: [number, number][] = []) {
    super(message);
  }
}

/**
 * Rasterize a grid-snapped polygon into the three masks: a 1-px stroke
 * along the outline, the filled area minus the stroke as interior, and a
 * short door run starting at doorCell (which must lie on the stroke).
 */
export function rasterizeBoundary(
  polygon: Cell[],
  doorCell: Cell,
  doorLength = 4
): RasterizedBoundary {
  if (polygon.length < 3) {
    throw new BoundaryError("polygon needs at least 3 vertices");
  }
  for (const [r, c] of polygon) {
    if (!Number.isInteger(r) || !Number.isInteger(c)) {
      throw new BoundaryError("vertices must be grid-snapped");
    }
    if (r < 1 || r >= GRID - 1 || c < 1 || c >= GRID - 1) {
      throw new BoundaryError("polygon must stay inside the canvas");
    }
  }
  const crossing = selfIntersections(polygon);
  if (crossing.length > 0) {
    throw new BoundaryError("polygon must not self-intersect", crossing);
  }

  const stroke = new Uint8Array(GRID * GRID);
  for (let i = 0; i < polygon.length; i++) {
    drawSegment(stroke, polygon[i], polygon[(i + 1) % polygon.length]);
  }
  const filled = fillPolygon(polygon);
  const interior = new Uint8Array(GRID * GRID);
  for (let i = 0; i < interior.length; i++) {
    interior[i] = filled[i] === 1 && stroke[i] === 0 ? 1 : 0;
  }

  const door = new Uint8Array(GRID * GRID);
  const [dr, dc] = doorCell;
  if (stroke[dr * GRID + dc] !== 1) {
    throw new BoundaryError("door must sit on the boundary stroke");
  }
  const horizontal = dc + 1 < GRID && stroke[dr * GRID + dc + 1] === 1;
  for (let k = 0; k < doorLength; k++) {
    const r = horizontal ? dr : dr + k;
    const c = horizontal ? dc + k : dc;
    if (r < GRID && c < GRID && stroke[r * GRID + c] === 1) {
      door[r * GRID + c] = 1;
    }
  }
  return { interior, stroke, door };
}

export function toPayload(raster: RasterizedBoundary): BoundaryPayload {
  return {
    boundary: rleEncode(raster.stroke),
    frontdoor: rleEncode(raster.door),
    interior: rleEncode(raster.interior),
  };
}

/** Convenience for tests and scripting: an axis-aligned rectangle boundary. */
export function rectangleBoundary(
  top: number,
  left: number,
  bottom: number,
  right: number
): BoundaryPayload {
  const polygon: Cell[] = [
    [top, left],
    [top, right],
    [bottom, right],
    [bottom, left],
  ];
  const raster = rasterizeBoundary(polygon, [top, left + 2]);
  return toPayload(raster);
}
