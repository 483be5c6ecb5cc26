// Thin HTTP client for the session service. Every server mutation in the
// app flows through these four calls.

import { BoundaryPayload, EditOp, SessionResponse } from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function parse(res: Response): Promise<SessionResponse> {
  const body = await res.json();
  if (!res.ok) {
    throw new ApiError(res.status, body?.detail ?? res.statusText);
  }
  return body as SessionResponse;
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  async createSession(
    boundary: BoundaryPayload,
    variant: string,
    seed: number,
    types?: number[],
    centers?: [number, number][]
  ): Promise<SessionResponse> {
    const res = await fetch(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ boundary, variant, seed, types, centers }),
    });
    return parse(res);
  }

  async step(id: string): Promise<SessionResponse> {
    const res = await fetch(`${this.baseUrl}/sessions/${id}/step`, { method: "POST" });
    return parse(res);
  }

  async edit(id: string, op: EditOp): Promise<SessionResponse> {
    const res = await fetch(`${this.baseUrl}/sessions/${id}/edit`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(op),
    });
    return parse(res);
  }

  async getState(id: string): Promise<SessionResponse> {
    const res = await fetch(`${this.baseUrl}/sessions/${id}/state`);
    return parse(res);
  }

  renderUrl(id: string, nonce: number): string {
    return `${this.baseUrl}/sessions/${id}/render?t=${nonce}`;
  }
}
