// Session store: the single owner of server truth on the client.
//
// Every gesture maps 1:1 to a /step or /edit call; the store never invents
// state, so a reload (or a fresh tab) reconstructs the identical board from
// GET /state. On a server error the last known-good state is restored by
// refetching.

import { ApiClient } from "./api.js";
import { BoundaryPayload, EditOp, SessionResponse } from "./types.js";

export type StoreListener = (snapshot: SessionResponse | null) => void;

export class SessionStore {
  private snapshot: SessionResponse | null = null;
  private listeners: StoreListener[] = [];
  private inflight = false;

  constructor(readonly api: ApiClient) {}

  get current(): SessionResponse | null {
    return this.snapshot;
  }

  get sessionId(): string | null {
    return this.snapshot?.id ?? null;
  }

  /** One request at a time; the UI queues at most one pending action. */
  get busy(): boolean {
    return this.inflight;
  }

  /** Step is only legal when no proposal is waiting for review. */
  get canStep(): boolean {
    const state = this.snapshot?.state;
    return !!state && state.phase !== "DONE" && state.pending === null && !this.inflight;
  }

  get canAccept(): boolean {
    return !!this.snapshot?.state.pending && !this.inflight;
  }

  subscribe(listener: StoreListener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private publish(): void {
    for (const listener of this.listeners) {
      listener(this.snapshot);
    }
  }

  private async mutate(action: () => Promise<SessionResponse>): Promise<SessionResponse> {
    if (this.inflight) {
      throw new Error("request already in flight");
    }
    this.inflight = true;
    try {
      this.snapshot = await action();
      return this.snapshot;
    } catch (err) {
      // revert any optimistic view by refetching server truth
      if (this.snapshot) {
        try {
          this.snapshot = await this.api.getState(this.snapshot.id);
        } catch {
          // server unreachable: keep the stale snapshot
        }
      }
      throw err;
    } finally {
      this.inflight = false;
      this.publish();
    }
  }

  create(
    boundary: BoundaryPayload,
    variant: string,
    seed: number,
    types?: number[],
    centers?: [number, number][]
  ): Promise<SessionResponse> {
    return this.mutate(() => this.api.createSession(boundary, variant, seed, types, centers));
  }

  /** Attach to an existing server session (page reload path). */
  attach(id: string): Promise<SessionResponse> {
    return this.mutate(() => this.api.getState(id));
  }

  reload(): Promise<SessionResponse> {
    const id = this.requireId();
    return this.mutate(() => this.api.getState(id));
  }

  step(): Promise<SessionResponse> {
    const id = this.requireId();
    return this.mutate(() => this.api.step(id));
  }

  accept(): Promise<SessionResponse> {
    return this.sendEdit({ op: "accept" });
  }

  // -- gesture mapping ------------------------------------------------------

  /** Drag of a placed center, in 128-grid pixel coordinates. */
  dragCenter(index: number, row: number, col: number): Promise<SessionResponse> {
    return this.sendEdit({
      op: "move_center",
      index,
      center: [Math.round(row), Math.round(col)],
    });
  }

  /** Resize/replace of the box under review (or the next box). */
  resizeBox(box: [number, number, number, number]): Promise<SessionResponse> {
    return this.sendEdit({ op: "set_box", box });
  }

  reorderRemaining(order: number[]): Promise<SessionResponse> {
    return this.sendEdit({ op: "reorder_remaining", order });
  }

  setTypes(types: number[]): Promise<SessionResponse> {
    return this.sendEdit({ op: "set_types", types });
  }

  /** Rollback slider: rewind to the state after `step` post-create events. */
  rollbackTo(step: number): Promise<SessionResponse> {
    return this.sendEdit({ op: "rollback_to", step });
  }

  sendEdit(op: EditOp): Promise<SessionResponse> {
    const id = this.requireId();
    return this.mutate(() => this.api.edit(id, op));
  }

  renderUrl(): string | null {
    if (!this.snapshot) return null;
    return this.api.renderUrl(this.snapshot.id, this.snapshot.state.proposal_count);
  }

  private requireId(): string {
    if (!this.snapshot) {
      throw new Error("no active session");
    }
    return this.snapshot.id;
  }
}
