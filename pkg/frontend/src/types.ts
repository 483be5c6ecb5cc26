// Payload shapes of the session API.

export const GRID = 128;

/** Run-length encoded 0/1 masks, row-major, first run counts zeros. */
export interface BoundaryPayload {
  boundary: number[];
  frontdoor: number[];
  interior: number[];
}

export interface Registry {
  names: string[];
  max_counts: number[];
}

export type Phase = "TYPES" | "LOCATE" | "PARTITION" | "REPAIR" | "DONE";

export interface PendingProposal {
  op: "propose";
  phase: Phase;
  payload: Record<string, unknown> & {
    types?: number[];
    counts?: number[];
    index?: number;
    type?: number;
    center?: [number, number];
    box?: number[];
    boxes?: number[][];
  };
}

export interface SessionState {
  variant: "auto" | "typed" | "full";
  seed: number;
  phase: Phase;
  types: number[] | null;
  centers: [number, number][];
  boxes: number[][];
  repaired: boolean;
  pending: PendingProposal | null;
  proposal_count: number;
  boundary: BoundaryPayload;
  registry_hash: string;
}

export interface SessionResponse {
  id: string;
  state: SessionState;
  registry: Registry;
  events: number;
}

export type EditOp =
  | { op: "accept" }
  | { op: "set_types"; types: number[] }
  | { op: "move_center"; index: number; center: [number, number] }
  | { op: "set_box"; box: number[] }
  | { op: "reorder_remaining"; order: number[] }
  | { op: "rollback_to"; step: number };
