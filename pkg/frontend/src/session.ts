/**
 * Session state machine: an immutable value evolved by pure transitions.
 *
 * Invariants enforced here: at most one request in flight, history
 * entries frozen on insertion, history capped at the newest
 * HISTORY_LIMIT results, nothing persisted anywhere.
 */

export const HISTORY_LIMIT = 10;

export interface SegmentParams {
  readonly modelId: string;
  readonly stride: number;
  readonly alpha: number;
}

export interface SegmentResult {
  readonly id: number;
  readonly params: SegmentParams;
  readonly width: number;
  readonly height: number;
  /** Uploaded image pixels, RGBA. */
  readonly imageRgba: Uint8ClampedArray;
  /** Per-pixel label codes from the service. */
  readonly mask: Uint8Array;
  readonly timingMs: number;
}

export interface SessionState {
  readonly history: readonly SegmentResult[];
  readonly inFlight: boolean;
  readonly error: string | null;
  readonly nextId: number;
}

export function initialState(): SessionState {
  return Object.freeze({ history: [], inFlight: false, error: null, nextId: 1 });
}

/** Mark a request as started. Only one may be in flight. */
export function beginRequest(state: SessionState): SessionState {
  if (state.inFlight) {
    throw new Error("a request is already in flight");
  }
  return Object.freeze({ ...state, inFlight: true, error: null });
}

/** Record a finished segmentation, dropping the oldest entry beyond the cap. */
export function completeRequest(
  state: SessionState,
  result: Omit<SegmentResult, "id">,
): SessionState {
  if (!state.inFlight) {
    throw new Error("no request in flight");
  }
  const entry = Object.freeze({ ...result, id: state.nextId });
  const history = Object.freeze([...state.history, entry].slice(-HISTORY_LIMIT));
  return Object.freeze({
    history,
    inFlight: false,
    error: null,
    nextId: state.nextId + 1,
  });
}

/** Record a failure message; the history is left untouched. */
export function failRequest(state: SessionState, message: string): SessionState {
  if (!state.inFlight) {
    throw new Error("no request in flight");
  }
  return Object.freeze({ ...state, inFlight: false, error: message });
}
