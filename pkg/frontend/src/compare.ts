/**
 * Side-by-side comparison of two results: one shared viewport, captions
 * from each result's parameters, and a difference toggle that is only
 * available when the results share dimensions.
 */

import { maskXorCount } from "./blend.js";
import type { SegmentResult } from "./session.js";
import { identityViewport, pan, zoom, type Viewport } from "./viewport.js";

export interface CompareState {
  readonly a: SegmentResult;
  readonly b: SegmentResult;
  readonly viewport: Viewport;
  readonly showDifference: boolean;
  readonly toggleEnabled: boolean;
  readonly toggleDisabledReason: string | null;
}

export function createCompare(a: SegmentResult, b: SegmentResult): CompareState {
  const sameDims = a.width === b.width && a.height === b.height;
  return Object.freeze({
    a,
    b,
    viewport: identityViewport(),
    showDifference: false,
    toggleEnabled: sameDims,
    toggleDisabledReason: sameDims
      ? null
      : `results have different dimensions (${a.width}x${a.height} vs ` +
        `${b.width}x${b.height}), so they cannot be diffed`,
  });
}

export function caption(result: SegmentResult): string {
  const { modelId, stride, alpha } = result.params;
  return `${modelId} (stride ${stride}, alpha ${alpha})`;
}

/** Flip the difference layer; throws if the toggle is disabled. */
export function toggleDifference(state: CompareState): CompareState {
  if (!state.toggleEnabled) {
    throw new Error(state.toggleDisabledReason ?? "difference toggle disabled");
  }
  return Object.freeze({ ...state, showDifference: !state.showDifference });
}

/** Count of pixels where the two masks disagree. */
export function disagreementCount(state: CompareState): number {
  if (!state.toggleEnabled) {
    throw new Error(state.toggleDisabledReason ?? "difference toggle disabled");
  }
  return maskXorCount(state.a.mask, state.b.mask);
}

/** Gestures from either pane route through these shared transitions. */
export function panCompare(state: CompareState, dx: number, dy: number): CompareState {
  return Object.freeze({ ...state, viewport: pan(state.viewport, dx, dy) });
}

export function zoomCompare(
  state: CompareState,
  factor: number,
  anchorX: number,
  anchorY: number,
): CompareState {
  return Object.freeze({
    ...state,
    viewport: zoom(state.viewport, factor, anchorX, anchorY),
  });
}
