import { describe, expect, it } from "vitest";

import {
  caption,
  createCompare,
  disagreementCount,
  panCompare,
  toggleDifference,
  zoomCompare,
} from "../src/compare.js";
import type { SegmentResult } from "../src/session.js";
import { identityViewport, pan, toView, zoom } from "../src/viewport.js";

function result(id: number, width: number, height: number, mask: Uint8Array): SegmentResult {
  return {
    id,
    params: { modelId: `model${id}`, stride: 2, alpha: 0.4 },
    width,
    height,
    imageRgba: new Uint8ClampedArray(width * height * 4),
    mask,
    timingMs: 5,
  };
}

describe("viewport", () => {
  it("pans by view-space deltas", () => {
    const v = pan(pan(identityViewport(), 10, -4), 5, 6);
    expect([v.offsetX, v.offsetY, v.scale]).toEqual([15, 2, 1]);
  });

  it("zooms about the anchor point", () => {
    // With the identity viewport, image point (100, 50) sits exactly
    // under the anchor; after zooming it must not move.
    const v = zoom(identityViewport(), 2, 100, 50);
    expect(v.scale).toBe(2);
    expect(toView(v, 100, 50)).toEqual({ x: 100, y: 50 });
    expect(toView(v, 0, 0)).toEqual({ x: -100, y: -50 });
  });

  it("clamps the scale range and rejects bad factors", () => {
    let v = identityViewport();
    for (let i = 0; i < 20; i++) {
      v = zoom(v, 4, 0, 0);
    }
    expect(v.scale).toBe(32);
    expect(() => zoom(v, 0, 0, 0)).toThrow(/factor/);
  });
});

describe("compare view", () => {
  const maskA = new Uint8Array([1, 1, 2, 2]);
  const maskB = new Uint8Array([1, 2, 2, 2]);

  it("shares one viewport across both panes", () => {
    let state = createCompare(result(1, 2, 2, maskA), result(2, 2, 2, maskB));
    state = panCompare(state, 12, 7);
    state = zoomCompare(state, 2, 0, 0);
    // A single viewport drives both panes, so any gesture moves them
    // identically by construction.
    expect(state.viewport.scale).toBe(2);
    expect(state.viewport.offsetX).toBe(24);
    expect(state.viewport.offsetY).toBe(14);
  });

  it("toggles the difference layer and counts disagreements", () => {
    let state = createCompare(result(1, 2, 2, maskA), result(2, 2, 2, maskB));
    expect(state.toggleEnabled).toBe(true);
    expect(state.showDifference).toBe(false);
    state = toggleDifference(state);
    expect(state.showDifference).toBe(true);
    expect(disagreementCount(state)).toBe(1);
  });

  it("reports an empty difference for identical masks", () => {
    const state = createCompare(result(1, 2, 2, maskA), result(2, 2, 2, maskA));
    expect(disagreementCount(state)).toBe(0);
  });

  it("disables the toggle on dimension mismatch with an explanation", () => {
    const state = createCompare(
      result(1, 2, 2, maskA),
      result(2, 4, 1, maskB),
    );
    expect(state.toggleEnabled).toBe(false);
    expect(state.toggleDisabledReason).toMatch(/different dimensions/);
    expect(state.toggleDisabledReason).toMatch(/2x2/);
    expect(() => toggleDifference(state)).toThrow(/different dimensions/);
    expect(() => disagreementCount(state)).toThrow(/different dimensions/);
  });

  it("captions panes with model and parameters", () => {
    expect(caption(result(3, 2, 2, maskA))).toBe("model3 (stride 2, alpha 0.4)");
  });
});
