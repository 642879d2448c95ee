/**
 * Shared pan/zoom state. The compare view holds exactly one Viewport,
 * so any gesture in either pane moves both identically.
 */

export interface Viewport {
  readonly scale: number;
  readonly offsetX: number;
  readonly offsetY: number;
}

export const MIN_SCALE = 0.25;
export const MAX_SCALE = 32;

export function identityViewport(): Viewport {
  return Object.freeze({ scale: 1, offsetX: 0, offsetY: 0 });
}

export function pan(viewport: Viewport, dx: number, dy: number): Viewport {
  return Object.freeze({
    scale: viewport.scale,
    offsetX: viewport.offsetX + dx,
    offsetY: viewport.offsetY + dy,
  });
}

/**
 * Scale about an anchor point given in view coordinates, so the pixel
 * under the cursor stays put.
 */
export function zoom(
  viewport: Viewport,
  factor: number,
  anchorX: number,
  anchorY: number,
): Viewport {
  if (!(factor > 0)) {
    throw new Error(`zoom factor must be > 0, got ${factor}`);
  }
  const scale = Math.min(MAX_SCALE, Math.max(MIN_SCALE, viewport.scale * factor));
  const applied = scale / viewport.scale;
  return Object.freeze({
    scale,
    offsetX: anchorX - (anchorX - viewport.offsetX) * applied,
    offsetY: anchorY - (anchorY - viewport.offsetY) * applied,
  });
}

/** Map an image-space point to view space. */
export function toView(
  viewport: Viewport,
  x: number,
  y: number,
): { x: number; y: number } {
  return {
    x: x * viewport.scale + viewport.offsetX,
    y: y * viewport.scale + viewport.offsetY,
  };
}
