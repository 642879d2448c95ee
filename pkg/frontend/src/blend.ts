/**
 * Pure pixel arithmetic for overlay rendering and mask comparison.
 *
 * The client never computes labels; it only re-renders what the service
 * returned. Blending uses the same floor arithmetic as the server, so a
 * client-side re-blend at the server's alpha is pixel-identical to the
 * server's overlay.
 */

export const GLAND_CODE = 1;
export const STROMA_CODE = 2;

export const CLASS_COLORS: ReadonlyMap<number, readonly [number, number, number]> =
  new Map([
    [GLAND_CODE, [128, 128, 128] as const],
    [STROMA_CODE, [255, 192, 203] as const],
  ]);

export const DIFFERENCE_COLOR: readonly [number, number, number] = [255, 64, 0];

/**
 * Blend class colors over the base image: out = floor((1-a)*img + a*color)
 * on labeled pixels, untouched elsewhere. Alpha 0 returns an exact copy.
 */
export function blendOverlay(
  imageRgba: Uint8ClampedArray,
  mask: Uint8Array,
  alpha: number,
): Uint8ClampedArray {
  if (!(alpha >= 0 && alpha <= 1)) {
    throw new Error(`alpha must be in [0, 1], got ${alpha}`);
  }
  if (imageRgba.length !== mask.length * 4) {
    throw new Error("image and mask dimensions disagree");
  }
  const out = new Uint8ClampedArray(imageRgba);
  for (let i = 0; i < mask.length; i++) {
    const color = CLASS_COLORS.get(mask[i]!);
    if (color === undefined) {
      continue;
    }
    const base = i * 4;
    for (let c = 0; c < 3; c++) {
      out[base + c] = Math.floor(
        (1 - alpha) * imageRgba[base + c]! + alpha * color[c]!,
      );
    }
    out[base + 3] = 255;
  }
  return out;
}

/** Number of pixels where the two masks disagree. */
export function maskXorCount(a: Uint8Array, b: Uint8Array): number {
  if (a.length !== b.length) {
    throw new Error("masks have different sizes");
  }
  let count = 0;
  for (let i = 0; i < a.length; i++) {
    if (a[i] !== b[i]) {
      count++;
    }
  }
  return count;
}

/**
 * RGBA highlight layer: opaque difference color where the masks
 * disagree, fully transparent elsewhere.
 */
export function differenceLayer(a: Uint8Array, b: Uint8Array): Uint8ClampedArray {
  if (a.length !== b.length) {
    throw new Error("masks have different sizes");
  }
  const out = new Uint8ClampedArray(a.length * 4);
  for (let i = 0; i < a.length; i++) {
    if (a[i] !== b[i]) {
      const base = i * 4;
      out[base] = DIFFERENCE_COLOR[0];
      out[base + 1] = DIFFERENCE_COLOR[1];
      out[base + 2] = DIFFERENCE_COLOR[2];
      out[base + 3] = 255;
    }
  }
  return out;
}
