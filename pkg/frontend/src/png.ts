/**
 * Minimal PNG byte-level helpers.
 *
 * Full decoding is environment-specific (canvas in the browser, pngjs in
 * tests) and injected where needed; reading the header dimensions is
 * done here so uploads can be validated without decoding pixels.
 */

const PNG_SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

export interface Dimensions {
  width: number;
  height: number;
}

/** Decoded raster: RGBA bytes, row-major, 4 per pixel. */
export interface RgbaImage extends Dimensions {
  rgba: Uint8ClampedArray;
}

/** Environment-provided PNG decoder (canvas-based ones are async). */
export type PngDecoder = (bytes: Uint8Array) => RgbaImage | Promise<RgbaImage>;

/**
 * Parse width and height from the IHDR chunk. Throws on anything that
 * is not a PNG.
 */
export function pngDimensions(bytes: Uint8Array): Dimensions {
  if (bytes.length < 24 || PNG_SIGNATURE.some((b, i) => bytes[i] !== b)) {
    throw new Error("not a PNG file");
  }
  // Bytes 12..16 must be "IHDR"; width/height are the next two
  // big-endian 32-bit words.
  const tag = String.fromCharCode(bytes[12]!, bytes[13]!, bytes[14]!, bytes[15]!);
  if (tag !== "IHDR") {
    throw new Error("malformed PNG: missing IHDR");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  return { width: view.getUint32(16), height: view.getUint32(20) };
}

/**
 * Extract per-pixel label codes from a decoded grayscale mask image:
 * the red channel carries the code.
 */
export function maskFromRgba(image: RgbaImage): Uint8Array {
  const count = image.width * image.height;
  if (image.rgba.length !== count * 4) {
    throw new Error("RGBA buffer does not match image dimensions");
  }
  const mask = new Uint8Array(count);
  for (let i = 0; i < count; i++) {
    mask[i] = image.rgba[i * 4]!;
  }
  return mask;
}
