/**
 * Client-side upload validation. The limits mirror the segmentation
 * service, so violations are caught before any network traffic.
 */

export const MAX_UPLOAD_BYTES = 4 * 1024 * 1024;
export const MAX_DIMENSION = 1024;

/**
 * Returns a message naming the violated limit, or null when the upload
 * is acceptable.
 */
export function uploadViolation(
  byteLength: number,
  width?: number,
  height?: number,
): string | null {
  if (byteLength > MAX_UPLOAD_BYTES) {
    const mib = (byteLength / (1024 * 1024)).toFixed(1);
    const limitMib = MAX_UPLOAD_BYTES / (1024 * 1024);
    return `file is ${mib} MiB, above the ${limitMib} MiB upload limit`;
  }
  if (width !== undefined && height !== undefined) {
    if (width > MAX_DIMENSION || height > MAX_DIMENSION) {
      return (
        `image is ${width}x${height} px, above the ` +
        `${MAX_DIMENSION} px dimension limit`
      );
    }
    if (width < 1 || height < 1) {
      return "image has no pixels";
    }
  }
  return null;
}
