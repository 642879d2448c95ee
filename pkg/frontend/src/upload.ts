/**
 * The upload-and-segment flow: validate locally, call the service once,
 * fold the outcome into the session. Rendering afterwards needs only
 * (image, mask, alpha), so the alpha slider re-blends without another
 * request.
 */

import { ServiceClient, ServiceError } from "./api.js";
import { uploadViolation } from "./limits.js";
import { maskFromRgba, pngDimensions, type PngDecoder } from "./png.js";
import {
  beginRequest,
  completeRequest,
  failRequest,
  type SegmentParams,
  type SegmentResult,
  type SessionState,
} from "./session.js";

export interface UploadOutcome {
  readonly state: SessionState;
  readonly result: SegmentResult | null;
}

/**
 * Upload a PNG and record the segmentation in the session.
 *
 * Limit violations are detected from the file bytes alone and reported
 * without any network call. Service failures land in state.error with
 * the service's own message.
 */
export async function uploadAndSegment(
  client: ServiceClient,
  state: SessionState,
  fileBytes: Uint8Array,
  filename: string,
  params: SegmentParams,
  decodePng: PngDecoder,
): Promise<UploadOutcome> {
  let dims = null;
  try {
    dims = pngDimensions(fileBytes);
  } catch {
    // Not a PNG: let the size check run, then report the format.
  }
  const violation =
    uploadViolation(fileBytes.length, dims?.width, dims?.height) ??
    (dims === null ? "file is not a PNG image" : null);
  if (violation !== null) {
    // Nothing was sent: record the rejection without an in-flight phase.
    return { state: Object.freeze({ ...state, error: violation }), result: null };
  }

  state = beginRequest(state);
  try {
    const reply = await client.segment(fileBytes, filename, params);
    const image = await decodePng(fileBytes);
    const maskImage = await decodePng(reply.maskPng);
    if (maskImage.width !== image.width || maskImage.height !== image.height) {
      throw new ServiceError(200, "service mask does not match image dimensions");
    }
    const result: Omit<SegmentResult, "id"> = {
      params,
      width: image.width,
      height: image.height,
      imageRgba: image.rgba,
      mask: maskFromRgba(maskImage),
      timingMs: reply.timingMs,
    };
    const next = completeRequest(state, result);
    return { state: next, result: next.history[next.history.length - 1] ?? null };
  } catch (error) {
    const message =
      error instanceof ServiceError
        ? error.message
        : `request failed: ${error instanceof Error ? error.message : String(error)}`;
    return { state: failRequest(state, message), result: null };
  }
}
