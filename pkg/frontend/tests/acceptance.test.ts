/** Acceptance gate: one test per release criterion, tolerances pinned. */

import { afterAll, beforeAll, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { blendOverlay, maskXorCount } from "../src/blend.js";
import { createCompare, disagreementCount, toggleDifference } from "../src/compare.js";
import { initialState } from "../src/session.js";
import { uploadAndSegment } from "../src/upload.js";
import {
  decodePngNode,
  encodeRgbPng,
  splitMask,
  startStubServer,
  type StubServer,
} from "./helpers.js";

const SIZE = 384;
const BOUNDARY_A = 192;
const BOUNDARY_B = 200;

let stub: StubServer;
let client: ServiceClient;

beforeAll(async () => {
  stub = await startStubServer((modelId, width, height) =>
    splitMask(width, height, modelId === "glcm_model" ? BOUNDARY_A : BOUNDARY_B),
  );
  client = new ServiceClient(stub.baseUrl);
});

afterAll(async () => {
  await stub.close();
});

it("e2e against the stub server: overlay, alpha identity, difference count", async () => {
  const upload = encodeRgbPng(SIZE, SIZE, (x, y) => [
    (x * 7) % 256,
    (y * 3) % 256,
    (x * y) % 256,
  ]);

  // Part 1: upload -> segment -> overlay renders. The rendered view is
  // the blended pixel buffer, checked against the blend arithmetic at a
  // gland pixel and a stroma pixel.
  let state = initialState();
  const first = await uploadAndSegment(
    client,
    state,
    upload,
    "patch.png",
    { modelId: "glcm_model", stride: 1, alpha: 0.5 },
    decodePngNode,
  );
  expect(first.result).not.toBeNull();
  const result = first.result!;
  state = first.state;
  const overlay = blendOverlay(result.imageRgba, result.mask, 0.5);
  expect(overlay.length).toBe(SIZE * SIZE * 4);
  const glandIdx = 0;
  for (let c = 0; c < 3; c++) {
    const base = result.imageRgba[glandIdx * 4 + c]!;
    expect(overlay[glandIdx * 4 + c]).toBe(Math.floor(0.5 * base + 0.5 * 128));
  }
  const stromaIdx = SIZE - 1;
  const stromaColor = [255, 192, 203];
  for (let c = 0; c < 3; c++) {
    const base = result.imageRgba[stromaIdx * 4 + c]!;
    expect(overlay[stromaIdx * 4 + c]).toBe(
      Math.floor(0.5 * base + 0.5 * stromaColor[c]!),
    );
  }

  // Part 2: the alpha=0 view is pixel-identical to the upload.
  const identity = blendOverlay(result.imageRgba, result.mask, 0);
  expect(Buffer.compare(Buffer.from(identity), Buffer.from(result.imageRgba))).toBe(0);

  // Part 3: the compare view's disagreement count equals the mask XOR
  // count of the two fixture masks.
  const second = await uploadAndSegment(
    client,
    state,
    upload,
    "patch.png",
    { modelId: "lbp_model", stride: 1, alpha: 0.5 },
    decodePngNode,
  );
  expect(second.result).not.toBeNull();
  let compare = createCompare(result, second.result!);
  compare = toggleDifference(compare);
  expect(compare.showDifference).toBe(true);
  const expected = (BOUNDARY_B - BOUNDARY_A) * SIZE;
  expect(maskXorCount(result.mask, second.result!.mask)).toBe(expected);
  expect(disagreementCount(compare)).toBe(expected);
});
