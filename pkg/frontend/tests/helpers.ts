/** Shared fixtures: PNG codecs via pngjs and a stub segmentation server. */

import { createServer, type Server } from "node:http";
import { PNG } from "pngjs";

import type { RgbaImage } from "../src/png.js";

export function decodePngNode(bytes: Uint8Array): RgbaImage {
  const png = PNG.sync.read(Buffer.from(bytes));
  return {
    width: png.width,
    height: png.height,
    rgba: new Uint8ClampedArray(png.data),
  };
}

export function encodeRgbPng(
  width: number,
  height: number,
  rgb: (x: number, y: number) => [number, number, number],
): Uint8Array {
  const png = new PNG({ width, height });
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const [r, g, b] = rgb(x, y);
      const base = (y * width + x) * 4;
      png.data[base] = r;
      png.data[base + 1] = g;
      png.data[base + 2] = b;
      png.data[base + 3] = 255;
    }
  }
  return new Uint8Array(PNG.sync.write(png));
}

export function encodeMaskPng(width: number, height: number, mask: Uint8Array): Uint8Array {
  const png = new PNG({ width, height });
  for (let i = 0; i < width * height; i++) {
    const v = mask[i]!;
    png.data[i * 4] = v;
    png.data[i * 4 + 1] = v;
    png.data[i * 4 + 2] = v;
    png.data[i * 4 + 3] = 255;
  }
  return new Uint8Array(PNG.sync.write(png, { colorType: 0 }));
}

interface MultipartPart {
  name: string;
  filename?: string;
  data: Buffer;
}

function parseMultipart(body: Buffer, contentType: string): MultipartPart[] {
  const match = /boundary=([^;]+)/.exec(contentType);
  if (match === null) {
    throw new Error("missing multipart boundary");
  }
  const boundary = Buffer.from(`--${match[1]}`);
  const parts: MultipartPart[] = [];
  let offset = body.indexOf(boundary);
  while (offset !== -1) {
    const start = offset + boundary.length;
    if (body.slice(start, start + 2).toString() === "--") {
      break;
    }
    const next = body.indexOf(boundary, start);
    if (next === -1) {
      break;
    }
    const segment = body.slice(start + 2, next - 2); // trim leading/trailing CRLF
    const headerEnd = segment.indexOf("\r\n\r\n");
    const headers = segment.slice(0, headerEnd).toString();
    const data = segment.slice(headerEnd + 4);
    const nameMatch = /name="([^"]*)"/.exec(headers);
    const fileMatch = /filename="([^"]*)"/.exec(headers);
    parts.push({
      name: nameMatch?.[1] ?? "",
      ...(fileMatch?.[1] !== undefined ? { filename: fileMatch[1] } : {}),
      data,
    });
    offset = next;
  }
  return parts;
}

export interface StubServer {
  baseUrl: string;
  requests: { method: string; path: string }[];
  close(): Promise<void>;
}

/**
 * Speaks the segmentation service's wire format, with canned masks per
 * modelId produced by maskFor(modelId, width, height).
 */
export function startStubServer(
  maskFor: (modelId: string, width: number, height: number) => Uint8Array,
): Promise<StubServer> {
  const requests: { method: string; path: string }[] = [];
  const server: Server = createServer((req, res) => {
    requests.push({ method: req.method ?? "", path: req.url ?? "" });
    const sendJson = (status: number, doc: unknown) => {
      const payload = JSON.stringify(doc);
      res.writeHead(status, { "Content-Type": "application/json" });
      res.end(payload);
    };
    if (req.method === "GET" && req.url === "/models") {
      sendJson(200, {
        formatVersion: 1,
        models: [
          { modelId: "glcm_model", kind: "linear-svm", featureConfig: null },
          { modelId: "lbp_model", kind: "knn", featureConfig: null },
        ],
      });
      return;
    }
    if (req.method === "GET" && req.url === "/health") {
      sendJson(200, { status: "ok", models: 2, version: "stub", formatVersion: 1 });
      return;
    }
    if (req.method === "POST" && req.url === "/segment") {
      const chunks: Buffer[] = [];
      req.on("data", (chunk) => chunks.push(chunk as Buffer));
      req.on("end", () => {
        try {
          const parts = parseMultipart(
            Buffer.concat(chunks),
            req.headers["content-type"] ?? "",
          );
          const field = (name: string) =>
            parts.find((p) => p.name === name)?.data.toString();
          const image = parts.find((p) => p.name === "image");
          const modelId = field("modelId");
          if (image === undefined || modelId === undefined) {
            sendJson(400, { error: "image and modelId are required", formatVersion: 1 });
            return;
          }
          if (modelId !== "glcm_model" && modelId !== "lbp_model") {
            sendJson(404, { error: `unknown modelId ${modelId}`, formatVersion: 1 });
            return;
          }
          const png = PNG.sync.read(image.data);
          const mask = maskFor(modelId, png.width, png.height);
          const maskPng = encodeMaskPng(png.width, png.height, mask);
          sendJson(200, {
            formatVersion: 1,
            modelId,
            timingMs: 7,
            maskPng: Buffer.from(maskPng).toString("base64"),
            overlayPng: Buffer.from(maskPng).toString("base64"),
          });
        } catch (error) {
          sendJson(400, { error: String(error), formatVersion: 1 });
        }
      });
      return;
    }
    sendJson(404, { error: "no such endpoint", formatVersion: 1 });
  });
  return new Promise((resolve) => {
    server.listen(0, "127.0.0.1", () => {
      const address = server.address();
      const port = typeof address === "object" && address !== null ? address.port : 0;
      resolve({
        baseUrl: `http://127.0.0.1:${port}`,
        requests,
        close: () =>
          new Promise((done) => {
            server.close(() => done());
          }),
      });
    });
  });
}

/** Vertical two-class split mask: gland left of the boundary, stroma right. */
export function splitMask(width: number, height: number, boundary: number): Uint8Array {
  const mask = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      mask[y * width + x] = x < boundary ? 1 : 2;
    }
  }
  return mask;
}
