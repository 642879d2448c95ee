/**
 * HTTP client for the segmentation service. This is the only place the
 * frontend touches the network; everything else works on decoded pixels.
 */

export interface ModelInfo {
  readonly modelId: string;
  readonly kind: string;
}

export interface HealthInfo {
  readonly status: string;
  readonly models: number;
  readonly version: string;
}

export interface SegmentReply {
  readonly modelId: string;
  readonly timingMs: number;
  readonly maskPng: Uint8Array;
  readonly overlayPng: Uint8Array;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export function base64ToBytes(encoded: string): Uint8Array {
  const binary = atob(encoded);
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) {
    bytes[i] = binary.charCodeAt(i);
  }
  return bytes;
}

async function parseJson(response: Response): Promise<Record<string, unknown>> {
  let doc: unknown;
  try {
    doc = await response.json();
  } catch {
    throw new ServiceError(
      response.status,
      `service returned a non-JSON response (HTTP ${response.status})`,
    );
  }
  if (typeof doc !== "object" || doc === null) {
    throw new ServiceError(response.status, "service returned a malformed document");
  }
  return doc as Record<string, unknown>;
}

async function expectOk(response: Response): Promise<Record<string, unknown>> {
  const doc = await parseJson(response);
  if (!response.ok) {
    const message =
      typeof doc.error === "string"
        ? doc.error
        : `service request failed (HTTP ${response.status})`;
    throw new ServiceError(response.status, message);
  }
  return doc;
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async health(): Promise<HealthInfo> {
    const doc = await expectOk(await this.fetchFn(`${this.baseUrl}/health`));
    return {
      status: String(doc.status),
      models: Number(doc.models),
      version: String(doc.version),
    };
  }

  async listModels(): Promise<ModelInfo[]> {
    const doc = await expectOk(await this.fetchFn(`${this.baseUrl}/models`));
    if (!Array.isArray(doc.models)) {
      throw new ServiceError(200, "service returned a malformed model list");
    }
    return doc.models.map((entry) => ({
      modelId: String((entry as Record<string, unknown>).modelId),
      kind: String((entry as Record<string, unknown>).kind),
    }));
  }

  async segment(
    imageBytes: Uint8Array,
    filename: string,
    params: { modelId: string; stride: number; alpha: number },
  ): Promise<SegmentReply> {
    const form = new FormData();
    form.append("modelId", params.modelId);
    form.append("stride", String(params.stride));
    form.append("alpha", String(params.alpha));
    const copy = new Uint8Array(imageBytes);
    form.append("image", new Blob([copy], { type: "image/png" }), filename);
    const response = await this.fetchFn(`${this.baseUrl}/segment`, {
      method: "POST",
      body: form,
    });
    const doc = await expectOk(response);
    if (typeof doc.maskPng !== "string" || typeof doc.overlayPng !== "string") {
      throw new ServiceError(200, "segment reply is missing image payloads");
    }
    return {
      modelId: String(doc.modelId),
      timingMs: Number(doc.timingMs),
      maskPng: base64ToBytes(doc.maskPng),
      overlayPng: base64ToBytes(doc.overlayPng),
    };
  }
}
