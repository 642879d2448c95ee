/**
 * DOM wiring. All decisions live in the pure modules; this file only
 * moves bytes between inputs, the service client, and canvases.
 */

import { ServiceClient } from "./api.js";
import { blendOverlay, differenceLayer } from "./blend.js";
import {
  caption,
  createCompare,
  disagreementCount,
  panCompare,
  toggleDifference,
  zoomCompare,
  type CompareState,
} from "./compare.js";
import type { RgbaImage } from "./png.js";
import {
  initialState,
  type SegmentParams,
  type SegmentResult,
  type SessionState,
} from "./session.js";
import { uploadAndSegment } from "./upload.js";
import { toView } from "./viewport.js";

async function decodePngBrowser(bytes: Uint8Array): Promise<RgbaImage> {
  const blob = new Blob([new Uint8Array(bytes)], { type: "image/png" });
  const bitmap = await createImageBitmap(blob);
  const canvas = document.createElement("canvas");
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d");
  if (ctx === null) {
    throw new Error("2d canvas is unavailable");
  }
  ctx.drawImage(bitmap, 0, 0);
  const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
  return { width: bitmap.width, height: bitmap.height, rgba: data.data };
}

function element<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function drawRgba(
  canvas: HTMLCanvasElement,
  width: number,
  height: number,
  rgba: Uint8ClampedArray,
): void {
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext("2d");
  if (ctx !== null) {
    ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), width, height), 0, 0);
  }
}

class App {
  private state: SessionState = initialState();
  private compare: CompareState | null = null;
  private selected: number[] = [];
  private lastAttempt: { bytes: Uint8Array; name: string; params: SegmentParams } | null =
    null;
  // Same-origin by default; ?api=http://host:port points at a remote service.
  private readonly client = new ServiceClient(
    new URLSearchParams(window.location.search).get("api") ?? "",
  );

  private readonly fileInput = element<HTMLInputElement>("file");
  private readonly modelSelect = element<HTMLSelectElement>("model");
  private readonly strideInput = element<HTMLInputElement>("stride");
  private readonly alphaInput = element<HTMLInputElement>("alpha");
  private readonly runButton = element<HTMLButtonElement>("run");
  private readonly retryButton = element<HTMLButtonElement>("retry");
  private readonly errorBox = element<HTMLElement>("error");
  private readonly resultCanvas = element<HTMLCanvasElement>("result");
  private readonly historyList = element<HTMLElement>("history");
  private readonly comparePanel = element<HTMLElement>("compare");
  private readonly compareA = element<HTMLCanvasElement>("compare-a");
  private readonly compareB = element<HTMLCanvasElement>("compare-b");
  private readonly captionA = element<HTMLElement>("caption-a");
  private readonly captionB = element<HTMLElement>("caption-b");
  private readonly diffToggle = element<HTMLButtonElement>("diff-toggle");
  private readonly diffInfo = element<HTMLElement>("diff-info");

  async start(): Promise<void> {
    try {
      const models = await this.client.listModels();
      for (const model of models) {
        const option = document.createElement("option");
        option.value = model.modelId;
        option.textContent = `${model.modelId} (${model.kind})`;
        this.modelSelect.appendChild(option);
      }
    } catch (error) {
      this.showError(error instanceof Error ? error.message : String(error));
    }
    this.runButton.addEventListener("click", () => void this.run());
    this.retryButton.addEventListener("click", () => void this.retry());
    this.alphaInput.addEventListener("input", () => this.renderCurrent());
    for (const canvas of [this.compareA, this.compareB]) {
      this.wireGestures(canvas);
    }
    this.diffToggle.addEventListener("click", () => {
      if (this.compare !== null && this.compare.toggleEnabled) {
        this.compare = toggleDifference(this.compare);
        this.renderCompare();
      }
    });
  }

  private params(): SegmentParams {
    return {
      modelId: this.modelSelect.value,
      stride: Number(this.strideInput.value) || 1,
      alpha: Number(this.alphaInput.value),
    };
  }

  private async run(): Promise<void> {
    const file = this.fileInput.files?.[0];
    if (file === undefined) {
      this.showError("choose a PNG file first");
      return;
    }
    const bytes = new Uint8Array(await file.arrayBuffer());
    await this.execute(bytes, file.name, this.params());
  }

  private async retry(): Promise<void> {
    if (this.lastAttempt !== null) {
      const { bytes, name, params } = this.lastAttempt;
      await this.execute(bytes, name, params);
    }
  }

  private async execute(
    bytes: Uint8Array,
    name: string,
    params: SegmentParams,
  ): Promise<void> {
    if (this.state.inFlight) {
      return;
    }
    this.lastAttempt = { bytes, name, params };
    this.runButton.disabled = true;
    const outcome = await uploadAndSegment(
      this.client,
      this.state,
      bytes,
      name,
      params,
      decodePngBrowser,
    );
    this.state = outcome.state;
    this.runButton.disabled = false;
    this.retryButton.hidden = this.state.error === null;
    this.showError(this.state.error ?? "");
    this.renderCurrent();
    this.renderHistory();
  }

  private currentResult(): SegmentResult | null {
    return this.state.history[this.state.history.length - 1] ?? null;
  }

  private renderCurrent(): void {
    const result = this.currentResult();
    if (result === null) {
      return;
    }
    const alpha = Number(this.alphaInput.value);
    const blended = blendOverlay(result.imageRgba, result.mask, alpha);
    drawRgba(this.resultCanvas, result.width, result.height, blended);
  }

  private renderHistory(): void {
    this.historyList.textContent = "";
    this.state.history.forEach((result, index) => {
      const item = document.createElement("li");
      item.textContent = `#${result.id} ${caption(result)} ${result.timingMs}ms`;
      item.addEventListener("click", () => this.select(index));
      this.historyList.appendChild(item);
    });
  }

  private select(index: number): void {
    this.selected = [...this.selected, index].slice(-2);
    if (this.selected.length === 2) {
      const [i, j] = this.selected;
      const a = this.state.history[i!];
      const b = this.state.history[j!];
      if (a !== undefined && b !== undefined) {
        this.compare = createCompare(a, b);
        this.comparePanel.hidden = false;
        this.renderCompare();
      }
    }
  }

  private wireGestures(canvas: HTMLCanvasElement): void {
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    canvas.addEventListener("pointerdown", (event) => {
      dragging = true;
      lastX = event.offsetX;
      lastY = event.offsetY;
      canvas.setPointerCapture(event.pointerId);
    });
    canvas.addEventListener("pointermove", (event) => {
      if (dragging && this.compare !== null) {
        this.compare = panCompare(
          this.compare,
          event.offsetX - lastX,
          event.offsetY - lastY,
        );
        lastX = event.offsetX;
        lastY = event.offsetY;
        this.renderCompare();
      }
    });
    canvas.addEventListener("pointerup", () => {
      dragging = false;
    });
    canvas.addEventListener("wheel", (event) => {
      if (this.compare !== null) {
        event.preventDefault();
        const factor = event.deltaY < 0 ? 1.2 : 1 / 1.2;
        this.compare = zoomCompare(this.compare, factor, event.offsetX, event.offsetY);
        this.renderCompare();
      }
    });
  }

  private renderCompare(): void {
    if (this.compare === null) {
      return;
    }
    const { a, b, viewport, showDifference, toggleEnabled } = this.compare;
    const alpha = Number(this.alphaInput.value);
    for (const [canvas, result] of [
      [this.compareA, a],
      [this.compareB, b],
    ] as const) {
      const ctx = canvas.getContext("2d");
      if (ctx === null) {
        continue;
      }
      canvas.width = 420;
      canvas.height = 420;
      ctx.imageSmoothingEnabled = false;
      ctx.clearRect(0, 0, canvas.width, canvas.height);
      const blended = blendOverlay(result.imageRgba, result.mask, alpha);
      const tile = document.createElement("canvas");
      drawRgba(tile, result.width, result.height, blended);
      const origin = toView(viewport, 0, 0);
      ctx.drawImage(
        tile,
        origin.x,
        origin.y,
        result.width * viewport.scale,
        result.height * viewport.scale,
      );
      if (showDifference && toggleEnabled) {
        const layer = document.createElement("canvas");
        drawRgba(layer, a.width, a.height, differenceLayer(a.mask, b.mask));
        ctx.drawImage(
          layer,
          origin.x,
          origin.y,
          a.width * viewport.scale,
          a.height * viewport.scale,
        );
      }
    }
    this.captionA.textContent = caption(a);
    this.captionB.textContent = caption(b);
    this.diffToggle.disabled = !toggleEnabled;
    this.diffInfo.textContent = toggleEnabled
      ? showDifference
        ? `${disagreementCount(this.compare)} pixels disagree`
        : ""
      : this.compare.toggleDisabledReason ?? "";
  }

  private showError(message: string): void {
    this.errorBox.textContent = message;
    this.errorBox.hidden = message === "";
  }
}

if (typeof document !== "undefined" && document.getElementById("run") !== null) {
  void new App().start();
}
