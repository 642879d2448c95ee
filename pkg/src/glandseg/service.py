"""Second-opinion HTTP service: upload a patch, get a segmentation back.

Endpoints:
  GET  /health    liveness document
  GET  /models    available models with their feature configs
  POST /segment   multipart image + modelId (+ stride, alpha) -> mask/overlay
  POST /evaluate  multipart image + mask + modelId -> metrics report

Heavy endpoints run inside a bounded worker pool. Requests beyond the pool
plus a fixed wait queue are refused with 503 instead of buffering without
limit. The model registry is loaded once at startup and never mutated, so
responses depend only on the request body.
"""

import base64
import json
import logging
import threading
import time
from dataclasses import dataclass
from email import policy
from email.parser import BytesParser
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import urlsplit

import numpy as np

from . import __version__
from .io import (
    ImageFormatError,
    decode_image,
    encode_png,
    image_dimensions,
    model_load,
    report_to_doc,
    to_grayscale,
    _feature_config_to_doc,
)
from .metrics import evaluate
from .ml import ClassifierModel
from .segmentation import GLAND_CODE, STROMA_CODE, LabelMask, SegmentationConfig, render_overlay, segment_image

log = logging.getLogger("glandseg.service")

FORMAT_VERSION = 1
MAX_BODY_BYTES = 4 * 1024 * 1024
MAX_DIMENSION = 1024
DEFAULT_ALPHA = 0.5


class RequestError(Exception):
    """Client-side failure carrying the HTTP status to report."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class RegisteredModel:
    model_id: str
    model: ClassifierModel


class ModelRegistry:
    """All model files from one directory, loaded once, keyed by file stem."""

    def __init__(self, models_dir):
        directory = Path(models_dir)
        if not directory.is_dir():
            raise ValueError(f"not a directory: {directory}")
        entries = {}
        for path in sorted(directory.glob("*.json")):
            entries[path.stem] = RegisteredModel(model_id=path.stem, model=model_load(path))
        if not entries:
            raise ValueError(f"no model files found in {directory}")
        self._entries = entries

    def describe(self) -> list[dict]:
        return [
            {
                "modelId": entry.model_id,
                "kind": entry.model.kind,
                "featureConfig": _feature_config_to_doc(entry.model.feature_config),
            }
            for entry in self._entries.values()
        ]

    def get(self, model_id: str) -> RegisteredModel:
        try:
            return self._entries[model_id]
        except KeyError:
            raise RequestError(404, f"unknown modelId: {model_id}")

    def __len__(self) -> int:
        return len(self._entries)


class AdmissionGate:
    """Counting gate: at most workers + queue_capacity requests in the house."""

    def __init__(self, workers: int, queue_capacity: int):
        if workers < 1 or queue_capacity < 0:
            raise ValueError("workers must be >= 1 and queue capacity >= 0")
        self._capacity = workers + queue_capacity
        self._admitted = 0
        self._lock = threading.Lock()
        self._workers = threading.Semaphore(workers)

    def try_admit(self) -> bool:
        with self._lock:
            if self._admitted >= self._capacity:
                return False
            self._admitted += 1
            return True

    def acquire_worker(self) -> None:
        self._workers.acquire()

    def release(self) -> None:
        self._workers.release()
        with self._lock:
            self._admitted -= 1


def _parse_multipart(content_type: str, body: bytes) -> dict[str, bytes]:
    if "multipart/form-data" not in content_type:
        raise RequestError(400, "expected multipart/form-data")
    message = BytesParser(policy=policy.HTTP).parsebytes(
        b"Content-Type: " + content_type.encode("latin-1") + b"\r\n\r\n" + body
    )
    if not message.is_multipart():
        raise RequestError(400, "malformed multipart body")
    fields = {}
    for part in message.iter_parts():
        name = part.get_param("name", header="content-disposition")
        if name is None:
            raise RequestError(400, "multipart part without a field name")
        fields[str(name)] = part.get_payload(decode=True) or b""
    if not fields:
        raise RequestError(400, "multipart body has no fields")
    return fields


def _text_field(fields: dict[str, bytes], name: str) -> str | None:
    if name not in fields:
        return None
    try:
        return fields[name].decode("utf-8")
    except UnicodeDecodeError:
        raise RequestError(400, f"field {name} is not valid UTF-8")


def _parse_stride(fields: dict[str, bytes]) -> int:
    raw = _text_field(fields, "stride")
    if raw is None:
        return 1
    try:
        stride = int(raw)
    except ValueError:
        raise RequestError(400, f"bad stride: {raw!r}")
    if stride < 1:
        raise RequestError(400, f"stride must be >= 1, got {stride}")
    return stride


def _parse_alpha(fields: dict[str, bytes]) -> float:
    raw = _text_field(fields, "alpha")
    if raw is None:
        return DEFAULT_ALPHA
    try:
        alpha = float(raw)
    except ValueError:
        raise RequestError(400, f"bad alpha: {raw!r}")
    if not 0.0 <= alpha <= 1.0:
        raise RequestError(400, f"alpha must be in [0, 1], got {alpha}")
    return alpha


def _decode_request_image(fields: dict[str, bytes], name: str = "image") -> np.ndarray:
    data = fields.get(name)
    if not data:
        raise RequestError(400, f"missing {name} part")
    try:
        width, height = image_dimensions(data, origin=name)
    except ImageFormatError as exc:
        raise RequestError(400, str(exc))
    if width > MAX_DIMENSION or height > MAX_DIMENSION:
        raise RequestError(422, f"image is {width}x{height}; limit is "
                                f"{MAX_DIMENSION}x{MAX_DIMENSION}")
    try:
        return decode_image(data, origin=name)
    except ImageFormatError as exc:
        raise RequestError(400, str(exc))


def _to_gray(image: np.ndarray) -> np.ndarray:
    if image.ndim == 3:
        return to_grayscale(image)
    return image


def _to_rgb(image: np.ndarray) -> np.ndarray:
    if image.ndim == 2:
        return np.repeat(image[:, :, None], 3, axis=2)
    return image


def _segment_with_model(entry: RegisteredModel, image: np.ndarray, stride: int) -> LabelMask:
    config = SegmentationConfig(stride=stride)
    try:
        return segment_image(_to_gray(image), entry.model, config)
    except ValueError as exc:
        raise RequestError(400, f"cannot segment with model {entry.model_id}: {exc}")


class SecondOpinionService:
    """Request handlers shared by every connection thread."""

    def __init__(self, registry: ModelRegistry, gate: AdmissionGate):
        self.registry = registry
        self.gate = gate

    def health(self) -> dict:
        return {"status": "ok", "models": len(self.registry), "version": __version__,
                "formatVersion": FORMAT_VERSION}

    def models(self) -> dict:
        return {"models": self.registry.describe(), "formatVersion": FORMAT_VERSION}

    def segment(self, fields: dict[str, bytes]) -> dict:
        model_id = _text_field(fields, "modelId")
        if not model_id:
            raise RequestError(400, "missing modelId field")
        entry = self.registry.get(model_id)
        stride = _parse_stride(fields)
        alpha = _parse_alpha(fields)
        image = _decode_request_image(fields)
        started = time.perf_counter()
        mask = _segment_with_model(entry, image, stride)
        overlay = render_overlay(_to_rgb(image), mask, alpha)
        timing_ms = int(round((time.perf_counter() - started) * 1000))
        return {
            "maskPng": base64.b64encode(encode_png(mask.labels)).decode("ascii"),
            "overlayPng": base64.b64encode(encode_png(overlay)).decode("ascii"),
            "modelId": model_id,
            "timingMs": timing_ms,
            "formatVersion": FORMAT_VERSION,
        }

    def evaluate(self, fields: dict[str, bytes]) -> dict:
        model_id = _text_field(fields, "modelId")
        if not model_id:
            raise RequestError(400, "missing modelId field")
        entry = self.registry.get(model_id)
        stride = _parse_stride(fields)
        image = _decode_request_image(fields)
        gt_raster = _decode_request_image(fields, name="mask")
        if gt_raster.ndim != 2:
            raise RequestError(400, "mask must be a single-channel PNG")
        if gt_raster.max() > max(GLAND_CODE, STROMA_CODE):
            raise RequestError(400, f"mask contains out-of-vocabulary value "
                                    f"{int(gt_raster.max())}")
        mask = _segment_with_model(entry, image, stride)
        try:
            report = evaluate(mask, LabelMask(labels=gt_raster))
        except ValueError as exc:
            raise RequestError(400, str(exc))
        return report_to_doc(report)


class _Handler(BaseHTTPRequestHandler):
    server_version = f"glandseg/{__version__}"
    protocol_version = "HTTP/1.1"

    @property
    def service(self) -> SecondOpinionService:
        return self.server.service  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):
        log.info("%s " + fmt, self.address_string(), *args)

    def _send_json(self, status: int, doc: dict) -> None:
        body = json.dumps(doc, indent=2, sort_keys=True).encode("utf-8") + b"\n"
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        # Browser clients may be served from a different origin than the API.
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_error_doc(self, status: int, message: str) -> None:
        # An unread request body would corrupt the next keep-alive request.
        self.close_connection = True
        self._send_json(status, {"error": message, "formatVersion": FORMAT_VERSION})

    def do_GET(self):
        path = urlsplit(self.path).path
        if path == "/health":
            self._send_json(200, self.service.health())
        elif path == "/models":
            self._send_json(200, self.service.models())
        else:
            self._send_error_doc(404, f"no such endpoint: {path}")

    def do_POST(self):
        path = urlsplit(self.path).path
        if path == "/segment":
            self._handle_heavy(self.service.segment)
        elif path == "/evaluate":
            self._handle_heavy(self.service.evaluate)
        else:
            self._send_error_doc(404, f"no such endpoint: {path}")

    def _handle_heavy(self, handler) -> None:
        gate = self.service.gate
        if not gate.try_admit():
            self._send_error_doc(503, "server is at capacity, retry later")
            return
        try:
            gate.acquire_worker()
            try:
                doc = handler(self._read_fields())
            finally:
                gate.release()
        except RequestError as exc:
            self._send_error_doc(exc.status, str(exc))
        except Exception:
            log.exception("request handler failed")
            self._send_error_doc(500, "internal error")
        else:
            self._send_json(200, doc)

    def _read_fields(self) -> dict[str, bytes]:
        length_header = self.headers.get("Content-Length")
        if length_header is None:
            raise RequestError(400, "missing Content-Length")
        try:
            length = int(length_header)
        except ValueError:
            raise RequestError(400, f"bad Content-Length: {length_header!r}")
        if length > MAX_BODY_BYTES:
            raise RequestError(413, f"payload of {length} bytes exceeds the "
                                    f"{MAX_BODY_BYTES} byte limit")
        if length < 0:
            raise RequestError(400, "negative Content-Length")
        body = self.rfile.read(length)
        if len(body) != length:
            raise RequestError(400, "truncated request body")
        content_type = self.headers.get("Content-Type", "")
        return _parse_multipart(content_type, body)


def create_server(
    host: str,
    port: int,
    models_dir,
    workers: int = 2,
    queue_capacity: int | None = None,
) -> ThreadingHTTPServer:
    """Build a ready-to-serve HTTP server; caller owns serve_forever/shutdown."""
    registry = ModelRegistry(models_dir)
    if queue_capacity is None:
        queue_capacity = 2 * workers
    gate = AdmissionGate(workers, queue_capacity)
    server = ThreadingHTTPServer((host, port), _Handler)
    server.daemon_threads = True
    server.service = SecondOpinionService(registry, gate)  # type: ignore[attr-defined]
    return server


def run_server(host: str, port: int, models_dir, workers: int = 2) -> None:
    server = create_server(host, port, models_dir, workers=workers)
    bound_host, bound_port = server.server_address[:2]
    print(f"serving {len(server.service.registry)} models on "  # type: ignore[attr-defined]
          f"http://{bound_host}:{bound_port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
