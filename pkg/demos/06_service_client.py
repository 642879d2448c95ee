"""
Asking the second-opinion service for a segmentation
====================================================

Starts the HTTP service in-process against a freshly trained model
directory, then talks to it exactly like an external client would:
plain multipart uploads, JSON replies, base64 image payloads.
"""

import base64
import json
import threading
import urllib.request
from pathlib import Path

import numpy as np

from glandseg import (
    Dataset,
    FeatureConfig,
    FeatureMatrix,
    model_save,
    patch_features,
    train_classifier,
    write_image,
)
from glandseg.io import decode_image, encode_png
from glandseg.ml import ClassifierSpec
from glandseg.service import create_server

rng = np.random.default_rng(17)


def smooth_block(shape):
    ramp = np.linspace(90, 150, shape[1])[None, :].repeat(shape[0], axis=0)
    return np.clip(ramp + rng.normal(0, 3, shape), 0, 255).astype(np.uint8)


def rough_block(shape):
    checker = np.indices(shape).sum(axis=0) % 2
    base = np.where(checker == 1, 200, 20) + rng.normal(0, 15, shape)
    return np.clip(base, 0, 255).astype(np.uint8)


# Train one model and drop it into a directory; the service loads every
# *.json it finds there and serves each under its file stem.
out = Path(__file__).parent / "output" / "service"
models_dir = out / "models"
models_dir.mkdir(parents=True, exist_ok=True)

config = FeatureConfig.combined()
rows, labels = [], []
for _ in range(30):
    rows.append(patch_features(smooth_block((35, 35)), config).values)
    labels.append("gland")
    rows.append(patch_features(rough_block((35, 35)), config).values)
    labels.append("stroma")
dataset = Dataset(
    features=FeatureMatrix(columns=config.column_names(), values=np.array(rows)),
    labels=tuple(labels),
)
model = train_classifier(dataset, ClassifierSpec(kind="linear-svm", seed=1),
                         feature_config=config)
model_save(model, models_dir / "svm_combined.json")

server = create_server("127.0.0.1", 0, models_dir, workers=2)
host, port = server.server_address
threading.Thread(target=server.serve_forever, daemon=True).start()
base = f"http://{host}:{port}"
print(f"service listening on {base}")


def get(path):
    with urllib.request.urlopen(base + path) as resp:
        return json.loads(resp.read())


def post_multipart(path, fields, image_bytes):
    boundary = "demo-boundary-4242"
    parts = []
    for name, value in fields.items():
        parts.append(
            f'--{boundary}\r\nContent-Disposition: form-data; name="{name}"'
            f"\r\n\r\n{value}\r\n".encode()
        )
    parts.append(
        (f'--{boundary}\r\nContent-Disposition: form-data; name="image"; '
         'filename="scene.png"\r\nContent-Type: image/png\r\n\r\n').encode()
        + image_bytes + b"\r\n"
    )
    parts.append(f"--{boundary}--\r\n".encode())
    body = b"".join(parts)
    req = urllib.request.Request(
        base + path, data=body,
        headers={"Content-Type": f"multipart/form-data; boundary={boundary}"},
    )
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


# Discovery endpoints first.
print("health:", get("/health"))
for entry in get("/models")["models"]:
    print(f"model {entry['modelId']}: kind={entry['kind']}")

# Upload a two-texture scene and ask for a segmentation. The reply holds
# the mask and overlay as base64 PNG strings plus server-side timing.
scene = np.hstack([smooth_block((128, 64)), rough_block((128, 64))])
reply = post_multipart(
    "/segment",
    {"modelId": "svm_combined", "stride": "2", "alpha": "0.5"},
    encode_png(scene),
)
mask = decode_image(base64.b64decode(reply["maskPng"]))
overlay = decode_image(base64.b64decode(reply["overlayPng"]))
values, counts = np.unique(mask, return_counts=True)
share = {int(v): f"{c / mask.size:.1%}" for v, c in zip(values, counts)}
print(f"segment reply: {reply['timingMs']}ms, label shares {share}")

write_image(overlay, out / "service_overlay.png")
print(f"wrote decoded overlay to {out / 'service_overlay.png'}")

server.shutdown()
server.server_close()
