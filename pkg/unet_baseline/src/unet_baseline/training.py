"""Seeded training, checkpointing, and inference for the U-Net baseline."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import (
    FORMAT_VERSION,
    load_image,
    load_manifest,
    load_mask,
    resolve_path,
    save_mask,
)
from .model import UNet, UNetConfig, build_unet

IGNORE_INDEX = -1


@dataclass(frozen=True)
class TrainingRecord:
    """Per-epoch training history plus the checkpoint location."""

    epoch_losses: tuple[float, ...]
    epoch_accuracies: tuple[float, ...]
    checkpoint_path: str
    train_samples: int
    early_stopped: bool = False


def record_to_doc(record: TrainingRecord) -> dict:
    return {
        "formatVersion": FORMAT_VERSION,
        "epochLosses": list(record.epoch_losses),
        "epochPixelAccuracies": list(record.epoch_accuracies),
        "checkpointPath": record.checkpoint_path,
        "trainSamples": record.train_samples,
        "earlyStopped": record.early_stopped,
    }


def record_save(record: TrainingRecord, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(record_to_doc(record), indent=2, sort_keys=True) + "\n"
    path.write_text(text, encoding="utf-8")


def _config_to_doc(config: UNetConfig) -> dict:
    return {
        "inputSize": list(config.input_size),
        "inChannels": config.in_channels,
        "depth": config.depth,
        "baseFilters": config.base_filters,
        "classCount": config.class_count,
        "epochs": config.epochs,
        "learningRate": config.learning_rate,
        "batchSize": config.batch_size,
        "seed": config.seed,
    }


def _config_from_doc(doc: dict) -> UNetConfig:
    return UNetConfig(
        input_size=tuple(doc["inputSize"]),
        in_channels=int(doc["inChannels"]),
        depth=int(doc["depth"]),
        base_filters=int(doc["baseFilters"]),
        class_count=int(doc["classCount"]),
        epochs=int(doc["epochs"]),
        learning_rate=float(doc["learningRate"]),
        batch_size=int(doc["batchSize"]),
        seed=int(doc["seed"]),
    )


def checkpoint_save(model: UNet, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "formatVersion": FORMAT_VERSION,
            "config": _config_to_doc(model.config),
            "stateDict": model.state_dict(),
        },
        path,
    )


def checkpoint_load(path) -> UNet:
    """Rebuild the network from a checkpoint file."""
    try:
        payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    except Exception as exc:
        raise ValueError(f"corrupt checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("formatVersion") != FORMAT_VERSION:
        raise ValueError(f"corrupt checkpoint {path}: unrecognized payload")
    try:
        model = build_unet(_config_from_doc(payload["config"]))
        model.load_state_dict(payload["stateDict"])
    except (KeyError, TypeError, ValueError, RuntimeError) as exc:
        raise ValueError(f"corrupt checkpoint {path}: {exc}") from exc
    model.eval()
    return model


def _mask_to_target(mask: np.ndarray, class_count: int) -> torch.Tensor:
    """Map mask codes to class indices; unlabeled pixels become IGNORE_INDEX."""
    if mask.max(initial=0) > class_count:
        raise ValueError(f"mask codes exceed configured class count {class_count}")
    target = mask.astype(np.int64) - 1
    target[mask == 0] = IGNORE_INDEX
    return torch.from_numpy(target)


def _load_training_pairs(manifest_path, config: UNetConfig):
    entries = load_manifest(manifest_path)
    train = [e for e in entries if e.split == "train"]
    if not train:
        raise ValueError("manifest has no records in the train split")
    images, targets = [], []
    for i, entry in enumerate(train):
        if not entry.mask_path:
            raise ValueError(f"train record {i} ({entry.image_path}) has no mask path")
        image = load_image(resolve_path(manifest_path, entry.image_path))
        mask = load_mask(resolve_path(manifest_path, entry.mask_path))
        if image.shape[:2] != config.input_size or mask.shape != config.input_size:
            raise ValueError(
                f"train record {i} has size {image.shape[:2]}, "
                f"expected {config.input_size}"
            )
        images.append(torch.from_numpy(image).permute(2, 0, 1).float() / 255.0)
        targets.append(_mask_to_target(mask, config.class_count))
    return torch.stack(images), torch.stack(targets)


def train_unet(
    manifest_path,
    config: UNetConfig,
    out_dir,
    *,
    early_stop_accuracy: float | None = None,
) -> TrainingRecord:
    """Train on the manifest's train split and write checkpoint plus record.

    Training is fully seeded: parameter init, batch order, and optimizer
    state all derive from config.seed, so reruns reproduce the same
    checkpoint. If early_stop_accuracy is given, training stops at the end
    of the first epoch whose pixel accuracy reaches it, and the record is
    flagged as early-stopped.
    """
    out_dir = Path(out_dir)
    images, targets = _load_training_pairs(manifest_path, config)
    n = images.shape[0]

    torch.manual_seed(config.seed)
    model = build_unet(config)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    loss_fn = nn.CrossEntropyLoss(ignore_index=IGNORE_INDEX, reduction="sum")
    order_rng = torch.Generator().manual_seed(config.seed)

    losses, accuracies = [], []
    early_stopped = False
    for _ in range(config.epochs):
        order = torch.randperm(n, generator=order_rng)
        epoch_loss = 0.0
        correct = 0
        labeled = 0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            x, y = images[batch], targets[batch]
            valid = y != IGNORE_INDEX
            batch_labeled = int(valid.sum())
            if batch_labeled == 0:
                continue
            optimizer.zero_grad()
            logits = model.logits(x)
            loss = loss_fn(logits, y) / batch_labeled
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach()) * batch_labeled
            predicted = logits.detach().argmax(dim=1)
            correct += int((predicted[valid] == y[valid]).sum())
            labeled += batch_labeled
        losses.append(epoch_loss / max(labeled, 1))
        accuracies.append(correct / max(labeled, 1))
        if early_stop_accuracy is not None and accuracies[-1] >= early_stop_accuracy:
            early_stopped = True
            break

    checkpoint_path = out_dir / "checkpoint.pt"
    checkpoint_save(model, checkpoint_path)
    record = TrainingRecord(
        epoch_losses=tuple(losses),
        epoch_accuracies=tuple(accuracies),
        checkpoint_path=str(checkpoint_path),
        train_samples=n,
        early_stopped=early_stopped,
    )
    record_save(record, out_dir / "training_record.json")
    return record


def infer_unet(checkpoint, image, out_path=None) -> np.ndarray:
    """Label every pixel of one image with the checkpointed network.

    checkpoint may be a path or an already-loaded model; image may be a
    path or an (h, w, 3) uint8 array whose size matches the configured
    input size. Returns the label mask and writes it as a PNG when
    out_path is given.
    """
    model = checkpoint if isinstance(checkpoint, UNet) else checkpoint_load(checkpoint)
    if not isinstance(image, np.ndarray):
        image = load_image(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValueError("image must be an (h, w, 3) uint8 array")
    if image.shape[:2] != model.config.input_size:
        raise ValueError(
            f"image size {image.shape[:2]} does not match "
            f"configured input size {model.config.input_size}"
        )
    model.eval()
    with torch.no_grad():
        x = torch.from_numpy(image).permute(2, 0, 1).float().unsqueeze(0) / 255.0
        probabilities = model(x)
    mask = (probabilities.argmax(dim=1).squeeze(0).numpy() + 1).astype(np.uint8)
    if out_path is not None:
        save_mask(mask, out_path)
    return mask
