"""Acceptance gate: one test per release criterion, tolerances pinned."""

import json
import subprocess
import sys

import numpy as np
import torch
from torch import nn

from unet_baseline import UNetConfig, build_unet, infer_unet, save_mask, train_unet
from unet_baseline.training import IGNORE_INDEX


def test_network_shape_softmax_and_gradient_check():
    # Part 1: the default stack maps (3, 384, 384) to (2, 384, 384) with
    # per-pixel probabilities summing to 1 within 1e-5.
    net = build_unet(UNetConfig())
    net.eval()
    with torch.no_grad():
        probs = net(torch.rand(1, 3, 384, 384))
    assert probs.shape == (1, 2, 384, 384)
    sums = probs.sum(dim=1)
    assert float((sums - 1.0).abs().max()) <= 1e-5

    # Part 2: analytic gradients vs float64 central differences on a
    # 32x32 configuration, relative error <= 1e-3 on a random parameter
    # subset (absolute escape hatch 1e-8 for near-zero gradients).
    config = UNetConfig(input_size=(32, 32), base_filters=4, seed=2)
    net = build_unet(config).double()
    rng = np.random.default_rng(12)
    x = torch.from_numpy(rng.random((1, 3, 32, 32)))
    target = torch.from_numpy(rng.integers(0, 2, (1, 32, 32)))
    target[0, :6, :] = IGNORE_INDEX
    loss_fn = nn.CrossEntropyLoss(ignore_index=IGNORE_INDEX)

    def loss_value():
        return loss_fn(net.logits(x), target)

    net.zero_grad()
    loss_value().backward()
    params = [p for p in net.parameters() if p.grad is not None]
    h = 1e-6
    checked = 0
    for _ in range(12):
        tensor = params[rng.integers(0, len(params))]
        flat = tensor.detach().reshape(-1)
        idx = int(rng.integers(0, flat.numel()))
        analytic = float(tensor.grad.reshape(-1)[idx])
        with torch.no_grad():
            original = float(flat[idx])
            flat[idx] = original + h
            plus = float(loss_value())
            flat[idx] = original - h
            minus = float(loss_value())
            flat[idx] = original
        numeric = (plus - minus) / (2 * h)
        err = abs(analytic - numeric)
        scale = max(abs(analytic), abs(numeric))
        assert err <= 1e-8 or err / scale <= 1e-3, (
            f"gradient mismatch at param index {idx}: "
            f"analytic={analytic:.3e} numeric={numeric:.3e}"
        )
        checked += 1
    assert checked == 12


def _dice_per_class(pred, gt):
    """Overlap dice with unlabeled ground truth pixels excluded."""
    scores = {}
    valid = gt > 0
    for code in (1, 2):
        tp = int(np.sum((pred == code) & (gt == code) & valid))
        fp = int(np.sum((pred == code) & (gt != code) & valid))
        fn = int(np.sum((pred != code) & (gt == code) & valid))
        scores[code] = 2 * tp / (2 * tp + fp + fn)
    return scores


def test_overfit_dice_and_evaluate_cli_agreement(tmp_path):
    # One synthetic labeled patch: bright smooth left half (gland), dark
    # busy right half (stroma), 4px unlabeled border.
    rng = np.random.default_rng(6)
    size = 64
    image = np.zeros((size, size, 3), dtype=np.uint8)
    image[:, : size // 2] = 190
    checker = (np.indices((size, size // 2)).sum(axis=0) % 2) * 150 + 30
    image[:, size // 2 :] = checker[:, :, None]
    image = np.clip(
        image.astype(int) + rng.integers(-8, 8, image.shape), 0, 255
    ).astype(np.uint8)
    gt = np.full((size, size), 2, dtype=np.uint8)
    gt[:, : size // 2] = 1
    gt[:4] = gt[-4:] = gt[:, :4] = gt[:, -4:] = 0

    from PIL import Image

    Image.fromarray(image).save(tmp_path / "patch.png")
    save_mask(gt, tmp_path / "patch_mask.png")
    manifest = {
        "formatVersion": 1,
        "records": [
            {
                "imagePath": "patch.png",
                "maskPath": "patch_mask.png",
                "split": "train",
                "x": 0,
                "y": 0,
            }
        ],
    }
    (tmp_path / "manifest.json").write_text(json.dumps(manifest), encoding="utf-8")

    config = UNetConfig(
        input_size=(size, size),
        base_filters=8,
        epochs=200,
        learning_rate=3e-3,
        batch_size=2,
        seed=0,
    )
    record = train_unet(
        tmp_path / "manifest.json", config, tmp_path / "run",
        early_stop_accuracy=0.999,
    )
    assert len(record.epoch_losses) <= 200

    pred_path = tmp_path / "pred.png"
    pred = infer_unet(record.checkpoint_path, image, out_path=pred_path)
    ours = _dice_per_class(pred, gt)
    assert ours[1] >= 0.95, f"gland training dice {ours[1]:.4f} < 0.95"
    assert ours[2] >= 0.95, f"stroma training dice {ours[2]:.4f} < 0.95"

    # The texture toolkit's evaluate CLI must report the same dice from
    # the emitted files alone.
    report_path = tmp_path / "report.json"
    result = subprocess.run(
        [
            sys.executable, "-m", "glandseg.cli", "evaluate",
            "--pred", str(pred_path),
            "--gt", str(tmp_path / "patch_mask.png"),
            "--out", str(report_path),
        ],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    reported = json.loads(report_path.read_text())["perClass"]
    assert abs(reported["gland"]["dice"] - ours[1]) <= 1e-6
    assert abs(reported["stroma"]["dice"] - ours[2]) <= 1e-6
