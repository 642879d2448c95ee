"""Acceptance gate: one test per release criterion, tolerances pinned.

Run with -v to get a pass/fail line per criterion. Every expected value here
is either computed by an independent brute-force oracle inside the test or
asserted as an exact identity.
"""

import base64
import http.client
import json
import threading
import time

import numpy as np
import pytest

from glandseg.io import (
    PatchRecord,
    encode_png,
    decode_image,
    load_feature_csv,
    manifest_load,
    manifest_save,
    mask_load,
    mask_save,
    model_load,
    model_save,
    read_image,
    report_load,
    report_save,
    save_feature_csv,
    write_image,
)
from glandseg.metrics import BoundaryConfig, binary_overlap, boundary_f1, dice, evaluate, jaccard
from glandseg.ml import (
    ClassifierSpec,
    Dataset,
    FeatureMatrix,
    KFold,
    cross_validate,
    pca_fit,
    pca_project,
    pca_reconstruct,
    predict_batch,
    train_classifier,
)
from glandseg.segmentation import LabelMask, SegmentationConfig, segment_image
from glandseg.service import create_server
from glandseg.texture import (
    DegenerateImageError,
    FeatureConfig,
    Offset,
    compute_glcm,
    compute_lbp,
    haralick_features,
    patch_features,
    quantize,
)

GRID_OFFSETS = tuple(Offset(d, t) for d in (1, 2, 4, 8, 16) for t in (0, 45, 90, 135))


def blob_dataset(n_per_class, d=6, seed=0):
    rng = np.random.default_rng(seed)
    values = np.vstack([
        rng.normal(-3, 1, size=(n_per_class, d)),
        rng.normal(3, 1, size=(n_per_class, d)),
    ])
    columns = tuple(f"f{i}" for i in range(d))
    return Dataset(
        features=FeatureMatrix(columns=columns, values=values),
        labels=("gland",) * n_per_class + ("stroma",) * n_per_class,
    )


def rough_texture(rng, shape):
    base = (np.indices(shape).sum(axis=0) % 2) * 180 + 20
    return np.clip(base + rng.integers(-15, 16, size=shape), 0, 255).astype(np.uint8)


def smooth_texture(rng, shape):
    base = np.tile(np.linspace(90, 150, shape[1]), (shape[0], 1))
    return np.clip(base + rng.integers(-3, 4, size=shape), 0, 255).astype(np.uint8)


def test_glcm_matches_bruteforce_pair_counts():
    """100 random 16x16 images, all 20 offsets: exact count equality, < 1 s."""
    displacement = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}
    rng = np.random.default_rng(100)
    started = time.perf_counter()
    checked = 0
    for _ in range(100):
        image = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
        levels = quantize(image, 8).data
        for offset in GRID_OFFSETS:
            unit = displacement[offset.theta]
            dr, dc = unit[0] * offset.delta, unit[1] * offset.delta
            counts = np.zeros((8, 8), dtype=np.int64)
            for r in range(16):
                for c in range(16):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < 16 and 0 <= cc < 16:
                        counts[levels[r, c], levels[rr, cc]] += 1
            if counts.sum() == 0:
                with pytest.raises(DegenerateImageError):
                    compute_glcm(quantize(image, 8), offset,
                                 symmetric=False, normalize=False)
            else:
                glcm = compute_glcm(quantize(image, 8), offset,
                                    symmetric=False, normalize=False)
                assert np.array_equal(glcm.cells, counts)
            checked += 1
    elapsed = time.perf_counter() - started
    assert checked == 2000
    assert elapsed < 1.0, f"oracle comparison took {elapsed:.2f} s"


def test_constant_image_haralick_identities():
    """Constant input: contrast 0, dissimilarity 0, energy 1, homogeneity 1, entropy 0."""
    image = quantize(np.full((24, 24), 137, dtype=np.uint8), 8)
    glcm = compute_glcm(image, Offset(1, 0), symmetric=False, normalize=True)
    feats = haralick_features(glcm)
    assert feats.contrast == 0.0
    assert feats.dissimilarity == 0.0
    assert feats.energy == 1.0
    assert feats.homogeneity == 1.0
    assert feats.entropy == 0.0


def test_dice_jaccard_identity_on_reference_pairs():
    """Published (jaccard, dice) result pairs must satisfy D = 2J/(1+J) to 0.01."""
    rng = np.random.default_rng(101)
    for _ in range(20):
        pred = rng.integers(0, 3, size=(16, 16))
        gt = rng.integers(1, 3, size=(16, 16))
        counts = binary_overlap(pred, gt, positive_class=1)
        j = jaccard(counts)
        d = dice(counts)
        assert abs(2 * j / (1 + j) - d) <= 1e-12

    # Reference evaluation pairs: four scenes x five methods.
    reference_pairs = (
        (0.30, 0.46), (0.35, 0.52), (0.33, 0.49), (0.19, 0.19), (0.85, 0.92),
        (0.25, 0.32), (0.28, 0.35), (0.19, 0.32), (0.21, 0.21), (0.80, 0.91),
        (0.24, 0.35), (0.34, 0.48), (0.35, 0.52), (0.39, 0.39), (0.82, 0.90),
        (0.30, 0.47), (0.25, 0.40), (0.31, 0.47), (0.29, 0.29), (0.78, 0.88),
    )
    violations = []
    for j, d in reference_pairs:
        gap = abs(2 * j / (1 + j) - d)
        if gap > 0.01:
            violations.append(f"J={j} D={d} gap={gap:.4f}")
    assert not violations, "inconsistent reference pairs: " + "; ".join(violations)


def test_lbp_codes_invariant_to_constant_shift():
    """50 random images, random non-saturating shifts: bit-identical code maps."""
    rng = np.random.default_rng(102)
    for _ in range(50):
        image = rng.integers(60, 180, size=(24, 24), dtype=np.uint8)
        shift = int(rng.integers(-50, 51))
        shifted = (image.astype(np.int64) + shift).astype(np.uint8)
        radius = int(rng.choice([1, 2, 4]))
        base = compute_lbp(image, radius)
        moved = compute_lbp(shifted, radius)
        assert np.array_equal(base.codes, moved.codes)


def test_pca_orthonormal_components_and_reconstruction():
    """Random 280x12: orthonormality and full-rank roundtrip to 1e-9, sorted ratios."""
    rng = np.random.default_rng(103)
    values = rng.normal(size=(280, 12)) @ rng.normal(size=(12, 12))
    matrix = FeatureMatrix(columns=tuple(f"f{i}" for i in range(12)), values=values)
    model = pca_fit(matrix, keep=12)
    gram = model.components @ model.components.T
    assert np.max(np.abs(gram - np.eye(12))) <= 1e-9
    ratios = np.asarray(model.explained_variance_ratio)
    assert np.all(np.diff(ratios) <= 1e-12)
    projected = pca_project(model, matrix)
    restored = pca_reconstruct(model, projected)
    assert np.max(np.abs(restored.values - values)) <= 1e-9


def test_classifiers_reach_098_on_separable_blobs():
    """200-sample separable blobs, 20-fold stratified CV, all three classifiers."""
    dataset = blob_dataset(100, seed=104)
    for kind in ("linear-svm", "knn", "gaussian-nb"):
        spec = ClassifierSpec(kind=kind, seed=5)
        report = cross_validate(dataset, spec, KFold(k=20), seed=5)
        assert report.mean_accuracy >= 0.98, (kind, report.mean_accuracy)
        again = cross_validate(dataset, spec, KFold(k=20), seed=5)
        assert again.fold_accuracies == report.fold_accuracies


def test_end_to_end_bitexture_segmentation():
    """384x384 bi-texture, 12-feature SVM, 35x35 window: Dice >= 0.90, workers agree."""
    rng = np.random.default_rng(105)
    window = 35
    config = FeatureConfig.combined()
    gland_field = smooth_texture(rng, (384, 384))
    stroma_field = rough_texture(rng, (384, 384))
    image = np.hstack([gland_field[:, :192], stroma_field[:, :192]])

    rows = []
    for field in (gland_field, stroma_field):
        for _ in range(40):
            y = int(rng.integers(0, 384 - window))
            x = int(rng.integers(0, 384 - window))
            win = field[y:y + window, x:x + window]
            rows.append(patch_features(win, config).values)
    dataset = Dataset(
        features=FeatureMatrix(columns=config.column_names(), values=np.array(rows)),
        labels=("gland",) * 40 + ("stroma",) * 40,
    )
    model = train_classifier(dataset, ClassifierSpec(kind="linear-svm", seed=3),
                             feature_config=config)

    started = time.perf_counter()
    mask4 = segment_image(image, model, SegmentationConfig(window_size=window, workers=4))
    elapsed = time.perf_counter() - started
    assert elapsed <= 120.0, f"segmentation took {elapsed:.1f} s"

    mask1 = segment_image(image, model, SegmentationConfig(window_size=window, workers=1))
    assert np.array_equal(mask1.labels, mask4.labels)

    gt = np.ones((384, 384), dtype=np.uint8)
    gt[:, 192:] = 2
    for class_id in (1, 2):
        score = dice(binary_overlap(mask4.labels, gt, positive_class=class_id))
        assert score >= 0.90, (class_id, score)


def test_boundary_f1_tolerance_behavior():
    """Identity, tolerated shift, and an exact brute-force match beyond tolerance."""
    base = np.ones((16, 16), dtype=np.int64)
    base[:, 8:] = 2
    assert boundary_f1(base, base).mean == 1.0

    shifted = np.ones((16, 16), dtype=np.int64)
    shifted[:, 9:] = 2
    tolerant = BoundaryConfig(tolerance_distance=1.5)
    assert boundary_f1(shifted, base, tolerant).mean == 1.0

    def oracle_bf(pred, gt, tol):
        def boundary(mask, cls):
            points = []
            h, w = mask.shape
            for r in range(h):
                for c in range(w):
                    if mask[r, c] != cls:
                        continue
                    for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                        if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] != cls:
                            points.append((r, c))
                            break
            return points

        def match_fraction(points, reference):
            if not points:
                return 0.0
            hits = 0
            for r, c in points:
                best = min((np.hypot(r - rr, c - cc) for rr, cc in reference),
                           default=np.inf)
                if best <= tol:
                    hits += 1
            return hits / len(points)

        scores = []
        for cls in (1, 2):
            precision = match_fraction(boundary(pred, cls), boundary(gt, cls))
            recall = match_fraction(boundary(gt, cls), boundary(pred, cls))
            if precision + recall == 0:
                scores.append(0.0)
            else:
                scores.append(2 * precision * recall / (precision + recall))
        return scores

    rng = np.random.default_rng(106)
    far = np.ones((16, 16), dtype=np.int64)
    far[:, 12:] = 2
    default_tol = BoundaryConfig().resolve_tolerance((16, 16))
    result = boundary_f1(far, base)
    expected = oracle_bf(far, base, default_tol)
    assert [result.per_class[1], result.per_class[2]] == expected

    for _ in range(5):
        pred = rng.integers(1, 3, size=(16, 16))
        gt = rng.integers(1, 3, size=(16, 16))
        result = boundary_f1(pred, gt)
        expected = oracle_bf(pred, gt, default_tol)
        assert result.per_class[1] == pytest.approx(expected[0], abs=1e-12)
        assert result.per_class[2] == pytest.approx(expected[1], abs=1e-12)


def test_service_segment_roundtrip_and_limits(tmp_path):
    """POST /segment on 384x384 -> 200 and matching dims; 413 and 404 enforced."""
    rng = np.random.default_rng(107)
    config = FeatureConfig.combined()
    rows = [patch_features(smooth_texture(rng, (32, 32)), config).values
            for _ in range(8)]
    rows += [patch_features(rough_texture(rng, (32, 32)), config).values
             for _ in range(8)]
    dataset = Dataset(
        features=FeatureMatrix(columns=config.column_names(), values=np.array(rows)),
        labels=("gland",) * 8 + ("stroma",) * 8,
    )
    model = train_classifier(dataset, ClassifierSpec(kind="linear-svm"),
                             feature_config=config)
    models_dir = tmp_path / "models"
    models_dir.mkdir()
    model_save(model, models_dir / "default.json")

    boundary = "acceptance-boundary"

    def multipart(model_id, png):
        body = (
            f'--{boundary}\r\nContent-Disposition: form-data; name="modelId"'
            f"\r\n\r\n{model_id}\r\n"
            f'--{boundary}\r\nContent-Disposition: form-data; name="stride"'
            f"\r\n\r\n2\r\n"
            f'--{boundary}\r\nContent-Disposition: form-data; name="image"; '
            f'filename="image.png"\r\nContent-Type: image/png\r\n\r\n'
        ).encode() + png + f"\r\n--{boundary}--\r\n".encode()
        return body, f"multipart/form-data; boundary={boundary}"

    def post(address, body, content_type, extra_headers=None):
        conn = http.client.HTTPConnection(*address, timeout=60)
        try:
            headers = {"Content-Type": content_type}
            headers.update(extra_headers or {})
            conn.request("POST", "/segment", body=body, headers=headers)
            response = conn.getresponse()
            return response.status, response.read()
        finally:
            conn.close()

    server = create_server("127.0.0.1", 0, models_dir, workers=2)
    thread = threading.Thread(target=server.serve_forever, kwargs={"poll_interval": 0.02})
    thread.start()
    try:
        address = server.server_address[:2]
        png = encode_png(rng.integers(0, 256, size=(384, 384), dtype=np.uint8))
        status, reply = post(address, *multipart("default", png))
        assert status == 200
        mask = decode_image(base64.b64decode(json.loads(reply)["maskPng"]))
        assert mask.shape == (384, 384)

        body, content_type = multipart("default", png)
        status, _ = post(address, body, content_type,
                         extra_headers={"Content-Length": str(5 * 1024 * 1024)})
        assert status == 413

        status, _ = post(address, *multipart("missing-model", png))
        assert status == 404
    finally:
        server.shutdown()
        thread.join()
        server.server_close()


def test_model_and_codec_roundtrips(tmp_path):
    """Reloaded models predict identically; every codec round-trips bit-exactly."""
    rng = np.random.default_rng(108)
    dataset = blob_dataset(30, seed=108)
    queries = rng.normal(size=(100, 6)) * 2
    for kind in ("knn", "gaussian-nb", "linear-svm"):
        model = train_classifier(dataset, ClassifierSpec(kind=kind, pca_keep=4))
        path = tmp_path / f"{kind}.json"
        model_save(model, path)
        reloaded = model_load(path)
        want = predict_batch(model, queries)
        got = predict_batch(reloaded, queries)
        assert [p.label for p in got] == [p.label for p in want]
        assert [p.score for p in got] == [p.score for p in want]

    image = rng.integers(0, 256, size=(64, 48, 3), dtype=np.uint8)
    write_image(image, tmp_path / "img.png")
    assert np.array_equal(read_image(tmp_path / "img.png"), image)

    labels = rng.integers(0, 3, size=(40, 52)).astype(np.uint8)
    mask_save(LabelMask(labels=labels), tmp_path / "mask.png")
    assert np.array_equal(mask_load(tmp_path / "mask.png").labels, labels)

    save_feature_csv(dataset, tmp_path / "features.csv")
    loaded = load_feature_csv(tmp_path / "features.csv")
    assert loaded.features.columns == dataset.features.columns
    assert np.array_equal(loaded.features.values, dataset.features.values)
    assert loaded.labels == dataset.labels

    write_image(image, tmp_path / "patch_0.png")
    records = [PatchRecord(image_path="patch_0.png", x=128, y=256, split="test",
                           label="gland")]
    manifest_save(records, tmp_path / "manifest.json")
    assert manifest_load(tmp_path / "manifest.json") == records

    gt = np.ones((20, 20), dtype=np.int64)
    gt[:, 10:] = 2
    report = evaluate(gt, gt)
    report_save(report, tmp_path / "report.json")
    reloaded_doc = report_load(tmp_path / "report.json")
    report_save(report, tmp_path / "report2.json")
    assert (tmp_path / "report.json").read_bytes() == (tmp_path / "report2.json").read_bytes()
    assert reloaded_doc["globalAccuracy"] == 1.0
