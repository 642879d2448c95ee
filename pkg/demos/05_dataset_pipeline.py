"""
From a slide to a trained model file
====================================

Runs the whole dataset pipeline on disk: carve a synthetic slide into
tissue patches, record them in a manifest, extract features into a CSV,
train from the CSV, and reload the model file for inference. Every hop
goes through a documented file format, so each stage could run on a
different machine.
"""

from pathlib import Path

import numpy as np

from glandseg import (
    Dataset,
    FeatureMatrix,
    extract_patches,
    load_feature_csv,
    manifest_load,
    manifest_save,
    model_load,
    model_save,
    patch_features,
    predict,
    read_image,
    resize,
    resolve_manifest_path,
    save_feature_csv,
    to_grayscale,
    train_classifier,
    write_image,
)
from glandseg.cli import infer_feature_config
from glandseg.io import PatchRecord
from glandseg.ml import ClassifierSpec
from glandseg.texture import FeatureConfig

rng = np.random.default_rng(30)
root = Path(__file__).parent / "output" / "pipeline"
root.mkdir(parents=True, exist_ok=True)

# A 2048x2048 synthetic slide: white background, one dark smooth band in
# the upper half, one dark busy band below it. White areas count as
# non-tissue and are skipped.
slide = np.full((2048, 2048, 3), 245, dtype=np.uint8)
ramp = np.linspace(90, 150, 1920)[None, :].repeat(960, axis=0)
smooth = np.clip(ramp + rng.normal(0, 3, ramp.shape), 0, 255).astype(np.uint8)
checker = np.indices((512, 1920)).sum(axis=0) % 2
rough = np.where(checker == 1, 200, 20) + rng.normal(0, 15, (512, 1920))
rough = np.clip(rough, 0, 255).astype(np.uint8)
slide[64:1024, 64:1984] = smooth[:, :, None]
slide[1088:1600, 64:1984] = rough[:, :, None]
write_image(slide, root / "slide.png")

# Stage 1: patchify. Patches anchored on the tissue bounding box; mostly
# white windows are dropped by the tissue filter.
loaded = read_image(root / "slide.png")
patches = extract_patches(loaded, patch_size=512, min_tissue=0.3)
print(f"kept {len(patches)} of the candidate 512px windows")

records = []
for i, (patch, (x, y)) in enumerate(patches):
    small = resize(patch, 384, 384)
    name = f"patch_{i:04d}.png"
    write_image(small, root / name)
    # The smooth region lives in the top-left half of the slide.
    label = "gland" if y < 1024 else "stroma"
    records.append(PatchRecord(image_path=name, x=x, y=y, split="train", label=label))
manifest_save(records, root / "manifest.json")

# Stage 2: features. Reload purely from the manifest, as a separate
# process would, and write the labeled table as CSV.
config = FeatureConfig.combined()
records = manifest_load(root / "manifest.json")
rows, labels = [], []
for rec in records:
    patch = read_image(resolve_manifest_path(root / "manifest.json", rec.image_path))
    rows.append(patch_features(to_grayscale(patch), config).values)
    labels.append(rec.label)
dataset = Dataset(
    features=FeatureMatrix(columns=config.column_names(), values=np.array(rows)),
    labels=tuple(labels),
)
save_feature_csv(dataset, root / "features.csv")
print(f"features.csv: {len(labels)} rows "
      f"({labels.count('gland')} gland, {labels.count('stroma')} stroma)")

# Stage 3: train from the CSV alone. The feature layout is recovered from
# the column names so the model file stays self-describing.
dataset = load_feature_csv(root / "features.csv")
recovered = infer_feature_config(dataset.features.columns)
model = train_classifier(dataset, ClassifierSpec(kind="knn", k=3),
                         feature_config=recovered)
model_save(model, root / "model.json")

# Stage 4: reload and predict. The round-tripped model must behave
# identically to the in-memory one.
reloaded = model_load(root / "model.json")
probe = dataset.features.values[0]
a, b = predict(model, probe), predict(reloaded, probe)
assert (a.label, a.score) == (b.label, b.score)
print(f"model.json round trip OK, first row -> {b.label}")
print(f"artifacts under {root}")
