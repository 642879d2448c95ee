"""
Training classifiers and estimating accuracy with cross-validation
==================================================================

Builds a labeled feature table from synthetic textures, compares the
three classifier families under k-fold and holdout protocols, and shows
PCA compressing the table before training.
"""

import numpy as np

from glandseg import (
    Dataset,
    FeatureConfig,
    FeatureMatrix,
    Holdout,
    KFold,
    cross_validate,
    patch_features,
    pca_fit,
    pca_project,
    predict,
    train_classifier,
)
from glandseg.ml import ClassifierSpec

rng = np.random.default_rng(5)


def smooth_patch():
    ramp = np.linspace(90, 150, 35 * 35).reshape(35, 35)
    return np.clip(ramp + rng.normal(0, 3, ramp.shape), 0, 255).astype(np.uint8)


def rough_patch():
    checker = np.indices((35, 35)).sum(axis=0) % 2
    base = np.where(checker == 1, 200, 20) + rng.normal(0, 15, (35, 35))
    return np.clip(base, 0, 255).astype(np.uint8)


# 60 patches per class through the combined texture preset.
config = FeatureConfig.combined()
rows, labels = [], []
for _ in range(60):
    rows.append(patch_features(smooth_patch(), config).values)
    labels.append("gland")
    rows.append(patch_features(rough_patch(), config).values)
    labels.append("stroma")

matrix = FeatureMatrix(columns=config.column_names(), values=np.array(rows))
dataset = Dataset(features=matrix, labels=tuple(labels))
print(f"dataset: {matrix.values.shape[0]} rows x {matrix.values.shape[1]} features")

# 10-fold cross-validation for each classifier family. Folds are
# stratified, so every fold sees both classes.
print()
for kind in ("knn", "gaussian-nb", "linear-svm"):
    report = cross_validate(dataset, ClassifierSpec(kind=kind), KFold(k=10), seed=0)
    accs = ", ".join(f"{a:.2f}" for a in report.fold_accuracies[:5])
    print(f"{kind:12s} mean={report.mean_accuracy:.3f} first folds: {accs} ...")

# The same call with a holdout protocol: train on 70%, test on the rest.
print()
report = cross_validate(dataset, ClassifierSpec(kind="linear-svm"),
                        Holdout(train_fraction=0.7), seed=0)
c = report.confusion
print(f"holdout 70/30 linear-svm accuracy: {report.mean_accuracy:.3f}")
print(f"confusion: tp={c.tp} tn={c.tn} fp={c.fp} fn={c.fn}")

# PCA: keep enough components for 95% of variance, then train on the
# compressed table. Twelve correlated texture columns shrink a lot.
pca = pca_fit(matrix, keep=0.95)
compressed = pca_project(pca, matrix)
ratios = ", ".join(f"{r:.3f}" for r in pca.explained_variance_ratio)
print()
print(f"PCA keep=0.95 -> {pca.n_components} components (ratios: {ratios})")

small = Dataset(features=compressed, labels=dataset.labels)
report = cross_validate(small, ClassifierSpec(kind="gaussian-nb"), KFold(k=10), seed=0)
print(f"gaussian-nb on PCA features: mean={report.mean_accuracy:.3f}")

# Train a final model on everything and classify one fresh patch. The same
# PCA compression is available inline via ClassifierSpec's pca_keep field.
model = train_classifier(dataset, ClassifierSpec(kind="linear-svm", pca_keep=0.95))
probe = patch_features(rough_patch(), config)
outcome = predict(model, probe.values)
print()
print(f"fresh rough patch -> {outcome.label} (score {outcome.score:+.3f})")
