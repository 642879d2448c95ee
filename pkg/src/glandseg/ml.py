"""Feature standardization, PCA, and from-scratch patch classifiers.

Implements the classical pipeline: standardize named feature columns,
optionally project onto principal components, then classify with one of
three self-contained models (k-nearest-neighbor, Gaussian naive Bayes,
linear SVM trained by a seeded Pegasos subgradient descent). Also provides
the stratified k-fold and holdout validation protocols.

Conventions pinned for determinism:
  * class labels are compared as strings; ties always break toward the
    lexicographically smaller label
  * the positive class for confusion counts is the lexicographically
    smaller of the two labels ("gland" beats "stroma")
  * all randomness flows through numpy Generators seeded by the caller
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .texture import FeatureConfig, FeatureVector

CLASSIFIER_KINDS = ("knn", "gaussian-nb", "linear-svm")

VALID_LABELS = ("gland", "stroma")

_NB_VARIANCE_FLOOR = 1e-9
_KNN_WEIGHT_EPS = 1e-12


@dataclass(frozen=True)
class FeatureMatrix:
    """Rows of samples over uniquely named feature columns."""

    columns: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("feature values must be a 2-D array")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("feature column names must be unique")
        if values.shape[1] != len(self.columns):
            raise ValueError(
                f"{values.shape[1]} value columns but {len(self.columns)} names"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "values", values)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus one gland/stroma label per row."""

    features: FeatureMatrix
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) != self.features.n_rows:
            raise ValueError("label count must equal feature row count")
        bad = sorted(set(self.labels) - set(VALID_LABELS))
        if bad:
            raise ValueError(f"labels must be in {VALID_LABELS}, got {bad}")

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels)))


@dataclass(frozen=True)
class StandardizerModel:
    columns: tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray


@dataclass(frozen=True)
class PcaModel:
    """Principal directions of the (standardized) training features."""

    columns: tuple[str, ...]
    column_means: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def output_columns(self) -> tuple[str, ...]:
        return tuple(f"pc{i + 1}" for i in range(self.n_components))


@dataclass(frozen=True)
class KnnParams:
    k: int
    train_rows: np.ndarray
    train_labels: tuple[str, ...]


@dataclass(frozen=True)
class NbParams:
    classes: tuple[str, ...]
    priors: np.ndarray
    means: np.ndarray
    variances: np.ndarray


@dataclass(frozen=True)
class SvmParams:
    weights: np.ndarray
    bias: float
    lambda_: float
    epochs: int
    seed: int


@dataclass(frozen=True)
class ClassifierSpec:
    """Training recipe: classifier kind, hyperparameters, optional PCA step."""

    kind: str
    k: int = 1
    svm_lambda: float = 1e-3
    svm_epochs: int = 200
    seed: int = 0
    pca_keep: int | float | None = None

    def __post_init__(self):
        if self.kind not in CLASSIFIER_KINDS:
            raise ValueError(f"kind must be one of {CLASSIFIER_KINDS}, got {self.kind!r}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.svm_lambda <= 0 or self.svm_epochs < 1:
            raise ValueError("svm_lambda must be > 0 and svm_epochs >= 1")


@dataclass(frozen=True)
class ClassifierModel:
    kind: str
    params: KnnParams | NbParams | SvmParams
    classes: tuple[str, ...]
    standardizer: StandardizerModel
    pca: PcaModel | None = None
    feature_config: FeatureConfig | None = None

    @property
    def input_columns(self) -> tuple[str, ...]:
        return self.standardizer.columns


@dataclass(frozen=True)
class Prediction:
    label: str
    score: float


@dataclass(frozen=True)
class ConfusionCounts:
    """Binary confusion counts; the positive class is the smaller label."""

    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )


@dataclass(frozen=True)
class KFold:
    k: int


@dataclass(frozen=True)
class Holdout:
    train_fraction: float


@dataclass(frozen=True)
class CvReport:
    protocol: str
    fold_accuracies: tuple[float, ...]
    mean_accuracy: float
    confusion: ConfusionCounts


def fit_standardizer(features: FeatureMatrix) -> StandardizerModel:
    """Per-column mean and population standard deviation."""
    if features.n_rows < 2:
        raise ValueError("standardizer needs at least 2 rows")
    values = features.values
    return StandardizerModel(
        columns=features.columns,
        means=values.mean(axis=0),
        stds=values.std(axis=0),
    )


def apply_standardizer(model: StandardizerModel, features: FeatureMatrix) -> FeatureMatrix:
    """Center and scale columns; zero-variance columns pass through with divisor 1."""
    if features.columns != model.columns:
        raise ValueError("feature columns do not match the standardizer")
    divisor = np.where(model.stds == 0.0, 1.0, model.stds)
    return FeatureMatrix(
        columns=features.columns,
        values=(features.values - model.means) / divisor,
    )


def pca_fit(features: FeatureMatrix, keep: int | float) -> PcaModel:
    """Eigendecomposition of the covariance of centered data.

    ``keep`` is a component count when given as an int and a target
    explained-variance fraction in (0, 1] when given as a float. Component
    signs are fixed so the largest-magnitude entry of each row is positive.
    """
    values = features.values
    n, d = values.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 rows")
    means = values.mean(axis=0)
    centered = values - means
    cov = centered.T @ centered / n
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    components = eigvecs[:, order].T
    total = eigvals.sum()
    ratios = eigvals / total if total > 0 else np.zeros_like(eigvals)

    if isinstance(keep, (int, np.integer)) and not isinstance(keep, bool):
        if not (1 <= keep <= d):
            raise ValueError(f"keep must be in [1, {d}], got {keep}")
        k = int(keep)
    elif isinstance(keep, float):
        if not (0.0 < keep <= 1.0):
            raise ValueError(f"variance fraction must be in (0, 1], got {keep}")
        cum = np.cumsum(ratios)
        k = int(np.searchsorted(cum, keep - 1e-12) + 1)
        k = min(k, d)
    else:
        raise ValueError("keep must be an int count or a float variance fraction")

    components = components[:k]
    flip = np.take_along_axis(
        components, np.abs(components).argmax(axis=1, keepdims=True), axis=1
    )
    components = components * np.where(flip < 0, -1.0, 1.0)
    return PcaModel(
        columns=features.columns,
        column_means=means,
        components=components,
        explained_variance_ratio=ratios[:k],
    )


def pca_project(model: PcaModel, features: FeatureMatrix) -> FeatureMatrix:
    if features.columns != model.columns:
        raise ValueError("feature columns do not match the PCA model")
    projected = (features.values - model.column_means) @ model.components.T
    return FeatureMatrix(columns=model.output_columns(), values=projected)


def pca_reconstruct(model: PcaModel, projected: FeatureMatrix) -> FeatureMatrix:
    if projected.columns != model.output_columns():
        raise ValueError("projected columns do not match the PCA model")
    values = projected.values @ model.components + model.column_means
    return FeatureMatrix(columns=model.columns, values=values)


def pegasos_train(
    X: np.ndarray,
    y: np.ndarray,
    lambda_: float,
    epochs: int,
    seed: int,
    record_curve: bool = False,
):
    """Pegasos subgradient descent on the L2-regularized hinge loss.

    Optimization runs in centered coordinates with the bias riding along as
    an extra weight on a constant unit feature, so it shares the
    1/(lambda * t) step size and the multiplicative shrink (the usual
    augmentation trick; the centered bias picks up a negligible amount of
    regularization in exchange for the standard convergence behavior). The
    returned bias is shifted back to the input coordinates. Sample order
    reshuffles every epoch from a generator seeded once, so training is
    reproducible. The returned parameters are the running average of all
    iterates, which is also what the recorded loss curve evaluates after
    each epoch.
    """
    rng = np.random.default_rng(seed)
    n, d = X.shape
    center = X.mean(axis=0)
    aug = np.concatenate([X - center, np.ones((n, 1))], axis=1)
    w = np.zeros(d + 1)
    t = 0
    w_sum = np.zeros(d + 1)
    curve = []
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lambda_ * t)
            violated = y[i] * (aug[i] @ w) < 1.0
            w *= 1.0 - eta * lambda_
            if violated:
                w += eta * y[i] * aug[i]
            w_sum += w
        if record_curve:
            mean = w_sum / t
            curve.append(_hinge_objective(X, y, mean[:d],
                                          float(mean[d] - mean[:d] @ center), lambda_))
    mean = w_sum / t
    weights = mean[:d]
    bias = float(mean[d] - weights @ center)
    if record_curve:
        return weights, bias, curve
    return weights, bias


def _hinge_objective(X, y, w, b, lambda_):
    margins = y * (X @ w + b)
    return 0.5 * lambda_ * float(w @ w) + float(np.maximum(0.0, 1.0 - margins).mean())


def train_classifier(
    dataset: Dataset,
    spec: ClassifierSpec,
    feature_config: FeatureConfig | None = None,
) -> ClassifierModel:
    """Fit standardizer, optional PCA, then the requested classifier kind."""
    classes = dataset.classes
    if len(classes) < 2:
        raise ValueError("dataset must contain at least two classes")
    if feature_config is not None and len(feature_config.column_names()) != len(
        dataset.features.columns
    ):
        raise ValueError("feature config column count does not match the dataset")

    standardizer = fit_standardizer(dataset.features)
    transformed = apply_standardizer(standardizer, dataset.features)
    pca = None
    if spec.pca_keep is not None:
        pca = pca_fit(transformed, spec.pca_keep)
        transformed = pca_project(pca, transformed)
    X = transformed.values
    labels = np.array(dataset.labels)

    if spec.kind == "knn":
        if spec.k > X.shape[0]:
            raise ValueError(f"k={spec.k} exceeds the {X.shape[0]} training rows")
        params = KnnParams(k=spec.k, train_rows=X, train_labels=dataset.labels)
    elif spec.kind == "gaussian-nb":
        means = np.stack([X[labels == c].mean(axis=0) for c in classes])
        variances = np.stack(
            [np.maximum(X[labels == c].var(axis=0), _NB_VARIANCE_FLOOR) for c in classes]
        )
        priors = np.array([(labels == c).mean() for c in classes])
        params = NbParams(classes=classes, priors=priors, means=means, variances=variances)
    else:
        if len(classes) != 2:
            raise ValueError("linear-svm requires exactly two classes")
        y = np.where(labels == classes[0], 1.0, -1.0)
        w, b = pegasos_train(X, y, spec.svm_lambda, spec.svm_epochs, spec.seed)
        params = SvmParams(
            weights=w, bias=float(b), lambda_=spec.svm_lambda, epochs=spec.svm_epochs, seed=spec.seed
        )

    return ClassifierModel(
        kind=spec.kind,
        params=params,
        classes=classes,
        standardizer=standardizer,
        pca=pca,
        feature_config=feature_config,
    )


def _transform_for_model(model: ClassifierModel, values: np.ndarray) -> np.ndarray:
    matrix = FeatureMatrix(columns=model.input_columns, values=values)
    transformed = apply_standardizer(model.standardizer, matrix)
    if model.pca is not None:
        transformed = pca_project(model.pca, transformed)
    return transformed.values


def _predict_knn(params: KnnParams, classes: tuple[str, ...], X: np.ndarray):
    train = params.train_rows
    train_idx = np.searchsorted(
        np.array(classes), np.array(params.train_labels)
    )
    labels_out = np.empty(X.shape[0], dtype=np.int64)
    scores_out = np.empty(X.shape[0])
    k = params.k
    # Chunked distance computation keeps the query x train matrix bounded.
    chunk = max(1, int(4_000_000 // max(1, train.shape[0])))
    train_sq = (train**2).sum(axis=1)
    for start in range(0, X.shape[0], chunk):
        q = X[start : start + chunk]
        d_sq = np.maximum(
            (q**2).sum(axis=1)[:, None] + train_sq[None, :] - 2.0 * (q @ train.T), 0.0
        )
        if k < train.shape[0]:
            nearest = np.argpartition(d_sq, k - 1, axis=1)[:, :k]
        else:
            nearest = np.broadcast_to(np.arange(train.shape[0]), (q.shape[0], train.shape[0]))
        neighbor_classes = train_idx[nearest]
        votes = np.stack(
            [(neighbor_classes == c).sum(axis=1) for c in range(len(classes))], axis=1
        )
        predicted = votes.argmax(axis=1)
        dist = np.sqrt(np.take_along_axis(d_sq, nearest, axis=1))
        weights = 1.0 / (_KNN_WEIGHT_EPS + dist)
        own = weights * (neighbor_classes == predicted[:, None])
        labels_out[start : start + chunk] = predicted
        scores_out[start : start + chunk] = own.sum(axis=1) / weights.sum(axis=1)
    return labels_out, scores_out


def _predict_nb(params: NbParams, X: np.ndarray):
    log_posteriors = np.empty((X.shape[0], len(params.classes)))
    for c in range(len(params.classes)):
        mu = params.means[c]
        var = params.variances[c]
        log_like = (-0.5 * (np.log(2.0 * np.pi * var) + (X - mu) ** 2 / var)).sum(axis=1)
        log_posteriors[:, c] = np.log(params.priors[c]) + log_like
    predicted = log_posteriors.argmax(axis=1)
    top = np.take_along_axis(log_posteriors, predicted[:, None], axis=1)[:, 0]
    masked = log_posteriors.copy()
    np.put_along_axis(masked, predicted[:, None], -np.inf, axis=1)
    scores = top - masked.max(axis=1)
    return predicted, scores


def _predict_svm(params: SvmParams, X: np.ndarray):
    decision = X @ params.weights + params.bias
    return np.where(decision >= 0.0, 0, 1), decision


def predict_batch(model: ClassifierModel, features) -> list[Prediction]:
    """Predict many rows at once; see ``predict`` for the score conventions."""
    if isinstance(features, FeatureMatrix):
        if features.columns != model.input_columns:
            raise ValueError("feature columns do not match the model")
        values = features.values
    else:
        values = np.asarray(features, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != len(model.input_columns):
            raise ValueError(
                f"expected shape (n, {len(model.input_columns)}), got {values.shape}"
            )
    labels_idx, scores = predict_codes(model, values)
    return [
        Prediction(label=model.classes[c], score=float(s))
        for c, s in zip(labels_idx, scores)
    ]


def predict_codes(model: ClassifierModel, values: np.ndarray):
    """Vectorized prediction core: class indices into ``model.classes`` plus scores.

    The fast path for per-pixel segmentation; ``values`` are raw (unstandardized)
    feature rows.
    """
    X = _transform_for_model(model, values)
    if model.kind == "knn":
        return _predict_knn(model.params, model.classes, X)
    if model.kind == "gaussian-nb":
        return _predict_nb(model.params, X)
    return _predict_svm(model.params, X)


def predict(model: ClassifierModel, feature_vector) -> Prediction:
    """Label one feature vector.

    Scores: knn reports the distance-weighted vote fraction of the winning
    label, gaussian-nb the log-posterior margin over the runner-up, and
    linear-svm the signed margin (positive favors the smaller label).
    """
    if isinstance(feature_vector, FeatureVector):
        if feature_vector.names != model.input_columns:
            raise ValueError("feature names do not match the model")
        row = feature_vector.values
    else:
        row = np.asarray(feature_vector, dtype=np.float64)
    if row.ndim != 1 or row.shape[0] != len(model.input_columns):
        raise ValueError(
            f"expected {len(model.input_columns)} features, got shape {row.shape}"
        )
    return predict_batch(model, row[None, :])[0]


def confusion_from_labels(
    true_labels, predicted_labels, classes: tuple[str, ...]
) -> ConfusionCounts:
    """Binary confusion counts with ``classes[0]`` as the positive class."""
    if len(classes) != 2:
        raise ValueError("confusion counts are defined for exactly two classes")
    positive = classes[0]
    true_pos = np.array(true_labels) == positive
    pred_pos = np.array(predicted_labels) == positive
    return ConfusionCounts(
        tp=int(np.sum(true_pos & pred_pos)),
        tn=int(np.sum(~true_pos & ~pred_pos)),
        fp=int(np.sum(~true_pos & pred_pos)),
        fn=int(np.sum(true_pos & ~pred_pos)),
    )


def classification_accuracy(counts: ConfusionCounts) -> float:
    """(TP + TN) / (TP + TN + FP + FN)."""
    if counts.total == 0:
        raise ValueError("accuracy is undefined for all-zero counts")
    return (counts.tp + counts.tn) / counts.total


def _stratified_order(labels, seed: int) -> list[np.ndarray]:
    """Per-class index arrays, each shuffled, classes in sorted order."""
    rng = np.random.default_rng(seed)
    labels = np.array(labels)
    groups = []
    for c in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == c)
        groups.append(rng.permutation(idx))
    return groups


def kfold_splits(labels, k: int, seed: int) -> list[np.ndarray]:
    """Stratified k-fold validation index sets.

    Shuffled per-class index runs are concatenated (classes in sorted order)
    and dealt round-robin into folds with a fold counter that continues
    across class boundaries, which keeps fold sizes maximally even.
    """
    class_counts = [len(g) for g in _stratified_order(labels, seed)]
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > min(class_counts):
        raise ValueError(
            f"cannot stratify {k} folds with a class of only {min(class_counts)} samples"
        )
    dealt = np.concatenate(_stratified_order(labels, seed))
    folds = [[] for _ in range(k)]
    for position, sample in enumerate(dealt):
        folds[position % k].append(sample)
    return [np.array(sorted(f)) for f in folds]


def holdout_split(labels, train_fraction: float, seed: int):
    """Stratified train/validation split by largest-remainder rounding.

    Each class contributes floor(fraction * count) training samples, then
    classes with the largest fractional remainders (ties to the smaller
    label) absorb the difference so the train size equals
    round(fraction * total).
    """
    if not (0.0 < train_fraction < 1.0):
        raise ValueError(f"train fraction must be in (0, 1), got {train_fraction}")
    groups = _stratified_order(labels, seed)
    total = sum(len(g) for g in groups)
    target = int(np.floor(train_fraction * total + 0.5))
    exact = [train_fraction * len(g) for g in groups]
    base = [int(np.floor(e)) for e in exact]
    remainders = [e - b for e, b in zip(exact, base)]
    leftover = target - sum(base)
    for i in sorted(range(len(groups)), key=lambda i: (-remainders[i], i))[:leftover]:
        base[i] += 1
    train_idx = np.concatenate([g[: base[i]] for i, g in enumerate(groups)])
    val_idx = np.concatenate([g[base[i] :] for i, g in enumerate(groups)])
    return np.array(sorted(train_idx)), np.array(sorted(val_idx))


def _subset(dataset: Dataset, idx: np.ndarray) -> Dataset:
    return Dataset(
        features=FeatureMatrix(
            columns=dataset.features.columns, values=dataset.features.values[idx]
        ),
        labels=tuple(dataset.labels[i] for i in idx),
    )


def cross_validate(
    dataset: Dataset,
    spec: ClassifierSpec,
    protocol: KFold | Holdout,
    seed: int = 0,
) -> CvReport:
    """Run a stratified validation protocol and report accuracies via the
    correct-classification ratio."""
    classes = dataset.classes
    if len(classes) != 2:
        raise ValueError("cross-validation expects a two-class dataset")

    if isinstance(protocol, KFold):
        folds = kfold_splits(dataset.labels, protocol.k, seed)
        all_idx = np.arange(len(dataset.labels))
        pairs = [(np.setdiff1d(all_idx, fold), fold) for fold in folds]
        descriptor = f"kfold(k={protocol.k})"
    elif isinstance(protocol, Holdout):
        pairs = [holdout_split(dataset.labels, protocol.train_fraction, seed)]
        descriptor = f"holdout(train_fraction={protocol.train_fraction})"
    else:
        raise ValueError(f"unknown protocol: {protocol!r}")

    fold_accuracies = []
    pooled = ConfusionCounts(0, 0, 0, 0)
    for train_idx, val_idx in pairs:
        model = train_classifier(_subset(dataset, train_idx), spec)
        predictions = predict_batch(model, dataset.features.values[val_idx])
        predicted = [p.label for p in predictions]
        actual = [dataset.labels[i] for i in val_idx]
        counts = confusion_from_labels(actual, predicted, classes)
        fold_accuracies.append(classification_accuracy(counts))
        pooled = pooled + counts

    return CvReport(
        protocol=descriptor,
        fold_accuracies=tuple(fold_accuracies),
        mean_accuracy=float(np.mean(fold_accuracies)),
        confusion=pooled,
    )
