"""Local model, training loop, datasets, and evaluation metrics.

The model is a feedforward binary classifier: ReLU hidden layers with
inverted dropout during training and a single sigmoid output, trained with
minibatch SGD on binary cross-entropy.  Parameters live in one flat float64
vector packed layer by layer (weights row-major, then biases), so the
federation can treat a model as a plain vector.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class EmptyDataset(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class ParseError(ValueError):
    pass


class UnknownLabel(ValueError):
    pass


class TooFewSamples(ValueError):
    pass


# benign markers for label binarization; anything else counts as malicious
_BENIGN_LABELS = {"benign", "normal", "0"}


@dataclass(frozen=True)
class ModelSpec:
    input_dim: int
    hidden: tuple[int, ...] = (128, 64, 32)
    dropout: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("layer sizes must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout probability must be in [0, 1)")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, 1)

    @property
    def param_count(self) -> int:
        dims = self.layer_dims
        return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))


@dataclass
class Dataset:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray    # (n,) in {0, 1}

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("features must be (n, d); labels must be (n,)")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on sample count")

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.labels[idx])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 5
    batch_size: int = 64
    seed: int = 0

    def validate(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    loss: float


# -- parameter packing --


def _unpack(spec: ModelSpec, w: np.ndarray):
    """Views of the flat vector as per-layer (weights, bias) pairs."""
    w = np.asarray(w, dtype=np.float64)
    if w.size != spec.param_count:
        raise DimensionMismatch(
            f"expected {spec.param_count} parameters, got {w.size}"
        )
    dims = spec.layer_dims
    layers = []
    pos = 0
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        mat = w[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        bias = w[pos : pos + fan_out]
        pos += fan_out
        layers.append((mat, bias))
    return layers


def init_model(spec: ModelSpec, seed: int) -> np.ndarray:
    """He-style fan-in scaled weights, zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)
    parts = []
    dims = spec.layer_dims
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        scale = np.sqrt(2.0 / fan_in)
        parts.append(rng.normal(0.0, scale, size=fan_in * fan_out))
        parts.append(np.zeros(fan_out))
    return np.concatenate(parts)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # overflow-free on both tails; non-finite inputs propagate as NaN and are
    # caught by the callers' divergence checks
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
    return out


def predict_proba(
    spec: ModelSpec,
    w: np.ndarray,
    features: np.ndarray,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Forward pass over a batch; dropout only when train_mode is set."""
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if x.shape[1] != spec.input_dim:
        raise DimensionMismatch(
            f"expected {spec.input_dim} features, got {x.shape[1]}"
        )
    layers = _unpack(spec, w)
    with np.errstate(over="ignore", invalid="ignore"):
        h = x
        for mat, bias in layers[:-1]:
            h = np.maximum(h @ mat + bias, 0.0)
            if train_mode and spec.dropout > 0.0:
                if rng is None:
                    raise ValueError("train_mode dropout requires an rng")
                keep = rng.random(h.shape) >= spec.dropout
                h = h * keep / (1.0 - spec.dropout)
        mat, bias = layers[-1]
        return _sigmoid(h @ mat + bias).reshape(-1)


def forward(
    spec: ModelSpec, w: np.ndarray, x, train_mode: bool = False, seed: int = 0
) -> float:
    """Single-sample prediction probability."""
    rng = np.random.default_rng(seed) if train_mode else None
    return float(predict_proba(spec, w, np.asarray(x, dtype=np.float64).reshape(1, -1),
                               train_mode=train_mode, rng=rng)[0])


def _loss_and_grad(spec, w, x, y, dropout_rng=None):
    """Mean binary cross-entropy and its exact gradient over a batch.

    Dropout masks (when a generator is supplied) are applied identically in
    the forward and backward passes.
    """
    layers = _unpack(spec, w)
    n = x.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):
        acts = [x]
        masks = []
        h = x
        for mat, bias in layers[:-1]:
            h = np.maximum(h @ mat + bias, 0.0)
            if dropout_rng is not None and spec.dropout > 0.0:
                keep = dropout_rng.random(h.shape) >= spec.dropout
                h = h * keep / (1.0 - spec.dropout)
                masks.append(keep)
            else:
                masks.append(None)
            acts.append(h)
        mat, bias = layers[-1]
        p = _sigmoid((h @ mat + bias).reshape(-1))

        clipped = np.clip(p, 1e-12, 1.0 - 1e-12)
        loss = float(-np.mean(y * np.log(clipped) + (1 - y) * np.log(1 - clipped)))

        grads = [None] * len(layers)
        delta = ((p - y) / n).reshape(-1, 1)  # dL/dz at the sigmoid output
        for li in range(len(layers) - 1, -1, -1):
            a_prev = acts[li]
            grads[li] = (a_prev.T @ delta, delta.sum(axis=0))
            if li > 0:
                mat, _ = layers[li]
                delta = delta @ mat.T
                if masks[li - 1] is not None:
                    delta = delta * masks[li - 1] / (1.0 - spec.dropout)
                delta[acts[li] <= 0.0] = 0.0
        flat = np.concatenate([np.concatenate([g.ravel(), b]) for g, b in grads])
    return loss, flat


def gradient(spec: ModelSpec, w: np.ndarray, features, labels) -> np.ndarray:
    """Analytic gradient of mean BCE over a batch, dropout disabled."""
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if x.shape[0] == 0:
        raise EmptyDataset("gradient of an empty batch")
    _, g = _loss_and_grad(spec, w, x, y)
    return g


def batch_loss(spec: ModelSpec, w: np.ndarray, data: Dataset) -> float:
    loss, _ = _loss_and_grad(spec, w, data.features, data.labels.astype(np.float64))
    return loss


def local_train(spec: ModelSpec, w: np.ndarray, data: Dataset, cfg: TrainConfig) -> np.ndarray:
    """Minibatch SGD for cfg.epochs; batch order and dropout follow cfg.seed."""
    cfg.validate()
    if data.n == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    w = np.array(w, dtype=np.float64, copy=True)
    y = data.labels.astype(np.float64)
    for _ in range(cfg.epochs):
        order = rng.permutation(data.n)
        for start in range(0, data.n, cfg.batch_size):
            rows = order[start : start + cfg.batch_size]
            dropout_rng = rng if spec.dropout > 0.0 else None
            _, g = _loss_and_grad(spec, w, data.features[rows], y[rows], dropout_rng)
            with np.errstate(over="ignore", invalid="ignore"):
                w -= cfg.learning_rate * g
    return w


def evaluate(spec: ModelSpec, w: np.ndarray, test: Dataset, threshold: float = 0.5) -> MetricsReport:
    """Confusion-matrix metrics at the given decision threshold."""
    if test.n == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    p = predict_proba(spec, w, test.features)
    pred = (p >= threshold).astype(np.int64)
    y = test.labels
    tp = int(np.sum((pred == 1) & (y == 1)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    tn = int(np.sum((pred == 0) & (y == 0)))
    accuracy = (tp + tn) / test.n
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    clipped = np.clip(p, 1e-12, 1.0 - 1e-12)
    loss = float(-np.mean(y * np.log(clipped) + (1 - y) * np.log(1 - clipped)))
    return MetricsReport(accuracy, precision, recall, f1, loss)


# -- data generation and ingestion --


def make_synthetic(n: int, dim: int, class_separation: float, seed: int) -> Dataset:
    """Two unit-variance Gaussian blobs with the given mean separation.

    Labels are balanced (counts differ by at most one) and rows are shuffled
    deterministically.
    """
    if n < 2:
        raise TooFewSamples("need at least 2 samples")
    if dim < 1:
        raise ValueError("need at least 1 feature")
    rng = np.random.default_rng(seed)
    n0 = n // 2
    n1 = n - n0
    direction = np.ones(dim) / np.sqrt(dim)
    offset = 0.5 * class_separation * direction
    x0 = rng.normal(0.0, 1.0, size=(n0, dim)) - offset
    x1 = rng.normal(0.0, 1.0, size=(n1, dim)) + offset
    features = np.vstack([x0, x1])
    labels = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    order = rng.permutation(n)
    return Dataset(features[order], labels[order])


class Preprocessor:
    """One-hot encoding for categorical columns plus z-score standardization.

    Statistics are fit once (on the training split) and then applied
    unchanged to any other split.
    """

    def __init__(self, categorical_columns=()):
        self.categorical_columns = tuple(categorical_columns)
        self.vocab: dict[str, list[str]] = {}
        self.means: np.ndarray | None = None
        self.stds: np.ndarray | None = None
        self._numeric_cols: list[str] = []

    def fit(self, header, rows) -> "Preprocessor":
        self._numeric_cols = [c for c in header if c not in self.categorical_columns]
        for col in self.categorical_columns:
            idx = header.index(col)
            self.vocab[col] = sorted({row[idx] for row in rows})
        raw = self._expand(header, rows)
        self.means = raw.mean(axis=0)
        stds = raw.std(axis=0)
        stds[stds < 1e-12] = 1.0  # constant columns pass through centered
        self.stds = stds
        return self

    def _expand(self, header, rows) -> np.ndarray:
        columns = []
        for col in header:
            idx = header.index(col)
            if col in self.categorical_columns:
                levels = self.vocab[col]
                for level in levels:
                    columns.append(
                        np.array([1.0 if row[idx] == level else 0.0 for row in rows])
                    )
            else:
                vals = []
                for rownum, row in enumerate(rows):
                    try:
                        vals.append(float(row[idx]))
                    except ValueError:
                        raise ParseError(
                            f"row {rownum + 2}: column {col!r} value {row[idx]!r} "
                            "is not numeric"
                        ) from None
                columns.append(np.array(vals))
        return np.column_stack(columns)

    def transform(self, header, rows) -> np.ndarray:
        if self.means is None:
            raise RuntimeError("preprocessor not fitted")
        return (self._expand(header, rows) - self.means) / self.stds


def ingest_csv(path, label_column: str, categorical_columns=(), preprocessor=None) -> Dataset:
    """Load an RFC-4180 CSV with a header row into a standardized Dataset.

    Labels binarize as benign = 0 (values "benign"/"normal"/"0", case
    insensitive), anything else = 1.  Standardization statistics are fit on
    this file unless a fitted preprocessor is supplied (test splits should
    reuse the training split's preprocessor).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, header row required") from None
        rows = list(reader)
    if label_column not in header:
        raise UnknownLabel(f"label column {label_column!r} not in header {header}")
    for col in categorical_columns:
        if col not in header:
            raise ParseError(f"categorical column {col!r} not in header")
    if not rows:
        raise EmptyDataset(f"{path}: no data rows")
    for rownum, row in enumerate(rows):
        if len(row) != len(header):
            raise ParseError(
                f"row {rownum + 2}: expected {len(header)} fields, got {len(row)}"
            )
    label_idx = header.index(label_column)
    labels = np.array(
        [0 if row[label_idx].strip().lower() in _BENIGN_LABELS else 1 for row in rows],
        dtype=np.int64,
    )
    feat_header = [c for c in header if c != label_column]
    feat_rows = [[v for i, v in enumerate(row) if i != label_idx] for row in rows]
    if preprocessor is None:
        preprocessor = Preprocessor(categorical_columns).fit(feat_header, feat_rows)
    return Dataset(preprocessor.transform(feat_header, feat_rows), labels)


def partition_non_iid(
    data: Dataset, n_clients: int, dirichlet_alpha: float, seed: int, max_tries: int = 1000
) -> list[Dataset]:
    """Label-skew partition: per class, client proportions ~ Dirichlet(alpha).

    The result is a disjoint cover of the input; draws are repeated until
    every client holds at least one sample.
    """
    if n_clients < 2:
        raise ValueError("need at least 2 clients")
    if dirichlet_alpha <= 0:
        raise ValueError("dirichlet alpha must be > 0")
    if data.n < n_clients:
        raise TooFewSamples(f"{data.n} samples cannot cover {n_clients} clients")
    rng = np.random.default_rng(seed)
    classes = np.unique(data.labels)
    for _ in range(max_tries):
        assignments: list[list[int]] = [[] for _ in range(n_clients)]
        for cls in classes:
            idx = np.flatnonzero(data.labels == cls)
            idx = idx[rng.permutation(idx.size)]
            props = rng.dirichlet(np.full(n_clients, dirichlet_alpha))
            cuts = (np.cumsum(props)[:-1] * idx.size).astype(np.int64)
            for client, block in enumerate(np.split(idx, cuts)):
                assignments[client].extend(int(i) for i in block)
        if all(len(a) > 0 for a in assignments):
            return [data.subset(sorted(a)) for a in assignments]
    raise TooFewSamples(
        f"could not give every one of {n_clients} clients a sample in "
        f"{max_tries} draws; increase data or dirichlet alpha"
    )


def train_test_split(data: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic shuffled split; test gets floor(test_fraction * n) rows."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    order = rng.permutation(data.n)
    n_test = int(np.floor(test_fraction * data.n))
    if n_test == 0 or n_test == data.n:
        raise TooFewSamples("split would leave an empty side")
    return data.subset(order[n_test:]), data.subset(order[:n_test])
