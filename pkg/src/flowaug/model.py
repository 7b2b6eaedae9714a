"""Small dense classifier trained with hand-rolled backprop and Adam.

The network is input -> 64 -> 32 -> classes with ReLU between layers and a
softmax head, differentiated manually (no autograd dependency). Training
follows the batch-doubling protocol from sampling: every optimizer step sees
2B samples, and the model returned is the snapshot from the epoch with the
best validation weighted F1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .augment import AugmentationSpec
from .flow import Dataset, NormConfig, preprocess_batch
from .rng import RngStream
from .sampling import Sampler, SamplerConfig, make_batch

HIDDEN_DIMS = (64, 32)

CHECKPOINT_SCHEMA = 1


class TrainingDiverged(RuntimeError):
    """Raised when the loss or the parameters stop being finite."""


@dataclass
class MlpModel:
    """Dense network parameters; weights[i] has shape (fan_in, fan_out)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def n_classes(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "MlpModel":
        return MlpModel([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def init_model(
    in_dim: int, n_classes: int, rng: RngStream, hidden: tuple[int, ...] = HIDDEN_DIMS
) -> MlpModel:
    """He-uniform weights (limit sqrt(6 / fan_in)), zero biases.

    Draw order: one uniform weight matrix per layer, input side first.
    """
    if in_dim < 1 or n_classes < 2:
        raise ValueError("need in_dim >= 1 and n_classes >= 2")
    dims = (in_dim,) + tuple(hidden) + (n_classes,)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = math.sqrt(6.0 / fan_in)
        weights.append(np.asarray(rng.uniform(-limit, limit, size=(fan_in, fan_out))))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights, biases)


def _forward_cache(model: MlpModel, x: np.ndarray):
    """Activations per layer; returns (activations, pre_activations, probs)."""
    acts = [x]
    pres = []
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        pres.append(z)
        h = z if i == last else np.maximum(0.0, z)
        acts.append(h)
    return acts, pres, _softmax(pres[-1])


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Class probabilities for one feature vector (d,) or a batch (n, d)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    _, _, probs = _forward_cache(model, x[None, :] if single else x)
    return probs[0] if single else probs


def backward(model: MlpModel, x: np.ndarray, y) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Cross-entropy loss and gradients for every parameter.

    A 1-D x with an int label gives that sample's loss and gradients; a 2-D
    x with a label vector gives the batch MEAN of both (so n times the batch
    gradient equals the sum of the per-sample ones).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
        y = np.asarray([y], dtype=np.int64)
    else:
        y = np.asarray(y, dtype=np.int64)
    n = x.shape[0]
    acts, pres, probs = _forward_cache(model, x)
    logits = pres[-1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = float(-log_probs[np.arange(n), y].mean())

    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ model.weights[i].T) * (pres[i - 1] > 0.0)
    return loss, grads


class AdamOptimizer:
    """Adam with bias correction; state lives here, the model stays plain."""

    def __init__(self, model: MlpModel, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self._m = [(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(model.weights, model.biases)]
        self._v = [(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(model.weights, model.biases)]

    def step(self, model: MlpModel, grads) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for i, (dw, db) in enumerate(grads):
            for param, g, m, v in (
                (model.weights[i], dw, self._m[i][0], self._v[i][0]),
                (model.biases[i], db, self._m[i][1], self._v[i][1]),
            ):
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                param -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and loop settings; epochs = 0 returns the untouched init."""

    epochs: int = 30
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        for name, b in (("beta1", self.beta1), ("beta2", self.beta2)):
            if not 0.0 <= b < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {b}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")


@dataclass(frozen=True)
class EvalReport:
    """Per-class precision/recall/F1 plus the support-weighted F1 summary."""

    weighted_f1: float
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    support: tuple[int, ...]
    confusion: tuple[tuple[int, ...], ...]

    def to_dict(self) -> dict:
        return {
            "weighted_f1": self.weighted_f1,
            "precision": list(self.precision),
            "recall": list(self.recall),
            "f1": list(self.f1),
            "support": list(self.support),
            "confusion": [list(row) for row in self.confusion],
        }


def _confusion(true: np.ndarray, pred: np.ndarray, k: int) -> np.ndarray:
    mat = np.zeros((k, k), dtype=np.int64)
    np.add.at(mat, (true, pred), 1)
    return mat


def _weighted_f1_from_confusion(mat: np.ndarray):
    """Per-class P/R/F1 with zero-denominator cases pinned to 0, plus the
    support-weighted F1 (absent classes carry weight 0)."""
    tp = np.diag(mat).astype(np.float64)
    support = mat.sum(axis=1)
    pred_count = mat.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(pred_count > 0, tp / pred_count, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2.0 * precision * recall / denom, 0.0)
    total = support.sum()
    weighted = float((f1 * support).sum() / total) if total > 0 else 0.0
    return precision, recall, f1, support, weighted


def evaluate(model: MlpModel, dataset: Dataset, norm: NormConfig = NormConfig()) -> EvalReport:
    """Argmax predictions over the dataset summarized per class."""
    k = model.n_classes()
    if len(dataset.labels) != k:
        raise ValueError(
            f"model predicts {k} classes but the dataset vocabulary has {len(dataset.labels)}"
        )
    x = preprocess_batch(dataset.samples, norm)
    true = np.asarray([s.label for s in dataset.samples], dtype=np.int64)
    pred = np.argmax(forward(model, x), axis=1)
    mat = _confusion(true, pred, k)
    precision, recall, f1, support, weighted = _weighted_f1_from_confusion(mat)
    return EvalReport(
        weighted_f1=weighted,
        precision=tuple(float(v) for v in precision),
        recall=tuple(float(v) for v in recall),
        f1=tuple(float(v) for v in f1),
        support=tuple(int(v) for v in support),
        confusion=tuple(tuple(int(v) for v in row) for row in mat),
    )


def train(
    train_set: Dataset,
    val_set: Dataset,
    sampler_config: SamplerConfig,
    spec: AugmentationSpec,
    config: TrainConfig = TrainConfig(),
    norm: NormConfig = NormConfig(),
) -> tuple[MlpModel, list[dict]]:
    """Run the batch-doubling protocol; returns (best model, epoch history).

    One epoch is ceil(len(train_set) / B) protocol batches. After each epoch
    the model is scored on val_set; the returned model is the snapshot from
    the epoch with the highest validation weighted F1 (earliest wins ties).
    History rows: {"epoch", "train_loss", "val_weighted_f1"}. Non-finite loss
    raises TrainingDiverged.
    """
    root = RngStream(config.seed)
    in_dim = 3 * train_set.series_len()
    k = len(train_set.labels)
    model = init_model(in_dim, k, root.child("init"))
    if config.epochs == 0:
        return model, []
    sampler = Sampler(train_set, sampler_config)
    batch_rng = root.child("batches")
    optimizer = AdamOptimizer(model, config.lr, config.beta1, config.beta2, config.eps)
    batches_per_epoch = max(1, math.ceil(len(train_set) / sampler_config.batch_size))

    history: list[dict] = []
    best_f1 = -1.0
    best = model.copy()
    for epoch in range(config.epochs):
        losses = np.empty(batches_per_epoch)
        for b in range(batches_per_epoch):
            batch = make_batch(train_set, sampler_config, spec, batch_rng, sampler=sampler)
            x = preprocess_batch(batch.samples, norm)
            y = np.asarray([s.label for s in batch.samples], dtype=np.int64)
            loss, grads = backward(model, x, y)
            if not math.isfinite(loss):
                pnorm = math.sqrt(
                    sum(float((w * w).sum()) for w in model.weights)
                    + sum(float((v * v).sum()) for v in model.biases)
                )
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} batch {b} "
                    f"(parameter norm {pnorm:.3e}, lr={config.lr})"
                )
            optimizer.step(model, grads)
            losses[b] = loss
        val_f1 = evaluate(model, val_set, norm).weighted_f1
        history.append(
            {"epoch": epoch, "train_loss": float(losses.mean()), "val_weighted_f1": val_f1}
        )
        if val_f1 > best_f1:
            best_f1 = val_f1
            best = model.copy()
    return best, history


def save_checkpoint(model: MlpModel, path) -> None:
    """Persist parameters as an .npz archive with a schema tag."""
    payload = {
        "schema": np.asarray(CHECKPOINT_SCHEMA),
        "n_layers": np.asarray(len(model.weights)),
    }
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        payload[f"w{i}"] = w
        payload[f"b{i}"] = b
    np.savez(path, **payload)


def load_checkpoint(path) -> MlpModel:
    """Inverse of save_checkpoint; round-trips parameters bit-exactly."""
    with np.load(path) as archive:
        schema = int(archive["schema"])
        if schema != CHECKPOINT_SCHEMA:
            raise ValueError(f"unsupported checkpoint schema {schema}")
        n = int(archive["n_layers"])
        weights = [archive[f"w{i}"] for i in range(n)]
        biases = [archive[f"b{i}"] for i in range(n)]
    return MlpModel(weights, biases)
