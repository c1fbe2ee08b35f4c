"""Feed-forward speaker identifier over MFCC frames.

A small ReLU network ending in a linear layer whose pre-softmax activations
double as segment embeddings. Training is plain backprop with Adam on
cross-entropy against one-hot labels. The online update treats each segment
cluster as one candidate epoch, gated by the normalized cosine similarity
between the cluster's embeddings and the banked embeddings of the predicted
speaker.

All math is numpy; weights are treated as immutable (updates return new
arrays) so callers can hold references across rounds safely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterSet, Segment, cluster_rows
from .errors import (
    ArchMismatch,
    DimensionMismatch,
    EmptyCluster,
    EmptyData,
    EmptySegment,
    EmptySet,
    InvalidArch,
    LabelOutOfRange,
    ZeroNormEmbedding,
)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
DEFAULT_BANK_CAP = 200


@dataclass(frozen=True)
class ModelArch:
    input_dim: int = 12
    hidden_sizes: tuple[int, ...] = (64, 64)
    num_classes: int = 2
    activation: str = "relu"

    def __post_init__(self):
        if not self.hidden_sizes:
            raise InvalidArch("at least one hidden layer required")
        if self.num_classes < 2:
            raise InvalidArch("need at least two classes")
        if self.input_dim < 1 or any(h < 1 for h in self.hidden_sizes):
            raise InvalidArch("layer sizes must be positive")
        if self.activation != "relu":
            raise InvalidArch(f"unsupported activation '{self.activation}'")
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim, *self.hidden_sizes, self.num_classes]

    @property
    def embedding_dim(self) -> int:
        return self.num_classes

    def num_params(self) -> int:
        sizes = self.layer_sizes
        return sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(len(sizes) - 1))


@dataclass(frozen=True)
class ModelWeights:
    arch: ModelArch
    weights: tuple[np.ndarray, ...]     # one (fan_in, fan_out) matrix per layer
    biases: tuple[np.ndarray, ...]
    version: int = 0

    def __post_init__(self):
        sizes = self.arch.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ArchMismatch("layer count does not match arch")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise ArchMismatch(f"layer {i} shape {w.shape} does not chain")

    def bumped(self, new_weights, new_biases) -> "ModelWeights":
        return ModelWeights(arch=self.arch,
                            weights=tuple(new_weights),
                            biases=tuple(new_biases),
                            version=self.version + 1)


@dataclass
class AdamState:
    step: int = 0
    m_w: list[np.ndarray] = field(default_factory=list)
    v_w: list[np.ndarray] = field(default_factory=list)
    m_b: list[np.ndarray] = field(default_factory=list)
    v_b: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_model(cls, model: ModelWeights) -> "AdamState":
        return cls(step=0,
                   m_w=[np.zeros_like(w) for w in model.weights],
                   v_w=[np.zeros_like(w) for w in model.weights],
                   m_b=[np.zeros_like(b) for b in model.biases],
                   v_b=[np.zeros_like(b) for b in model.biases])


@dataclass(frozen=True)
class Embedding:
    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding entries must be finite")
        object.__setattr__(self, "values", v)


class EmbeddingBank:
    """Per-speaker FIFO store of training-data embeddings."""

    def __init__(self, bank_cap: int = DEFAULT_BANK_CAP):
        if bank_cap < 1:
            raise ValueError("bank_cap must be positive")
        self.bank_cap = bank_cap
        self._store: dict[int, list[Embedding]] = {}

    def add(self, speaker_id: int, embedding: Embedding) -> None:
        entries = self._store.setdefault(int(speaker_id), [])
        entries.append(embedding)
        if len(entries) > self.bank_cap:
            del entries[:len(entries) - self.bank_cap]

    def get(self, speaker_id: int) -> list[Embedding]:
        return list(self._store.get(int(speaker_id), []))

    def speakers(self) -> list[int]:
        return sorted(self._store)

    def size(self, speaker_id: int) -> int:
        return len(self._store.get(int(speaker_id), []))


def init_model(arch: ModelArch, seed) -> ModelWeights:
    """Fan-in-scaled symmetric uniform init, deterministic per seed."""
    rng = np.random.default_rng(seed)
    sizes = arch.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return ModelWeights(arch=arch, weights=tuple(weights), biases=tuple(biases))


def _forward_batch(model: ModelWeights, x: np.ndarray):
    """Returns (layer activations incl. input, pre-relu values, logits)."""
    acts = [x]
    pres = []
    a = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        z = a @ w + b
        pres.append(z)
        a = np.maximum(z, 0.0)
        acts.append(a)
    logits = a @ model.weights[-1] + model.biases[-1]
    return acts, pres, logits


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def forward(model: ModelWeights, frame: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Single-frame pass: (pre-softmax embedding, class probabilities)."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != (model.arch.input_dim,):
        raise DimensionMismatch(
            f"frame shape {frame.shape}, expected ({model.arch.input_dim},)")
    _, _, logits = _forward_batch(model, frame[None, :])
    return logits[0], softmax(logits)[0]


def cross_entropy_loss(model: ModelWeights, frames: np.ndarray, labels: np.ndarray) -> float:
    frames, labels = _check_training_data(model, frames, labels)
    _, _, logits = _forward_batch(model, frames)
    # log-sum-exp form avoids under/overflow in the probabilities
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    log_probs = shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    return float(-np.mean(log_probs[np.arange(len(labels)), labels]))


def _check_training_data(model: ModelWeights, frames, labels):
    frames = np.asarray(frames, dtype=np.float64)
    labels = np.asarray(labels)
    if frames.ndim != 2 or frames.shape[1] != model.arch.input_dim:
        raise DimensionMismatch(f"frames shape {frames.shape}")
    if frames.shape[0] == 0:
        raise EmptyData("no training frames")
    if labels.shape != (frames.shape[0],):
        raise DimensionMismatch("labels must align with frames")
    if labels.min() < 0 or labels.max() >= model.arch.num_classes:
        raise LabelOutOfRange(
            f"labels must lie in [0, {model.arch.num_classes})")
    return frames, labels.astype(np.int64)


def gradients(model: ModelWeights, frames: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy gradients for every weight matrix and bias."""
    frames, labels = _check_training_data(model, frames, labels)
    n = frames.shape[0]
    acts, pres, logits = _forward_batch(model, frames)
    probs = softmax(logits)
    delta = probs
    delta[np.arange(n), labels] -= 1.0
    delta /= n

    grad_w = [np.empty(0)] * len(model.weights)
    grad_b = [np.empty(0)] * len(model.biases)
    for layer in range(len(model.weights) - 1, -1, -1):
        grad_w[layer] = acts[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * (pres[layer - 1] > 0.0)
    return grad_w, grad_b


def _adam_step(value, grad, m, v, step, lr):
    m[...] = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grad
    v[...] = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grad * grad
    m_hat = m / (1.0 - ADAM_BETA1 ** step)
    v_hat = v / (1.0 - ADAM_BETA2 ** step)
    return value - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def train_local(
    model: ModelWeights,
    frames: np.ndarray,
    labels: np.ndarray,
    opt: AdamState | None = None,
    lr: float = 1e-3,
    epochs: int = 1,
    batch_size: int | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[ModelWeights, AdamState]:
    """Adam on batched cross-entropy. Full-batch when batch_size is None.

    Batch order is shuffled only when an rng is supplied, so the default
    call is bit-reproducible.
    """
    frames, labels = _check_training_data(model, frames, labels)
    opt = opt or AdamState.for_model(model)
    n = frames.shape[0]
    if batch_size is None or batch_size >= n:
        batch_size = n

    new_w = [w.copy() for w in model.weights]
    new_b = [b.copy() for b in model.biases]
    work = model
    for _ in range(epochs):
        order = rng.permutation(n) if rng is not None else np.arange(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            work = ModelWeights(model.arch, tuple(new_w), tuple(new_b), model.version)
            grad_w, grad_b = gradients(work, frames[idx], labels[idx])
            opt.step += 1
            for i in range(len(new_w)):
                new_w[i] = _adam_step(new_w[i], grad_w[i], opt.m_w[i], opt.v_w[i],
                                      opt.step, lr)
                new_b[i] = _adam_step(new_b[i], grad_b[i], opt.m_b[i], opt.v_b[i],
                                      opt.step, lr)
    return model.bumped(new_w, new_b), opt


def evaluate(model: ModelWeights, frames: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """(mean cross-entropy, accuracy) on a labeled frame set."""
    frames, labels = _check_training_data(model, frames, labels)
    _, _, logits = _forward_batch(model, frames)
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    log_probs = shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    loss = float(-np.mean(log_probs[np.arange(len(labels)), labels]))
    acc = float(np.mean(np.argmax(logits, axis=1) == labels))
    return loss, acc


def embed_segment(model: ModelWeights, rows: np.ndarray, source: str = "") -> Embedding:
    """Mean pre-softmax output over a segment's frames."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[None, :]
    if rows.shape[0] == 0:
        raise EmptySegment("cannot embed an empty segment")
    if rows.shape[1] != model.arch.input_dim:
        raise DimensionMismatch(f"rows have dimension {rows.shape[1]}")
    _, _, logits = _forward_batch(model, rows)
    return Embedding(values=logits.mean(axis=0), source=source)


def _embedding_matrix(group) -> np.ndarray:
    vecs = [e.values if isinstance(e, Embedding) else np.asarray(e, dtype=np.float64)
            for e in group]
    if not vecs:
        raise EmptySet("similarity needs a non-empty embedding set")
    return np.vstack(vecs)


def cosine_similarity(td, cd) -> float:
    """Average pairwise cosine between two embedding sets (banked vs cluster)."""
    t = _embedding_matrix(td)
    c = _embedding_matrix(cd)
    if t.shape[1] != c.shape[1]:
        raise DimensionMismatch("embedding dimensions differ")
    t_norm = np.linalg.norm(t, axis=1)
    c_norm = np.linalg.norm(c, axis=1)
    if np.any(t_norm == 0.0) or np.any(c_norm == 0.0):
        raise ZeroNormEmbedding("zero-norm embedding has no direction")
    cosines = (t / t_norm[:, None]) @ (c / c_norm[:, None]).T
    return float(cosines.mean())


def predict_cluster(model: ModelWeights, rows: np.ndarray) -> tuple[int, float]:
    """Speaker id by frame-averaged softmax; ties resolve to the lowest id."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[None, :]
    if rows.shape[0] == 0:
        raise EmptyCluster("cannot predict an empty cluster")
    if rows.shape[1] != model.arch.input_dim:
        raise DimensionMismatch(f"rows have dimension {rows.shape[1]}")
    _, _, logits = _forward_batch(model, rows)
    mean_probs = softmax(logits).mean(axis=0)
    speaker = int(np.argmax(mean_probs))
    return speaker, float(mean_probs[speaker])


@dataclass(frozen=True)
class UpdateDecision:
    cluster_id: int
    speaker_id: int
    similarity: float
    updated: bool


def online_update(
    model: ModelWeights,
    segments: list[Segment],
    clusters: ClusterSet,
    bank: EmbeddingBank,
    tau: float = 0.5,
    lr: float = 1e-3,
    opt: AdamState | None = None,
) -> tuple[ModelWeights, list[UpdateDecision]]:
    """One gated self-training pass over a clustering of new audio.

    Per cluster: predict the speaker, compare the cluster's segment
    embeddings against that speaker's bank entries, and when the mean
    cosine clears tau run a single epoch on the cluster's frames under the
    predicted label and bank its embeddings. A cluster whose speaker has an
    empty bank scores nan and never opens the gate.
    """
    opt = opt or AdamState.for_model(model)
    decisions: list[UpdateDecision] = []
    for cid, member_ids in enumerate(clusters.clusters):
        rows = cluster_rows(segments, member_ids)
        speaker, _ = predict_cluster(model, rows)
        cluster_embeddings = [
            embed_segment(model, segments[i].rows, source=f"seg{i}")
            for i in member_ids
        ]
        banked = bank.get(speaker)
        similarity = cosine_similarity(banked, cluster_embeddings) if banked else float("nan")
        updated = bool(similarity >= tau)
        if updated:
            labels = np.full(rows.shape[0], speaker, dtype=np.int64)
            model, opt = train_local(model, rows, labels, opt=opt, lr=lr, epochs=1)
            for emb in cluster_embeddings:
                bank.add(speaker, emb)
        decisions.append(UpdateDecision(cluster_id=cid, speaker_id=speaker,
                                        similarity=similarity, updated=updated))
    return model, decisions


def save_checkpoint(path, model: ModelWeights) -> None:
    """Portable npz checkpoint; round-trips bit-exactly."""
    arch_json = json.dumps({
        "input_dim": model.arch.input_dim,
        "hidden_sizes": list(model.arch.hidden_sizes),
        "num_classes": model.arch.num_classes,
        "activation": model.arch.activation,
    })
    payload = {"arch": np.frombuffer(arch_json.encode(), dtype=np.uint8),
               "version": np.int64(model.version)}
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        payload[f"w{i}"] = w
        payload[f"b{i}"] = b
    np.savez(path, **payload)


def load_checkpoint(path) -> ModelWeights:
    with np.load(path) as data:
        arch_json = json.loads(bytes(data["arch"]).decode())
        arch = ModelArch(input_dim=int(arch_json["input_dim"]),
                         hidden_sizes=tuple(arch_json["hidden_sizes"]),
                         num_classes=int(arch_json["num_classes"]),
                         activation=arch_json["activation"])
        n_layers = len(arch.layer_sizes) - 1
        weights = tuple(data[f"w{i}"] for i in range(n_layers))
        biases = tuple(data[f"b{i}"] for i in range(n_layers))
        version = int(data["version"])
    return ModelWeights(arch=arch, weights=weights, biases=biases, version=version)
