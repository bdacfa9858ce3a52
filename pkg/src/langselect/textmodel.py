"""Hashed character n-gram logistic regression with two-phase adaptation.

The learner runs in two phases mirroring adaptive pretraining at desk
scale: an unsupervised ``pretrain`` phase that estimates document
frequencies over an adaptation corpus (the statistics analog of
language-/task-adaptive pretraining; no masked-LM objective, no
transformer), followed by supervised ``fine_tune`` of a multinomial
logistic regression over hashed character n-gram features weighted by
those statistics. Everything is deterministic given (data, config, seed).
"""
from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import LABELS, Dataset, Example
from .errors import TextModelError

logger = logging.getLogger(__name__)

CLASS_ORDER = LABELS
_CLASS_INDEX = {label: i for i, label in enumerate(CLASS_ORDER)}

# Start/end sentinels so n-grams see token boundaries.
_BOUND_START = "\x02"
_BOUND_END = "\x03"

_FNV64_OFFSET = 0xCBF29CE484222325
_FNV64_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


@lru_cache(maxsize=1 << 20)
def hash_gram(gram: str) -> int:
    """FNV-1a 64-bit hash of a gram's UTF-8 bytes; fixed across runs."""
    h = _FNV64_OFFSET
    for b in gram.encode("utf-8"):
        h = ((h ^ b) * _FNV64_PRIME) & _U64
    return h


@dataclass(frozen=True)
class LearnerConfig:
    """Hyperparameters of the hashed n-gram learner.

    ``hash_buckets`` must be a power of two so hashing reduces with a
    mask. ``batch_size`` 32 matches the usual fine-tuning setup; the
    learning rate is scaled for this desk-scale model and decays by
    ``lr_decay`` per epoch.
    """

    ngram_min: int = 1
    ngram_max: int = 5
    hash_buckets: int = 1 << 18
    l2_lambda: float = 1e-4
    learning_rate: float = 0.1
    lr_decay: float = 0.9
    batch_size: int = 32
    epochs: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if not (1 <= self.ngram_min <= self.ngram_max <= 8):
            raise TextModelError(f"require 1 <= ngram_min <= ngram_max <= 8, got [{self.ngram_min}, {self.ngram_max}]")
        if self.hash_buckets < 2 or self.hash_buckets & (self.hash_buckets - 1):
            raise TextModelError(f"hash_buckets must be a power of two, got {self.hash_buckets}")
        if self.epochs < 1 or self.batch_size < 1:
            raise TextModelError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0 or not 0 < self.lr_decay <= 1 or self.l2_lambda < 0:
            raise TextModelError("invalid optimizer settings")


@dataclass(frozen=True)
class AdaptationStats:
    """Output of the unsupervised adaptation phase.

    ``document_frequency`` maps feature buckets to the number of corpus
    documents containing them; treat instances as immutable.
    """

    document_frequency: dict[int, int]
    num_documents: int
    source_tag: str

    def __post_init__(self) -> None:
        if self.num_documents < 1:
            raise TextModelError("AdaptationStats requires num_documents >= 1")
        for bucket, count in self.document_frequency.items():
            if not 1 <= count <= self.num_documents:
                raise TextModelError(
                    f"document frequency {count} for bucket {bucket} outside [1, {self.num_documents}]"
                )

    @classmethod
    def uniform(cls, tag: str = "none") -> "AdaptationStats":
        """Stats carrying no corpus information: every gram gets the same idf."""
        return cls(document_frequency={}, num_documents=1, source_tag=tag)

    def merged(self, other: "AdaptationStats", tag: str | None = None) -> "AdaptationStats":
        """Pool two adaptation corpora by summing document frequencies."""
        df = dict(self.document_frequency)
        for bucket, count in other.document_frequency.items():
            df[bucket] = df.get(bucket, 0) + count
        return AdaptationStats(
            document_frequency=df,
            num_documents=self.num_documents + other.num_documents,
            source_tag=tag or f"{self.source_tag}+{other.source_tag}",
        )


@dataclass(frozen=True)
class SparseVector:
    """L2-normalized sparse feature vector with strictly increasing indices."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(self.indices) != len(self.values):
            raise TextModelError("indices and values must have equal length")


@dataclass
class Model:
    """A trained classifier: weight matrix (3 x hash_buckets), bias, and
    the adaptation stats / config needed to featurize new text."""

    weights: np.ndarray
    bias: np.ndarray
    stats: AdaptationStats
    config: LearnerConfig
    loss_history: tuple[float, ...] = ()


def _gram_counts(text: str, config: LearnerConfig) -> dict[int, int]:
    """Term frequencies per hash bucket for all n-grams of a text."""
    counts: dict[int, int] = {}
    if not text:
        return counts
    padded = _BOUND_START + text + _BOUND_END
    mask = config.hash_buckets - 1
    length = len(padded)
    for n in range(config.ngram_min, config.ngram_max + 1):
        for i in range(length - n + 1):
            bucket = hash_gram(padded[i : i + n]) & mask
            counts[bucket] = counts.get(bucket, 0) + 1
    return counts


def _idf(stats: AdaptationStats, bucket: int) -> float:
    df = stats.document_frequency.get(bucket, 0)
    return math.log((1 + stats.num_documents) / (1 + df)) + 1.0


def featurize(text: str, stats: AdaptationStats, config: LearnerConfig) -> SparseVector:
    """Map a normalized text to an L2-normalized tf-idf bucket vector.

    Values are (1 + ln tf) * idf with idf = ln((1+N)/(1+df)) + 1 against
    the adaptation statistics; unseen buckets use df = 0. Empty text maps
    to the zero vector.
    """
    counts = _gram_counts(text, config)
    if not counts:
        return SparseVector(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64))
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array(
        [(1.0 + math.log(counts[b])) * _idf(stats, b) for b in indices], dtype=np.float64
    )
    norm = math.sqrt(float(values @ values))
    if norm > 0:
        values /= norm
    return SparseVector(indices, values)


def design_matrix(
    texts: Sequence[str], stats: AdaptationStats, config: LearnerConfig
) -> sp.csr_matrix:
    """Stack featurized texts into a CSR matrix (rows in input order)."""
    indptr = np.zeros(len(texts) + 1, dtype=np.int64)
    index_parts: list[np.ndarray] = []
    value_parts: list[np.ndarray] = []
    for row, text in enumerate(texts):
        vec = featurize(text, stats, config)
        index_parts.append(vec.indices)
        value_parts.append(vec.values)
        indptr[row + 1] = indptr[row] + len(vec.indices)
    indices = np.concatenate(index_parts) if index_parts else np.empty(0, dtype=np.int64)
    values = np.concatenate(value_parts) if value_parts else np.empty(0, dtype=np.float64)
    return sp.csr_matrix((values, indices, indptr), shape=(len(texts), config.hash_buckets))


def _as_datasets(data: Dataset | Iterable[Dataset]) -> list[Dataset]:
    return [data] if isinstance(data, Dataset) else list(data)


def pretrain(
    corpus: Dataset | Iterable[Dataset], tag: str, config: LearnerConfig
) -> AdaptationStats:
    """Estimate document frequencies from an unlabeled adaptation corpus.

    Each document contributes 1 to the frequency of every bucket it
    contains, so the result does not depend on document order. Labeled
    examples are rejected: labels must never reach the adaptation phase.
    """
    df: dict[int, int] = {}
    num_documents = 0
    for ds in _as_datasets(corpus):
        for ex in ds:
            if ex.label is not None:
                raise TextModelError(
                    f"adaptation corpus must be unlabeled, found labeled example {ex.id!r}; strip labels first"
                )
            buckets = _gram_counts(ex.text, config)
            if not buckets:
                continue
            num_documents += 1
            for bucket in buckets:
                df[bucket] = df.get(bucket, 0) + 1
    if num_documents == 0:
        raise TextModelError("adaptation corpus empty")
    return AdaptationStats(document_frequency=df, num_documents=num_documents, source_tag=tag)


def _shuffled_indices(n: int, rng: random.Random) -> list[int]:
    # Fisher-Yates driven only by rng.random(), the one generator method
    # with a cross-version stability guarantee.
    idx = list(range(n))
    for i in range(n - 1, 0, -1):
        j = min(int(rng.random() * (i + 1)), i)
        idx[i], idx[j] = idx[j], idx[i]
    return idx


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _labels_to_indices(examples: Sequence[Example]) -> np.ndarray:
    out = np.empty(len(examples), dtype=np.int64)
    for i, ex in enumerate(examples):
        if ex.label is None:
            raise TextModelError(f"fine-tuning requires labeled examples, {ex.id!r} has no label")
        out[i] = _CLASS_INDEX[ex.label]
    return out


def fine_tune(
    stats: AdaptationStats,
    train: Dataset | Iterable[Dataset],
    config: LearnerConfig,
) -> Model:
    """Train the classifier by mini-batch gradient descent.

    Minimizes mean cross-entropy + (l2_lambda/2) * ||W||^2. Example order
    is reshuffled every epoch by a generator seeded from ``config.seed``;
    the ridge term is applied as a proximal (implicit) step so training
    stays stable for arbitrarily large l2_lambda. Per-epoch losses are
    recorded on the returned model.
    """
    examples: list[Example] = []
    for ds in _as_datasets(train):
        examples.extend(ds.examples)
    if not examples:
        raise TextModelError("fine_tune: no training examples")
    y = _labels_to_indices(examples)
    present = {CLASS_ORDER[i] for i in set(y.tolist())}
    if len(present) < 3:
        logger.warning("training set covers only %s; model degenerates on absent classes", sorted(present))

    X = design_matrix([ex.text for ex in examples], stats, config)
    n = X.shape[0]
    weights = np.zeros((3, config.hash_buckets), dtype=np.float64)
    bias = np.zeros(3, dtype=np.float64)
    rng = random.Random(config.seed)
    lr = config.learning_rate
    history: list[float] = []

    for _ in range(config.epochs):
        order = _shuffled_indices(n, rng)
        ce_sum = 0.0
        for start in range(0, n, config.batch_size):
            chunk = order[start : start + config.batch_size]
            xb = X[chunk]
            yb = y[chunk]
            probs = _softmax(xb @ weights.T + bias)
            with np.errstate(divide="ignore"):
                batch_ce = -float(np.log(probs[np.arange(len(chunk)), yb]).sum())
            if not math.isfinite(batch_ce):
                raise TextModelError("divergence: reduce learning_rate")
            ce_sum += batch_ce
            dz = probs
            dz[np.arange(len(chunk)), yb] -= 1.0
            dz /= len(chunk)
            grad_w = (xb.T @ dz).T
            weights = (weights - lr * grad_w) / (1.0 + lr * config.l2_lambda)
            bias = bias - lr * dz.sum(axis=0)
        epoch_loss = ce_sum / n + 0.5 * config.l2_lambda * float((weights * weights).sum())
        if not math.isfinite(epoch_loss):
            raise TextModelError("divergence: reduce learning_rate")
        history.append(epoch_loss)
        lr *= config.lr_decay

    if not np.isfinite(weights).all() or not np.isfinite(bias).all():
        raise TextModelError("divergence: reduce learning_rate")
    return Model(weights=weights, bias=bias, stats=stats, config=config, loss_history=tuple(history))


def predict_texts(model: Model, texts: Sequence[str]) -> list[tuple[str, tuple[float, float, float]]]:
    """Predict labels and class probabilities for a batch of texts."""
    X = design_matrix(texts, model.stats, model.config)
    probs = _softmax(X @ model.weights.T + model.bias)
    out = []
    for row in probs:
        # argmax returns the first maximum, which honors the fixed class
        # order (negative < neutral < positive) on exact ties.
        label = CLASS_ORDER[int(np.argmax(row))]
        out.append((label, (float(row[0]), float(row[1]), float(row[2]))))
    return out


def predict(model: Model, text: str) -> tuple[str, tuple[float, float, float]]:
    """Predict a single text; see ``predict_texts``."""
    return predict_texts(model, [text])[0]


def loss_and_gradient(
    model: Model, batch: Sequence[Example]
) -> tuple[float, np.ndarray, np.ndarray]:
    """Exact objective value and gradient on a batch.

    Returns (loss, grad_weights, grad_bias) for mean cross-entropy plus
    (l2_lambda/2) * ||W||^2; the bias is unregularized.
    """
    if not batch:
        raise TextModelError("loss_and_gradient: empty batch")
    y = _labels_to_indices(batch)
    X = design_matrix([ex.text for ex in batch], model.stats, model.config)
    n = len(batch)
    probs = _softmax(X @ model.weights.T + model.bias)
    with np.errstate(divide="ignore"):
        ce = -float(np.log(probs[np.arange(n), y]).mean())
    loss = ce + 0.5 * model.config.l2_lambda * float((model.weights * model.weights).sum())
    dz = probs
    dz[np.arange(n), y] -= 1.0
    dz /= n
    grad_w = (X.T @ dz).T + model.config.l2_lambda * model.weights
    grad_b = dz.sum(axis=0)
    return loss, grad_w, grad_b


def save_model(model: Model, path: str | Path) -> None:
    """Serialize a model to an .npz container; loading reproduces
    bit-identical predictions."""
    df_items = sorted(model.stats.document_frequency.items())
    meta = {
        "config": {
            "ngram_min": model.config.ngram_min,
            "ngram_max": model.config.ngram_max,
            "hash_buckets": model.config.hash_buckets,
            "l2_lambda": model.config.l2_lambda,
            "learning_rate": model.config.learning_rate,
            "lr_decay": model.config.lr_decay,
            "batch_size": model.config.batch_size,
            "epochs": model.config.epochs,
            "seed": model.config.seed,
        },
        "stats": {"num_documents": model.stats.num_documents, "source_tag": model.stats.source_tag},
        "loss_history": list(model.loss_history),
    }
    np.savez_compressed(
        Path(path),
        weights=model.weights,
        bias=model.bias,
        df_buckets=np.array([b for b, _ in df_items], dtype=np.int64),
        df_counts=np.array([c for _, c in df_items], dtype=np.int64),
        meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8),
    )


def load_model(path: str | Path) -> Model:
    """Load a model saved by ``save_model``."""
    path = Path(path)
    if not path.exists():
        raise TextModelError(f"model file not found: {path}")
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        config = LearnerConfig(**meta["config"])
        stats = AdaptationStats(
            document_frequency={
                int(b): int(c) for b, c in zip(data["df_buckets"], data["df_counts"])
            },
            num_documents=int(meta["stats"]["num_documents"]),
            source_tag=str(meta["stats"]["source_tag"]),
        )
        return Model(
            weights=data["weights"].copy(),
            bias=data["bias"].copy(),
            stats=stats,
            config=config,
            loss_history=tuple(meta["loss_history"]),
        )


def config_with_seed(config: LearnerConfig, seed: int) -> LearnerConfig:
    """Copy of a config with the training seed replaced."""
    return replace(config, seed=seed)
