"""Linear bag-of-hashed-n-grams text classifier with negative sampling.

One embedding row per hash bucket; a sample's hidden state is the mean of
its feature rows; label scores are dot products against an output matrix.
Training optimizes a binary logistic loss on the true label against labels
drawn from a smoothed label-frequency^0.75 distribution (sampling with
replacement, redrawing collisions with the true label).  Prediction always
applies a full softmax so top-k probabilities are calibrated.

Matrices are float32; dot products and update arithmetic accumulate in
float64.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import textprep
from .dataset import LabeledSample

MAGIC = b"GLID"
FORMAT_VERSION = 1
_CONFIG_STRUCT = struct.Struct("<IQIIIdIQ")
_PREDICT_CHUNK = 64      # samples per gather; keeps gathered rows in cache
_OUTER_CHUNK = 8192      # samples per featurization pass; bounds memory


class EmptyInput(ValueError):
    """A sample produced no features (empty after tokenization)."""


class ModelFormatError(Exception):
    """Base class for model file problems."""


class BadMagic(ModelFormatError):
    pass


class BadVersion(ModelFormatError):
    pass


class TruncatedFile(ModelFormatError):
    pass


class ChecksumMismatch(ModelFormatError):
    pass


class DimensionMismatch(ModelFormatError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 100
    num_buckets: int = textprep.DEFAULT_NUM_BUCKETS
    max_ngram: int = textprep.DEFAULT_MAX_NGRAM
    neg_samples: int = 100
    epochs: int = 5
    lr: float = 0.1
    min_count: int = 1
    seed: int = 1

    def __post_init__(self):
        for name in ("dim", "num_buckets", "max_ngram", "neg_samples",
                     "epochs", "min_count"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


class Model:
    """Trained or initialized classifier: labels plus the two matrices."""

    __slots__ = ("config", "labels", "label_index", "input_matrix",
                 "output_matrix")

    def __init__(self, config: ModelConfig, labels: Sequence[str],
                 input_matrix: np.ndarray, output_matrix: np.ndarray):
        labels = tuple(labels)
        if len(set(labels)) != len(labels):
            raise ValueError("labels must be unique")
        if list(labels) != sorted(labels):
            raise ValueError("labels must be sorted")
        if input_matrix.shape != (config.num_buckets, config.dim):
            raise DimensionMismatch(
                f"input matrix {input_matrix.shape} != "
                f"({config.num_buckets}, {config.dim})")
        if output_matrix.shape != (len(labels), config.dim):
            raise DimensionMismatch(
                f"output matrix {output_matrix.shape} != "
                f"({len(labels)}, {config.dim})")
        self.config = config
        self.labels = labels
        self.label_index = {l: i for i, l in enumerate(labels)}
        self.input_matrix = input_matrix
        self.output_matrix = output_matrix

    def equals(self, other: "Model") -> bool:
        return (self.config == other.config and self.labels == other.labels
                and np.array_equal(self.input_matrix, other.input_matrix)
                and np.array_equal(self.output_matrix, other.output_matrix))


def zero_model(config: ModelConfig, labels: Sequence[str]) -> Model:
    """All-zero model: predicts the uniform distribution over its labels."""
    labels = sorted(set(labels))
    return Model(config, labels,
                 np.zeros((config.num_buckets, config.dim), dtype=np.float32),
                 np.zeros((len(labels), config.dim), dtype=np.float32))


def embed(model: Model, feature_ids) -> np.ndarray:
    """Hidden state: mean of the input rows for a feature multiset."""
    ids = np.asarray(feature_ids, dtype=np.int64)
    if ids.size == 0:
        raise EmptyInput("cannot embed an empty feature vector")
    return model.input_matrix[ids].mean(axis=0, dtype=np.float64)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softplus(x) -> np.ndarray:
    return np.logaddexp(0.0, x)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _row_gradients(hidden: np.ndarray, out_rows: np.ndarray,
                   multiplicities: np.ndarray) -> tuple[float, np.ndarray]:
    """Loss and per-row score gradients for one example.

    ``out_rows[0]`` is the true label's output row; the rest are the
    distinct sampled negatives with their draw counts in
    ``multiplicities[1:]``.  Returns ``(loss, g)`` with ``g[i] = dL/ds_i``
    aggregated over draws; the caller applies ``-lr * outer(g, hidden)`` to
    the rows and ``-lr * out_rows.T @ g`` through the hidden state.
    """
    s = out_rows @ hidden
    sig = _sigmoid(s)
    g = sig * multiplicities
    g[0] = sig[0] - 1.0
    loss = float(_softplus(-s[0]) + (multiplicities[1:] * _softplus(s[1:])).sum())
    return loss, g


def negative_sampling_loss(input_matrix: np.ndarray, output_matrix: np.ndarray,
                           feature_ids, label_idx: int, negatives) -> float:
    """Loss of one example for a fixed negative multiset (reference form)."""
    ids = np.asarray(feature_ids, dtype=np.int64)
    if ids.size == 0:
        raise EmptyInput("empty feature vector")
    h = input_matrix[ids].mean(axis=0, dtype=np.float64)
    negs = np.asarray(negatives, dtype=np.int64)
    uniq, counts = np.unique(negs, return_counts=True)
    idx = np.concatenate(([label_idx], uniq))
    mult = np.concatenate(([1.0], counts.astype(np.float64)))
    loss, _ = _row_gradients(h, output_matrix[idx].astype(np.float64), mult)
    return loss


def negative_sampling_grads(input_matrix: np.ndarray, output_matrix: np.ndarray,
                            feature_ids, label_idx: int, negatives
                            ) -> tuple[np.ndarray, np.ndarray]:
    """Dense gradients of :func:`negative_sampling_loss` w.r.t. both matrices."""
    ids = np.asarray(feature_ids, dtype=np.int64)
    if ids.size == 0:
        raise EmptyInput("empty feature vector")
    h = input_matrix[ids].mean(axis=0, dtype=np.float64)
    negs = np.asarray(negatives, dtype=np.int64)
    uniq, counts = np.unique(negs, return_counts=True)
    idx = np.concatenate(([label_idx], uniq))
    mult = np.concatenate(([1.0], counts.astype(np.float64)))
    rows = output_matrix[idx].astype(np.float64)
    _, g = _row_gradients(h, rows, mult)
    grad_out = np.zeros(output_matrix.shape, dtype=np.float64)
    np.add.at(grad_out, idx, np.outer(g, h))
    grad_h = rows.T @ g
    grad_in = np.zeros(input_matrix.shape, dtype=np.float64)
    np.add.at(grad_in, ids, grad_h / ids.size)
    return grad_in, grad_out


def _feature_bags(texts: list[str], cfg: ModelConfig
                  ) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-sample (unique ids, multiplicities), extracted in batches."""
    bags: list[tuple[np.ndarray, np.ndarray]] = []
    for start in range(0, len(texts), 4096):
        chunk = texts[start:start + 4096]
        ids, offsets = textprep.batch_feature_ids(chunk, cfg.max_ngram,
                                                  cfg.num_buckets)
        for i in range(len(chunk)):
            sample_ids = ids[offsets[i]:offsets[i + 1]]
            uniq, counts = np.unique(sample_ids, return_counts=True)
            bags.append((uniq, counts.astype(np.float64)))
    return bags


def _apply_min_count(bags, min_count: int) -> None:
    if min_count <= 1:
        return
    all_ids = np.concatenate([u for u, _ in bags]) if bags else np.empty(0, np.int64)
    all_counts = np.concatenate([c for _, c in bags]) if bags else np.empty(0)
    uniq, inv = np.unique(all_ids, return_inverse=True)
    totals = np.zeros(len(uniq))
    np.add.at(totals, inv, all_counts)
    rare = set(uniq[totals < min_count].tolist())
    if not rare:
        return
    for i, (u, c) in enumerate(bags):
        keep = np.array([x not in rare for x in u.tolist()], dtype=bool)
        bags[i] = (u[keep], c[keep])


def train(train_set: Iterable[LabeledSample],
          dev_set: Iterable[LabeledSample] | None,
          cfg: ModelConfig,
          label_set: Iterable[str],
          on_epoch: Callable[[int, float, float | None], None] | None = None
          ) -> Model:
    """Train a model whose label head is exactly ``label_set``.

    Labels without training samples are still drawn as negatives (one
    pseudo-count in the sampling table), so they learn to rank below the
    observed labels rather than sitting at their zero init.  Deterministic
    for a fixed seed: epoch shuffling, initialization and negative draws
    all flow from ``cfg.seed``.  The learning rate decays linearly to zero
    over ``epochs * len(train_set)`` examples.
    ``on_epoch(epoch, mean_loss, dev_accuracy)`` is called after each pass.
    """
    labels = sorted(set(label_set))
    if not labels:
        raise ValueError("label_set is empty")
    train_list = list(train_set)
    if not train_list:
        raise ValueError("training set is empty")
    label_index = {l: i for i, l in enumerate(labels)}
    unknown = sorted({s.label for s in train_list} - set(labels))
    if unknown:
        raise ValueError(f"labels outside label_set: {', '.join(unknown)}")

    bags = _feature_bags([s.text for s in train_list], cfg)
    _apply_min_count(bags, cfg.min_count)
    y = np.array([label_index[s.label] for s in train_list], dtype=np.int64)
    usable = [i for i in range(len(train_list)) if bags[i][0].size > 0]
    if not usable:
        raise ValueError("no training sample produced any features")

    # smoothed label-frequency^0.75 table: labels with no samples keep one
    # pseudo-count, so admissible-but-unobserved labels still get drawn as
    # negatives and learn to be rejected instead of sitting at init where
    # they would outrank half-trained labels
    freq = np.bincount(y[usable], minlength=len(labels)).astype(np.float64)
    neg_prob = (freq + 1.0) ** 0.75
    neg_prob /= neg_prob.sum()
    neg_cum = np.cumsum(neg_prob)

    rng = np.random.default_rng(cfg.seed)
    dim = cfg.dim
    input_matrix = rng.uniform(-1.0 / dim, 1.0 / dim,
                               size=(cfg.num_buckets, dim)).astype(np.float32)
    output_matrix = np.zeros((len(labels), dim), dtype=np.float32)
    model = Model(cfg, labels, input_matrix, output_matrix)

    dev_list = list(dev_set) if dev_set else []
    order = np.array(usable, dtype=np.int64)
    total_steps = cfg.epochs * len(order)
    step = 0
    n_labels = len(labels)
    for epoch in range(cfg.epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        for i in order:
            lr = cfg.lr * (1.0 - step / total_steps)
            step += 1
            uniq, counts = bags[i]
            total = counts.sum()
            rows_in = input_matrix[uniq]
            h = (rows_in * counts[:, None]).sum(axis=0, dtype=np.float64) / total

            yi = int(y[i])
            if n_labels > 1:
                draws = np.minimum(
                    neg_cum.searchsorted(rng.random(cfg.neg_samples),
                                         side="right"),
                    n_labels - 1)
                coll = draws == yi
                while coll.any():
                    draws[coll] = np.minimum(
                        neg_cum.searchsorted(rng.random(int(coll.sum())),
                                             side="right"),
                        n_labels - 1)
                    coll = draws == yi
                uniq_negs, neg_counts = np.unique(draws, return_counts=True)
                idx = np.concatenate(([yi], uniq_negs))
                mult = np.concatenate(([1.0], neg_counts.astype(np.float64)))
            else:
                idx = np.array([yi], dtype=np.int64)
                mult = np.array([1.0])

            rows_out = output_matrix[idx].astype(np.float64)
            loss, g = _row_gradients(h, rows_out, mult)
            epoch_loss += loss
            grad_h = rows_out.T @ g
            output_matrix[idx] = (rows_out - lr * np.outer(g, h)).astype(np.float32)
            input_matrix[uniq] = (
                rows_in.astype(np.float64)
                - (lr / total) * counts[:, None] * grad_h[None, :]
            ).astype(np.float32)

        mean_loss = epoch_loss / len(order)
        dev_acc = _dev_accuracy(model, dev_list) if dev_list else None
        if on_epoch is not None:
            on_epoch(epoch + 1, mean_loss, dev_acc)

    return model


def _dev_accuracy(model: Model, dev: list[LabeledSample]) -> float:
    hits = 0
    n = 0
    for start in range(0, len(dev), 1024):
        chunk = dev[start:start + 1024]
        preds = predict_batch(model, [s.text for s in chunk], k=1,
                              skip_empty=True)
        for s, p in zip(chunk, preds):
            if p is None:
                continue
            n += 1
            hits += p[0][0] == s.label
    return hits / n if n else 0.0


def predict(model: Model, sample: str, k: int = 1) -> list[tuple[str, float]]:
    """Top-k (label, prob) for one cleaned sample, full softmax."""
    return predict_batch(model, [sample], k=k)[0]


def predict_batch(model: Model, samples: list[str], k: int = 1,
                  allowed_labels: set[str] | None = None,
                  skip_empty: bool = False
                  ) -> list[list[tuple[str, float]] | None]:
    """Vectorized prediction over cleaned samples.

    ``allowed_labels`` renormalizes the softmax over a label subset (used
    by the flag-controlled restricted-baseline scoring).  Samples that
    yield no features raise EmptyInput unless ``skip_empty`` is set, in
    which case their slot is ``None``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    mask = None
    if allowed_labels is not None:
        mask = np.array([l not in allowed_labels for l in model.labels])
        if mask.all():
            raise ValueError("allowed_labels excludes every model label")
    out_f64 = model.output_matrix.astype(np.float64)
    results: list[list[tuple[str, float]] | None] = []
    for start in range(0, len(samples), _OUTER_CHUNK):
        part = samples[start:start + _OUTER_CHUNK]
        try:
            results.extend(_predict_chunk(model, part, k, out_f64, mask,
                                          skip_empty))
        except EmptyInput as e:
            raise EmptyInput(f"sample {start + int(str(e))} has no "
                             f"features") from None
    return results


def _predict_chunk(model: Model, samples: list[str], k: int,
                   out_f64: np.ndarray, mask, skip_empty: bool
                   ) -> list[list[tuple[str, float]] | None]:
    cfg = model.config
    ids, offsets = textprep.batch_feature_ids(samples, cfg.max_ngram,
                                              cfg.num_buckets)
    counts = np.diff(offsets)
    empties = np.flatnonzero(counts == 0)
    if empties.size and not skip_empty:
        raise EmptyInput(str(int(empties[0])))
    nonempty = np.flatnonzero(counts > 0)
    results: list[list[tuple[str, float]] | None] = [None] * len(samples)
    if nonempty.size == 0:
        return results

    # gathers are chunked so the gathered rows stay cache-resident
    hidden = np.empty((nonempty.size, cfg.dim), dtype=np.float64)
    ne_offsets = offsets[nonempty]
    ne_counts = counts[nonempty]
    for s in range(0, nonempty.size, _PREDICT_CHUNK):
        e = min(s + _PREDICT_CHUNK, nonempty.size)
        lo = int(ne_offsets[s])
        hi = int(ne_offsets[e - 1] + ne_counts[e - 1])
        rows = model.input_matrix[ids[lo:hi]]
        sums = np.add.reduceat(rows, ne_offsets[s:e] - lo, axis=0)
        hidden[s:e] = sums.astype(np.float64) / ne_counts[s:e, None]

    logits = hidden @ out_f64.T
    if mask is not None:
        logits[:, mask] = -np.inf
    probs = softmax(logits)
    top = min(k, len(model.labels))
    if top == 1:
        best = np.argmax(probs, axis=1)
        for row, sample_idx in enumerate(nonempty):
            j = int(best[row])
            results[int(sample_idx)] = [(model.labels[j],
                                         float(probs[row, j]))]
        return results
    order = np.argsort(-probs, axis=1, kind="stable")[:, :top]
    for row, sample_idx in enumerate(nonempty):
        results[int(sample_idx)] = [(model.labels[j], float(probs[row, j]))
                                    for j in order[row]]
    return results


def save_model(model: Model, path) -> None:
    """Write the little-endian binary format with a trailing payload CRC32."""
    cfg = model.config
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    parts.append(_CONFIG_STRUCT.pack(cfg.dim, cfg.num_buckets, cfg.max_ngram,
                                     cfg.neg_samples, cfg.epochs, cfg.lr,
                                     cfg.min_count, cfg.seed))
    parts.append(struct.pack("<I", len(model.labels)))
    for label in model.labels:
        raw = label.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    parts.append(np.ascontiguousarray(model.input_matrix,
                                      dtype="<f4").tobytes())
    parts.append(np.ascontiguousarray(model.output_matrix,
                                      dtype="<f4").tobytes())
    crc = 0
    for p in parts:
        crc = zlib.crc32(p, crc)
    with open(path, "wb") as fh:
        for p in parts:
            fh.write(p)
        fh.write(struct.pack("<I", crc & 0xFFFFFFFF))


def _parse_header(buf: bytes, path) -> tuple[ModelConfig, list[str], int]:
    """Returns (config, labels, offset of the input matrix)."""
    if len(buf) < 8:
        raise TruncatedFile(f"{path}: too short for a header")
    if buf[:4] != MAGIC:
        raise BadMagic(f"{path}: bad magic {buf[:4]!r}")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != FORMAT_VERSION:
        raise BadVersion(f"{path}: unsupported format version {version}")
    off = 8
    try:
        fields = _CONFIG_STRUCT.unpack_from(buf, off)
        off += _CONFIG_STRUCT.size
        (n_labels,) = struct.unpack_from("<I", buf, off)
        off += 4
        labels = []
        for _ in range(n_labels):
            (n,) = struct.unpack_from("<H", buf, off)
            off += 2
            if off + n > len(buf):
                raise TruncatedFile(f"{path}: truncated label table")
            labels.append(buf[off:off + n].decode("utf-8"))
            off += n
    except struct.error as e:
        raise TruncatedFile(f"{path}: truncated header ({e})") from None
    cfg = ModelConfig(dim=fields[0], num_buckets=fields[1], max_ngram=fields[2],
                      neg_samples=fields[3], epochs=fields[4], lr=fields[5],
                      min_count=fields[6], seed=fields[7])
    return cfg, labels, off


def read_model_labels(path) -> tuple[ModelConfig, list[str]]:
    """Read config and label table without loading matrices or checking CRC."""
    with open(path, "rb") as fh:
        head = fh.read(1 << 20)
    cfg, labels, _ = _parse_header(head, path)
    return cfg, labels


def load_model(path) -> Model:
    buf = Path(path).read_bytes()
    cfg, labels, off = _parse_header(buf, path)
    if len(buf) < off + 4:
        raise TruncatedFile(f"{path}: missing checksum")
    (stored_crc,) = struct.unpack_from("<I", buf, len(buf) - 4)
    actual_crc = zlib.crc32(buf[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise ChecksumMismatch(
            f"{path}: crc {actual_crc:#010x} != stored {stored_crc:#010x}")
    in_bytes = cfg.num_buckets * cfg.dim * 4
    out_bytes = len(labels) * cfg.dim * 4
    if len(buf) - 4 - off != in_bytes + out_bytes:
        raise DimensionMismatch(
            f"{path}: payload holds {len(buf) - 4 - off} matrix bytes, "
            f"config implies {in_bytes + out_bytes}")
    input_matrix = np.frombuffer(buf, dtype="<f4", count=cfg.num_buckets * cfg.dim,
                                 offset=off).reshape(cfg.num_buckets, cfg.dim)
    output_matrix = np.frombuffer(buf, dtype="<f4", count=len(labels) * cfg.dim,
                                  offset=off + in_bytes).reshape(len(labels),
                                                                 cfg.dim)
    return Model(cfg, labels, input_matrix, output_matrix)
