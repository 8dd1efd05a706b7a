"""Help-query classifiers: training, prediction, evaluation, checkpoints.

Four architectures share one embedding front end:

    cnn       conv + pooled features, flattened into the softmax head
    lstm      a single forward LSTM over the token embeddings
    bilstm    forward and backward LSTMs, final states concatenated
    c-bilstm  conv + pooling feeding a bidirectional LSTM

Training is minibatch Adagrad on mean cross-entropy with early stopping on
validation F1. Checkpoints are a binary container: an 8-byte magic, a
length-prefixed JSON manifest, then raw little-endian float64 tensors in
manifest order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from . import nnet, textnorm
from .embeddings import EmbeddingTable, Vocabulary, build_vocab, query_vector, token_routing
from .textnorm import NormConfig, NormalizedQuery, normalize

__all__ = [
    "ModelKind",
    "LabeledQuery",
    "TrainConfig",
    "Classifier",
    "train",
    "evaluate",
    "precision_recall_f1",
    "save_model",
    "load_model",
    "CHECKPOINT_MAGIC",
]

CHECKPOINT_MAGIC = b"CBLSTM01"
CHECKPOINT_VERSION = 1

HELP_LABEL = "help"
NOT_HELP_LABEL = "not_help"
HELP_CLASS = 1  # softmax output index of the help class
N_CLASSES = 2


class ModelKind(str, Enum):
    CNN = "cnn"
    LSTM = "lstm"
    BILSTM = "bilstm"
    C_BILSTM = "c-bilstm"


@dataclass(frozen=True)
class LabeledQuery:
    """One dataset row: raw text plus its help/not-help label."""

    text: str
    label: str
    response_id: str | None = None
    skill: str | None = None
    help_kind: str | None = None

    def __post_init__(self) -> None:
        if self.label not in (HELP_LABEL, NOT_HELP_LABEL):
            raise ValueError(f"label must be {HELP_LABEL!r} or {NOT_HELP_LABEL!r}")
        if self.label == HELP_LABEL and not self.response_id:
            raise ValueError("help queries must carry a response_id")

    @property
    def is_help(self) -> bool:
        return self.label == HELP_LABEL


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters; defaults are desk scale, paper_scale() upsizes them."""

    maxlen: int = 15
    embed_dim: int = 32
    trigram_buckets: int = 4096
    min_count: int = 1
    filter_count: int = 16
    filter_len: int = 3
    pool_width: int = 2
    pool_stride: int = 2
    hidden: int = 16
    batch_size: int = 32
    lr: float = 0.001
    eps: float = 1e-8
    epochs: int = 30
    patience: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if min(self.maxlen, self.embed_dim, self.hidden, self.filter_count, self.filter_len) < 1:
            raise ValueError("model dimensions must all be >= 1")

    @classmethod
    def paper_scale(cls, **overrides) -> "TrainConfig":
        base = dict(embed_dim=300, filter_count=128, hidden=32, batch_size=1024)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


class Classifier:
    """A built (possibly trained) model of one of the four kinds."""

    def __init__(
        self,
        kind: ModelKind,
        cfg: TrainConfig,
        norm_cfg: NormConfig,
        vocab: Vocabulary,
        table: EmbeddingTable,
        conv: nnet.Conv1DLayer | None,
        lstm_fwd: nnet.LSTMCellParams | None,
        lstm_bwd: nnet.LSTMCellParams | None,
        dense: nnet.DenseLayer,
    ):
        self.kind = ModelKind(kind)
        self.cfg = cfg
        self.norm_cfg = norm_cfg
        self.vocab = vocab
        self.table = table
        self.conv = conv
        self.lstm_fwd = lstm_fwd
        self.lstm_bwd = lstm_bwd
        self.dense = dense
        self.best_epoch: int | None = None
        self.best_val_f1: float | None = None
        self._routing_cache: dict[str, tuple] = {}
        self._norm_cache: dict[str, tuple[str, ...]] = {}

    @classmethod
    def build(cls, kind: ModelKind, cfg: TrainConfig, norm_cfg: NormConfig, vocab: Vocabulary) -> "Classifier":
        kind = ModelKind(kind)
        if norm_cfg.maxlen != cfg.maxlen:
            raise ValueError("normalization maxlen must match the model maxlen")
        table = EmbeddingTable.init_random(len(vocab), cfg.embed_dim, cfg.trigram_buckets, cfg.seed)
        rng = np.random.default_rng([cfg.seed, 1])
        conv = lstm_fwd = lstm_bwd = None
        if kind in (ModelKind.CNN, ModelKind.C_BILSTM):
            conv = nnet.Conv1DLayer.create(
                cfg.embed_dim, cfg.filter_len, cfg.filter_count, cfg.pool_width, cfg.pool_stride, rng
            )
            steps = conv.out_steps(cfg.maxlen)
            if kind is ModelKind.CNN:
                dense_in = cfg.filter_count * steps
            else:
                lstm_fwd = nnet.LSTMCellParams.create(cfg.filter_count, cfg.hidden, rng)
                lstm_bwd = nnet.LSTMCellParams.create(cfg.filter_count, cfg.hidden, rng)
                dense_in = 2 * cfg.hidden
        elif kind is ModelKind.LSTM:
            lstm_fwd = nnet.LSTMCellParams.create(cfg.embed_dim, cfg.hidden, rng)
            dense_in = cfg.hidden
        else:  # BILSTM
            lstm_fwd = nnet.LSTMCellParams.create(cfg.embed_dim, cfg.hidden, rng)
            lstm_bwd = nnet.LSTMCellParams.create(cfg.embed_dim, cfg.hidden, rng)
            dense_in = 2 * cfg.hidden
        dense = nnet.DenseLayer.create(dense_in, N_CLASSES, rng)
        return cls(kind, cfg, norm_cfg, vocab, table, conv, lstm_fwd, lstm_bwd, dense)

    # -- parameter access ---------------------------------------------------

    def parameters(self) -> dict[str, np.ndarray]:
        """Live parameter tensors in a fixed, kind-specific order."""
        params: dict[str, np.ndarray] = {
            "embed.word": self.table.word_vectors,
            "embed.trigram": self.table.trigram_vectors,
        }
        if self.conv is not None:
            params["conv.filters"] = self.conv.filters
            params["conv.bias"] = self.conv.bias
        if self.lstm_fwd is not None:
            params["lstm_fwd.W"] = self.lstm_fwd.W
            params["lstm_fwd.U"] = self.lstm_fwd.U
            params["lstm_fwd.b"] = self.lstm_fwd.b
        if self.lstm_bwd is not None:
            params["lstm_bwd.W"] = self.lstm_bwd.W
            params["lstm_bwd.U"] = self.lstm_bwd.U
            params["lstm_bwd.b"] = self.lstm_bwd.b
        params["dense.W"] = self.dense.W
        params["dense.b"] = self.dense.b
        return params

    def _zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(arr) for name, arr in self.parameters().items()}

    # -- embedding front end ------------------------------------------------

    def _routing(self, token: str) -> tuple:
        route = self._routing_cache.get(token)
        if route is None:
            route = token_routing(token, self.vocab, self.table.buckets)
            self._routing_cache[token] = route
        return route

    def query_matrix(self, tokens: tuple[str, ...]) -> tuple[np.ndarray, list[tuple]]:
        routing = [self._routing(t) for t in tokens]
        Q = np.empty((self.cfg.embed_dim, len(tokens)), dtype=np.float64)
        word = self.table.word_vectors
        tri = self.table.trigram_vectors
        for j, (mode, ref) in enumerate(routing):
            if mode == "word":
                Q[:, j] = word[ref]
            else:
                Q[:, j] = tri[np.asarray(ref, dtype=np.intp)].mean(axis=0)
        return Q, routing

    def _scatter_embedding_grad(self, dQ: np.ndarray, routing: list[tuple], grads: dict[str, np.ndarray]) -> None:
        gw = grads["embed.word"]
        gt = grads["embed.trigram"]
        for j, (mode, ref) in enumerate(routing):
            if mode == "word":
                gw[ref] += dQ[:, j]
            else:
                share = dQ[:, j] / len(ref)
                for bucket in ref:
                    gt[bucket] += share
    # -- forward / backward -------------------------------------------------

    def forward_with_cache(self, tokens: tuple[str, ...]) -> tuple[np.ndarray, tuple]:
        Q, routing = self.query_matrix(tokens)
        if self.kind is ModelKind.CNN:
            pooled, conv_cache = nnet.conv1d_forward(Q, self.conv)
            feat = pooled.reshape(-1)
            probs, dense_cache = nnet.dense_softmax(feat, self.dense)
            mid = (conv_cache, pooled.shape)
        elif self.kind is ModelKind.C_BILSTM:
            pooled, conv_cache = nnet.conv1d_forward(Q, self.conv)
            vec, bi_cache = nnet.bilstm_forward(pooled, self.lstm_fwd, self.lstm_bwd)
            probs, dense_cache = nnet.dense_softmax(vec, self.dense)
            mid = (conv_cache, bi_cache)
        elif self.kind is ModelKind.LSTM:
            h, caches = nnet.run_lstm(Q, self.lstm_fwd)
            probs, dense_cache = nnet.dense_softmax(h, self.dense)
            mid = (caches,)
        else:  # BILSTM
            vec, bi_cache = nnet.bilstm_forward(Q, self.lstm_fwd, self.lstm_bwd)
            probs, dense_cache = nnet.dense_softmax(vec, self.dense)
            mid = (bi_cache,)
        return probs, (routing, mid, dense_cache)

    def backward_from_cache(self, cache: tuple, label: int, dloss: float = 1.0) -> dict[str, np.ndarray]:
        grads = self._zero_grads()
        self._backward_into(cache, label, dloss, grads)
        return grads

    def _backward_into(self, cache: tuple, label: int, dloss: float, grads: dict[str, np.ndarray]) -> None:
        routing, mid, dense_cache = cache
        dfeat, dense_grads = nnet.dense_softmax_ce_backward(dense_cache, label, self.dense, dloss)
        grads["dense.W"] += dense_grads["W"]
        grads["dense.b"] += dense_grads["b"]
        if self.kind is ModelKind.CNN:
            conv_cache, pooled_shape = mid
            dpooled = dfeat.reshape(pooled_shape)
            dQ, conv_grads = nnet.conv1d_backward(dpooled, conv_cache, self.conv)
            grads["conv.filters"] += conv_grads["filters"]
            grads["conv.bias"] += conv_grads["bias"]
        elif self.kind is ModelKind.C_BILSTM:
            conv_cache, bi_cache = mid
            dpooled, gf, gb = nnet.bilstm_backward(dfeat, bi_cache, self.lstm_fwd, self.lstm_bwd)
            for name, g in gf.items():
                grads[f"lstm_fwd.{name}"] += g
            for name, g in gb.items():
                grads[f"lstm_bwd.{name}"] += g
            dQ, conv_grads = nnet.conv1d_backward(dpooled, conv_cache, self.conv)
            grads["conv.filters"] += conv_grads["filters"]
            grads["conv.bias"] += conv_grads["bias"]
        elif self.kind is ModelKind.LSTM:
            (caches,) = mid
            dQ, lstm_grads = nnet.run_lstm_backward(dfeat, caches, self.lstm_fwd)
            for name, g in lstm_grads.items():
                grads[f"lstm_fwd.{name}"] += g
        else:  # BILSTM
            (bi_cache,) = mid
            dQ, gf, gb = nnet.bilstm_backward(dfeat, bi_cache, self.lstm_fwd, self.lstm_bwd)
            for name, g in gf.items():
                grads[f"lstm_fwd.{name}"] += g
            for name, g in gb.items():
                grads[f"lstm_bwd.{name}"] += g
        self._scatter_embedding_grad(dQ, routing, grads)

    # -- batch loss ----------------------------------------------------------

    def loss(self, batch: list[tuple[tuple[str, ...], int]]) -> float:
        total = 0.0
        for tokens, label in batch:
            probs, _ = self.forward_with_cache(tokens)
            total += nnet.cross_entropy(probs, label)
        return total / len(batch)

    def loss_and_grads(self, batch: list[tuple[tuple[str, ...], int]]) -> tuple[float, dict[str, np.ndarray]]:
        grads = self._zero_grads()
        total = 0.0
        dloss = 1.0 / len(batch)
        for tokens, label in batch:
            probs, cache = self.forward_with_cache(tokens)
            total += nnet.cross_entropy(probs, label)
            self._backward_into(cache, label, dloss, grads)
        return total / len(batch), grads

    # -- inference ------------------------------------------------------------

    def tokens_for(self, raw: str) -> tuple[str, ...]:
        tokens = self._norm_cache.get(raw)
        if tokens is None:
            tokens = normalize(raw, self.norm_cfg).tokens
            self._norm_cache[raw] = tokens
        return tokens

    def predict_tokens(self, tokens: tuple[str, ...]) -> float:
        probs, _ = self.forward_with_cache(tokens)
        return float(probs[HELP_CLASS])

    def predict(self, raw: str) -> float:
        """Probability that the query asks for help; threshold at 0.5."""
        return self.predict_tokens(self.tokens_for(raw))

    def sentence_vector(self, raw: str) -> np.ndarray:
        """Unit-length mean-pooled embedding of the normalized query."""
        nq = NormalizedQuery(tokens=self.tokens_for(raw), original=raw)
        return query_vector(nq, self.vocab, self.table)

    def invalidate_caches(self) -> None:
        self._routing_cache.clear()
        self._norm_cache.clear()


def precision_recall_f1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def evaluate(model: Classifier, samples: list[LabeledQuery]) -> tuple[float, float, float]:
    """Precision, recall, F1 of the help class at the 0.5 decision threshold."""
    tp = fp = fn = 0
    for sample in samples:
        predicted_help = model.predict(sample.text) >= 0.5
        if predicted_help and sample.is_help:
            tp += 1
        elif predicted_help and not sample.is_help:
            fp += 1
        elif not predicted_help and sample.is_help:
            fn += 1
    return precision_recall_f1(tp, fp, fn)


def train(
    train_set: list[LabeledQuery],
    val_set: list[LabeledQuery],
    kind: ModelKind,
    cfg: TrainConfig,
    norm_cfg: NormConfig | None = None,
) -> tuple[Classifier, list[dict]]:
    """Minibatch Adagrad with early stopping on validation F1.

    Returns the model restored to its best-validation-F1 epoch, plus the
    per-epoch history. Fully deterministic for a fixed cfg.seed.
    """
    if not train_set or not val_set:
        raise ValueError("train and validation sets must be non-empty")
    labels = {s.label for s in train_set}
    if labels != {HELP_LABEL, NOT_HELP_LABEL}:
        raise ValueError("degenerate labels: training set must contain both classes")
    if norm_cfg is None:
        norm_cfg = textnorm.default_config(maxlen=cfg.maxlen)
    corpus = [normalize(s.text, norm_cfg) for s in train_set]
    vocab = build_vocab(corpus, min_count=cfg.min_count)
    model = Classifier.build(kind, cfg, norm_cfg, vocab)

    encoded = [
        (nq.tokens, HELP_CLASS if s.is_help else 1 - HELP_CLASS)
        for nq, s in zip(corpus, train_set)
    ]
    params = model.parameters()
    state = nnet.AdagradState(params, lr=cfg.lr, eps=cfg.eps)
    rng = np.random.default_rng([cfg.seed, 2])

    history: list[dict] = []
    best_f1 = -1.0
    best_epoch = -1
    best_snapshot: dict[str, np.ndarray] | None = None
    stall = 0
    n = len(encoded)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = [encoded[i] for i in order[start : start + cfg.batch_size]]
            loss, grads = model.loss_and_grads(batch)
            epoch_loss += loss * len(batch)
            nnet.adagrad_update(params, grads, state)
        precision, recall, f1 = evaluate(model, val_set)
        history.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss / n,
                "val_precision": precision,
                "val_recall": recall,
                "val_f1": f1,
            }
        )
        if f1 > best_f1:
            best_f1 = f1
            best_epoch = epoch
            best_snapshot = {name: arr.copy() for name, arr in params.items()}
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                break
    if best_snapshot is not None:
        for name, arr in params.items():
            np.copyto(arr, best_snapshot[name])
    model.best_epoch = best_epoch
    model.best_val_f1 = best_f1
    return model, history


# ---------------------------------------------------------------------------
# checkpoint serialization


def _norm_cfg_to_dict(norm_cfg: NormConfig) -> dict:
    return {
        "slang_map": [list(pair) for pair in norm_cfg.slang_map],
        "stopwords": sorted(norm_cfg.stopwords),
        "genre_lexicon": list(norm_cfg.genre_lexicon),
        "timestamp_patterns": list(norm_cfg.timestamp_patterns),
        "lemma_rules": [list(rule) for rule in norm_cfg.lemma_rules],
        "maxlen": norm_cfg.maxlen,
        "unk_token": norm_cfg.unk_token,
        "time_token": norm_cfg.time_token,
        "genre_token": norm_cfg.genre_token,
    }


def _norm_cfg_from_dict(data: dict) -> NormConfig:
    return NormConfig(
        slang_map=tuple((p, r) for p, r in data["slang_map"]),
        stopwords=frozenset(data["stopwords"]),
        genre_lexicon=tuple(data["genre_lexicon"]),
        timestamp_patterns=tuple(data["timestamp_patterns"]),
        lemma_rules=tuple((s, r, int(m)) for s, r, m in data["lemma_rules"]),
        maxlen=int(data["maxlen"]),
        unk_token=data["unk_token"],
        time_token=data["time_token"],
        genre_token=data["genre_token"],
    )


def save_model(model: Classifier, path: str) -> None:
    params = model.parameters()
    manifest = {
        "version": CHECKPOINT_VERSION,
        "kind": model.kind.value,
        "train_config": model.cfg.to_dict(),
        "norm_config": _norm_cfg_to_dict(model.norm_cfg),
        "vocab": list(model.vocab.tokens),
        "reserved": list(model.vocab.reserved),
        "best_epoch": model.best_epoch,
        "best_val_f1": model.best_val_f1,
        "tensors": [{"name": name, "shape": list(arr.shape)} for name, arr in params.items()],
    }
    blob = json.dumps(manifest).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for arr in params.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise ValueError(f"truncated checkpoint: while reading {what}")
    return data


def load_model(path: str) -> Classifier:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"bad checkpoint magic: expected {CHECKPOINT_MAGIC!r}, found {magic!r}")
        (manifest_len,) = struct.unpack("<Q", _read_exact(fh, 8, "manifest length"))
        manifest = json.loads(_read_exact(fh, manifest_len, "manifest"))
        if manifest.get("version") != CHECKPOINT_VERSION:
            raise ValueError(
                f"unsupported checkpoint version: expected {CHECKPOINT_VERSION}, found {manifest.get('version')}"
            )
        tensors: dict[str, np.ndarray] = {}
        for spec in manifest["tensors"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = _read_exact(fh, count * 8, f"tensor {spec['name']}")
            tensors[spec["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()

    kind = ModelKind(manifest["kind"])
    cfg = TrainConfig.from_dict(manifest["train_config"])
    norm_cfg = _norm_cfg_from_dict(manifest["norm_config"])
    vocab = Vocabulary(tokens=tuple(manifest["vocab"]), reserved=tuple(manifest["reserved"]))
    table = EmbeddingTable(
        word_vectors=tensors["embed.word"], trigram_vectors=tensors["embed.trigram"], seed=cfg.seed
    )
    conv = lstm_fwd = lstm_bwd = None
    if "conv.filters" in tensors:
        conv = nnet.Conv1DLayer(
            filters=tensors["conv.filters"],
            bias=tensors["conv.bias"],
            pool_width=cfg.pool_width,
            pool_stride=cfg.pool_stride,
        )
    if "lstm_fwd.W" in tensors:
        lstm_fwd = nnet.LSTMCellParams(W=tensors["lstm_fwd.W"], U=tensors["lstm_fwd.U"], b=tensors["lstm_fwd.b"])
    if "lstm_bwd.W" in tensors:
        lstm_bwd = nnet.LSTMCellParams(W=tensors["lstm_bwd.W"], U=tensors["lstm_bwd.U"], b=tensors["lstm_bwd.b"])
    dense = nnet.DenseLayer(W=tensors["dense.W"], b=tensors["dense.b"])
    model = Classifier(kind, cfg, norm_cfg, vocab, table, conv, lstm_fwd, lstm_bwd, dense)
    model.best_epoch = manifest.get("best_epoch")
    model.best_val_f1 = manifest.get("best_val_f1")
    return model
