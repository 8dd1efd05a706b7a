"""Token vocabulary and embeddings, with letter-trigram hashing for unseen words.

In-vocabulary tokens index a trainable embedding row. Out-of-vocabulary
tokens are decomposed into letter trigrams of "#token#"; each trigram is
hashed into a fixed bucket table and the token's vector is the mean of its
bucket rows. Misspellings therefore land near their correctly spelled
neighbours instead of on a single catch-all vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .textnorm import NormalizedQuery

__all__ = [
    "Vocabulary",
    "EmbeddingTable",
    "build_vocab",
    "letter_trigrams",
    "trigram_hash",
    "token_routing",
    "embed_token",
    "embed_query",
    "query_vector",
]

DEFAULT_RESERVED = ("unk", "time_stamp", "music_genre")

# 64-bit FNV-1a constants; the hash below is the reference implementation
# that any independent re-derivation must reproduce.
_FNV64_OFFSET = 0xCBF29CE484222325
_FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def trigram_hash(trigram: str, buckets: int) -> int:
    """64-bit FNV-1a over the trigram's UTF-8 bytes, folded modulo buckets.

    h starts at the FNV offset basis; for each byte, h ^= byte then
    h = (h * FNV prime) mod 2**64; the result is h mod buckets.
    """
    if buckets < 1:
        raise ValueError("buckets must be >= 1")
    h = _FNV64_OFFSET
    for byte in trigram.encode("utf-8"):
        h ^= byte
        h = (h * _FNV64_PRIME) & _MASK64
    return h % buckets


def letter_trigrams(token: str) -> list[str]:
    """All consecutive 3-grams of '#token#'; empty input yields no trigrams."""
    if not token:
        return []
    framed = f"#{token}#"
    return [framed[i : i + 3] for i in range(len(framed) - 2)]


@dataclass(frozen=True)
class Vocabulary:
    """Dense token ids; reserved tokens always occupy the first ids."""

    tokens: tuple[str, ...]
    reserved: tuple[str, ...] = DEFAULT_RESERVED
    token_to_id: dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.token_to_id:
            object.__setattr__(self, "token_to_id", {t: i for i, t in enumerate(self.tokens)})
        if len(self.token_to_id) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        for i, tok in enumerate(self.reserved):
            if self.tokens[i] != tok:
                raise ValueError("reserved tokens must occupy the first ids in order")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def unk_id(self) -> int:
        return 0

    @property
    def unk_token(self) -> str:
        return self.reserved[0]

    def id_of(self, token: str) -> int | None:
        return self.token_to_id.get(token)


def build_vocab(
    corpus: list[NormalizedQuery],
    min_count: int = 1,
    reserved: tuple[str, ...] = DEFAULT_RESERVED,
) -> Vocabulary:
    """Tokens with frequency >= min_count, ids in first-appearance order.

    Reserved tokens are always present and always first, so the mapping is
    deterministic given the corpus order.
    """
    if not corpus:
        raise ValueError("empty corpus")
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: dict[str, int] = {}
    order: list[str] = []
    reserved_set = set(reserved)
    for query in corpus:
        for token in query.tokens:
            if token in reserved_set:
                continue
            if token not in counts:
                counts[token] = 0
                order.append(token)
            counts[token] += 1
    kept = [t for t in order if counts[t] >= min_count]
    return Vocabulary(tokens=tuple(reserved) + tuple(kept), reserved=reserved)


@dataclass
class EmbeddingTable:
    """Trainable word rows plus hashed trigram bucket rows."""

    word_vectors: np.ndarray
    trigram_vectors: np.ndarray
    seed: int

    @property
    def dim(self) -> int:
        return int(self.word_vectors.shape[1])

    @property
    def buckets(self) -> int:
        return int(self.trigram_vectors.shape[0])

    @classmethod
    def init_random(cls, vocab_size: int, dim: int, buckets: int = 4096, seed: int = 0) -> "EmbeddingTable":
        if vocab_size < 1 or dim < 1 or buckets < 1:
            raise ValueError("vocab_size, dim, and buckets must all be >= 1")
        rng = np.random.default_rng(seed)
        word = rng.uniform(-0.05, 0.05, size=(vocab_size, dim))
        tri = rng.uniform(-0.05, 0.05, size=(buckets, dim))
        return cls(word_vectors=word, trigram_vectors=tri, seed=seed)


def token_routing(token: str, vocab: Vocabulary, buckets: int) -> tuple[str, int] | tuple[str, tuple[int, ...]]:
    """How a token reads the table: ('word', row) or ('trigrams', bucket ids).

    The routing is what gradient updates follow: an OOV token's gradient is
    split equally over its trigram bucket rows.
    """
    row = vocab.id_of(token)
    if row is not None:
        return ("word", row)
    trigrams = letter_trigrams(token)
    if not trigrams:
        return ("word", vocab.unk_id)
    return ("trigrams", tuple(trigram_hash(t, buckets) for t in trigrams))


def embed_token(token: str, vocab: Vocabulary, table: EmbeddingTable) -> np.ndarray:
    kind, ref = token_routing(token, vocab, table.buckets)
    if kind == "word":
        return table.word_vectors[ref].copy()
    rows = table.trigram_vectors[np.asarray(ref, dtype=np.intp)]
    return rows.mean(axis=0)


def embed_query(query: NormalizedQuery, vocab: Vocabulary, table: EmbeddingTable) -> np.ndarray:
    """Column-stacked token embeddings: shape (dim, maxlen)."""
    out = np.empty((table.dim, len(query.tokens)), dtype=np.float64)
    for j, token in enumerate(query.tokens):
        out[:, j] = embed_token(token, vocab, table)
    return out


def query_vector(query: NormalizedQuery, vocab: Vocabulary, table: EmbeddingTable) -> np.ndarray:
    """Mean of the non-padding token embeddings, scaled to unit length.

    All-padding queries fall back to the padding token's own vector; an
    exactly zero mean falls back to the first basis vector so the result is
    always usable in cosine comparisons.
    """
    tokens = query.content(vocab.unk_token)
    if not tokens:
        vec = table.word_vectors[vocab.unk_id].copy()
    else:
        vec = np.zeros(table.dim, dtype=np.float64)
        for token in tokens:
            vec += embed_token(token, vocab, table)
        vec /= len(tokens)
    norm = float(np.linalg.norm(vec))
    if norm < 1e-12:
        vec = np.zeros(table.dim, dtype=np.float64)
        vec[0] = 1.0
        return vec
    return vec / norm
