"""Nearest-neighbour retrieval of cached help queries.

Unit-length query vectors are held in a median-split KD-tree whose leaves
bucket point ids. Because every vector is unit length, cosine similarity
and squared euclidean distance are interchangeable: cos = 1 - d2 / 2, so
the tree searches euclidean space while callers reason in cosine terms.

Search is best-first over subtree lower bounds. With no budget it keeps
popping until the bound proves no better point exists, which makes it
equivalent to full backtracking (and to a brute-force scan). With a leaf
budget it scans the most promising leaves first and returns the best found.
"""

from __future__ import annotations

import heapq
import json
import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "IndexedQuery",
    "ResponseEntry",
    "MatchResult",
    "QueryIndex",
    "build_index",
    "knn",
    "decide_response",
    "fetch_response",
    "save_index",
    "load_index",
    "INDEX_MAGIC",
]

INDEX_MAGIC = b"HLPIDX01"
INDEX_VERSION = 1
DEFAULT_LEAF_SIZE = 16
UNIT_NORM_TOL = 1e-6


@dataclass(frozen=True)
class ResponseEntry:
    response_id: str
    response_text: str


@dataclass(frozen=True)
class IndexedQuery:
    query_text: str
    vector: np.ndarray
    response_id: str


@dataclass(frozen=True)
class MatchResult:
    """Outcome of one lookup; response is None below threshold or on ties."""

    matched_query: str | None
    similarity: float
    response: ResponseEntry | None
    neighbors: list[tuple[str, float, str]] = field(default_factory=list)


class _Leaf:
    __slots__ = ("ids",)

    def __init__(self, ids: np.ndarray):
        self.ids = ids


class _Split:
    __slots__ = ("dim", "value", "left", "right")

    def __init__(self, dim: int, value: float, left, right):
        self.dim = dim
        self.value = value
        self.left = left
        self.right = right


def _check_unit(vec: np.ndarray) -> None:
    if abs(float(np.linalg.norm(vec)) - 1.0) > UNIT_NORM_TOL:
        raise ValueError("vector not normalized")


class QueryIndex:
    """Immutable collection of indexed queries plus the search tree."""

    def __init__(self, entries: list[IndexedQuery], leaf_size: int = DEFAULT_LEAF_SIZE):
        if leaf_size < 1:
            raise ValueError("leaf_size must be >= 1")
        self.entries = list(entries)
        self.leaf_size = leaf_size
        if self.entries:
            dims = {e.vector.shape for e in self.entries}
            if len(dims) != 1 or len(next(iter(dims))) != 1:
                raise ValueError("dimension mismatch among indexed vectors")
            self.vectors = np.stack([e.vector for e in self.entries]).astype(np.float64)
            norms = np.linalg.norm(self.vectors, axis=1)
            if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
                raise ValueError("vector not normalized")
            self.dim = int(self.vectors.shape[1])
            self.root = self._build(np.arange(len(self.entries), dtype=np.intp))
        else:
            self.vectors = np.zeros((0, 0))
            self.dim = 0
            self.root = None

    def __len__(self) -> int:
        return len(self.entries)

    def _build(self, ids: np.ndarray):
        if ids.size <= self.leaf_size:
            return _Leaf(ids)
        pts = self.vectors[ids]
        spreads = pts.max(axis=0) - pts.min(axis=0)
        dim = int(np.argmax(spreads))  # widest dimension; ties pick the lowest
        order = np.lexsort((ids, pts[:, dim]))  # ties broken by input index
        ids_sorted = ids[order]
        mid = ids.size // 2
        value = float(self.vectors[ids_sorted[mid], dim])
        return _Split(dim, value, self._build(ids_sorted[:mid]), self._build(ids_sorted[mid:]))

    @property
    def n_leaves(self) -> int:
        def count(node) -> int:
            if isinstance(node, _Leaf):
                return 1
            return count(node.left) + count(node.right)

        return count(self.root) if self.root is not None else 0

    def depth(self) -> int:
        def walk(node) -> int:
            if isinstance(node, _Leaf):
                return 1
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root) if self.root is not None else 0

    def knn(
        self,
        query: np.ndarray,
        k: int = 1,
        mode: str = "exact",
        budget: int | None = None,
    ) -> list[tuple[float, IndexedQuery]]:
        """k nearest entries by cosine similarity, descending.

        mode 'exact' performs full backtracking; mode 'approx' scans at most
        `budget` leaves in best-first order. Ties are broken by insertion
        index, so results are deterministic.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if mode not in ("exact", "approx"):
            raise ValueError(f"unknown search mode {mode!r}")
        if mode == "approx":
            if budget is None or budget < 1:
                raise ValueError("approx mode requires a positive leaf budget")
        else:
            budget = None
        if not self.entries:
            return []
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (self.dim,):
            raise ValueError("dimension mismatch between query and index")
        _check_unit(query)

        best: list[tuple[float, int]] = []  # max-heap via (-d2, -id)
        counter = 0
        queue: list[tuple[float, int, object, np.ndarray]] = [(0.0, counter, self.root, np.zeros(self.dim))]
        scanned = 0
        while queue:
            lb2, _, node, side = heapq.heappop(queue)
            if len(best) == k and lb2 > -best[0][0]:
                break
            while isinstance(node, _Split):
                delta = float(query[node.dim]) - node.value
                if delta < 0:
                    near, far, offset = node.left, node.right, -delta
                else:
                    near, far, offset = node.right, node.left, delta
                new_offset = max(offset, float(side[node.dim]))
                far_lb2 = lb2 - side[node.dim] ** 2 + new_offset**2
                if len(best) < k or far_lb2 <= -best[0][0]:
                    far_side = side.copy()
                    far_side[node.dim] = new_offset
                    counter += 1
                    heapq.heappush(queue, (far_lb2, counter, far, far_side))
                node = near
            ids = node.ids
            diffs = self.vectors[ids] - query
            dists = np.einsum("nd,nd->n", diffs, diffs)
            for d2, idx in zip(dists, ids):
                item = (-float(d2), -int(idx))
                if len(best) < k:
                    heapq.heappush(best, item)
                elif item > best[0]:
                    heapq.heapreplace(best, item)
            scanned += 1
            if budget is not None and scanned >= budget:
                break
        ordered = sorted(((-d2, -idx) for d2, idx in best))
        return [(1.0 - d2 / 2.0, self.entries[idx]) for d2, idx in ordered]


def build_index(entries: list[IndexedQuery], leaf_size: int = DEFAULT_LEAF_SIZE) -> QueryIndex:
    """Entries may be empty; an empty index answers every query with no match."""
    return QueryIndex(entries, leaf_size=leaf_size)


def knn(
    index: QueryIndex,
    query: np.ndarray,
    k: int = 1,
    mode: str = "exact",
    budget: int | None = None,
) -> list[tuple[float, IndexedQuery]]:
    return index.knn(query, k=k, mode=mode, budget=budget)


def decide_response(
    found: list[tuple[float, IndexedQuery]], threshold: float
) -> str | None:
    """Response id to answer with, or None.

    The closest neighbour must clear the similarity threshold and, for k > 1,
    its response must hold a strict plurality among the k neighbours; any tie
    means no answer.
    """
    if not found:
        return None
    top_sim, top_entry = found[0]
    if top_sim < threshold:
        return None
    counts: dict[str, int] = {}
    for _, entry in found:
        counts[entry.response_id] = counts.get(entry.response_id, 0) + 1
    top_count = counts[top_entry.response_id]
    if any(c >= top_count for rid, c in counts.items() if rid != top_entry.response_id):
        return None
    return top_entry.response_id


def fetch_response(
    index: QueryIndex,
    responses: dict[str, str],
    raw: str,
    encoder: Callable[[str], np.ndarray],
    threshold: float = 0.75,
    k: int = 1,
    mode: str = "exact",
    budget: int | None = None,
) -> MatchResult:
    """Answer with the closest cached query's response, if it is confident.

    Confidence is decide_response's rule. Never raises for an unanswerable
    query: below-threshold or tied lookups return a result with response None.
    """
    vector = encoder(raw)
    found = index.knn(vector, k=k, mode=mode, budget=budget)
    if not found:
        return MatchResult(matched_query=None, similarity=-1.0, response=None, neighbors=[])
    neighbors = [(e.query_text, float(sim), e.response_id) for sim, e in found]
    top_sim, top_entry = found[0]
    response = None
    rid = decide_response(found, threshold)
    if rid is not None:
        text = responses.get(rid)
        if text is None:
            raise ValueError(f"unknown response id {rid!r}")
        response = ResponseEntry(response_id=rid, response_text=text)
    return MatchResult(
        matched_query=top_entry.query_text,
        similarity=float(top_sim),
        response=response,
        neighbors=neighbors,
    )


# ---------------------------------------------------------------------------
# serialization


def save_index(index: QueryIndex, responses: dict[str, str], path: str) -> None:
    for entry in index.entries:
        if entry.response_id not in responses:
            raise ValueError(f"unknown response id {entry.response_id!r}")
    manifest = {
        "version": INDEX_VERSION,
        "dim": index.dim,
        "count": len(index.entries),
        "leaf_size": index.leaf_size,
        "responses": dict(responses),
    }
    blob = json.dumps(manifest).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for entry in index.entries:
            text = entry.query_text.encode("utf-8")
            rid = entry.response_id.encode("utf-8")
            fh.write(struct.pack("<I", len(text)))
            fh.write(text)
            fh.write(struct.pack("<I", len(rid)))
            fh.write(rid)
            fh.write(np.ascontiguousarray(entry.vector, dtype="<f8").tobytes())


def _read_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise ValueError(f"truncated index: while reading {what}")
    return data


def load_index(path: str) -> tuple[QueryIndex, dict[str, str]]:
    """Read entries back and rebuild the tree; entries are the source of truth."""
    with open(path, "rb") as fh:
        magic = fh.read(len(INDEX_MAGIC))
        if magic != INDEX_MAGIC:
            raise ValueError(f"bad index magic: expected {INDEX_MAGIC!r}, found {magic!r}")
        (manifest_len,) = struct.unpack("<Q", _read_exact(fh, 8, "manifest length"))
        manifest = json.loads(_read_exact(fh, manifest_len, "manifest"))
        if manifest.get("version") != INDEX_VERSION:
            raise ValueError(
                f"unsupported index version: expected {INDEX_VERSION}, found {manifest.get('version')}"
            )
        dim = int(manifest["dim"])
        count = int(manifest["count"])
        entries = []
        for i in range(count):
            (text_len,) = struct.unpack("<I", _read_exact(fh, 4, f"entry {i} text length"))
            text = _read_exact(fh, text_len, f"entry {i} text").decode("utf-8")
            (rid_len,) = struct.unpack("<I", _read_exact(fh, 4, f"entry {i} response id length"))
            rid = _read_exact(fh, rid_len, f"entry {i} response id").decode("utf-8")
            raw = _read_exact(fh, dim * 8, f"entry {i} vector")
            vector = np.frombuffer(raw, dtype="<f8").copy()
            entries.append(IndexedQuery(query_text=text, vector=vector, response_id=rid))
    index = QueryIndex(entries, leaf_size=int(manifest["leaf_size"]))
    return index, dict(manifest["responses"])
