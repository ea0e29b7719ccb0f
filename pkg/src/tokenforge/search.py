"""Suffix-array search over the concatenated token stream.

The indexed stream is the document concatenation in storage order, i.e. the
raw .bin payload; matches may straddle document boundaries unless filtered
with ``within_document``. Suffixes compare by raw token value with no
sentinel: running off the end of the stream sorts lowest, so a shorter
suffix precedes any longer suffix it prefixes.

Construction is numpy prefix-doubling (O(N log N) sorts); queries are
binary searches over the position array. Every query revalidates the
dataset version the index was built against.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyQuery, IoFailure, NoContinuationAnywhere, StaleIndex
from .format import Dataset
from .rng import SplitMix64, weighted_pick

SA_MAGIC = b"TFSA1"


def build_suffix_positions(stream: np.ndarray) -> np.ndarray:
    """Sort all suffix start offsets lexicographically (prefix doubling)."""
    n = len(stream)
    if n == 0:
        return np.empty(0, dtype=np.int64)
    rank = np.unique(stream, return_inverse=True)[1].astype(np.int64)
    k = 1
    while True:
        second = np.full(n, -1, dtype=np.int64)
        second[: n - k] = rank[k:]
        sa = np.lexsort((second, rank))
        r1, r2 = rank[sa], second[sa]
        head = np.empty(n, dtype=np.int64)
        head[0] = 0
        head[1:] = (r1[1:] != r1[:-1]) | (r2[1:] != r2[:-1])
        new = np.cumsum(head)
        if new[-1] == n - 1:
            return sa.astype(np.int64)
        rank = np.empty(n, dtype=np.int64)
        rank[sa] = new
        k *= 2


@dataclass
class NextTokenDistribution:
    query: list[int]
    continuations: dict[int, int]
    total: int

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "continuations": {str(t): c for t, c in self.continuations.items()},
            "total": self.total,
        }


class SuffixArrayIndex:
    """Sorted suffix positions over a dataset's token stream, version-stamped."""

    def __init__(self, dataset: Dataset, positions: np.ndarray, dataset_version: int):
        self.dataset = dataset
        self.positions = positions
        self.dataset_version = dataset_version
        self.total_tokens = len(positions)
        self._unigram: NextTokenDistribution | None = None

    def _check_fresh(self) -> None:
        current = self.dataset.version
        if current != self.dataset_version:
            raise StaleIndex(
                f"index built against dataset version {self.dataset_version}, "
                f"dataset is now at {current}"
            )

    def _query_array(self, query) -> np.ndarray:
        q = np.asarray(query, dtype=np.int64)
        if q.ndim != 1 or q.size == 0:
            raise EmptyQuery("query must be a non-empty token array")
        return q

    def _compare_at(self, pos: int, q: np.ndarray) -> int:
        """Order of suffix(pos) vs q: -1 below, 0 when q prefixes it, 1 above."""
        stream = self.dataset.store.array
        n = self.total_tokens
        window = stream[pos : min(pos + q.size, n)]
        mismatch = np.nonzero(window != q[: window.size])[0]
        if mismatch.size:
            i = int(mismatch[0])
            return -1 if int(window[i]) < int(q[i]) else 1
        return -1 if window.size < q.size else 0

    def _range(self, q: np.ndarray) -> tuple[int, int]:
        """Half-open run of suffix-array slots whose suffixes start with q."""
        lo, hi = 0, len(self.positions)
        while lo < hi:
            mid = (lo + hi) // 2
            if self._compare_at(int(self.positions[mid]), q) < 0:
                lo = mid + 1
            else:
                hi = mid
        start = lo
        hi = len(self.positions)
        while lo < hi:
            mid = (lo + hi) // 2
            if self._compare_at(int(self.positions[mid]), q) <= 0:
                lo = mid + 1
            else:
                hi = mid
        return start, lo

    def _match_offsets(self, q: np.ndarray, within_document: bool) -> np.ndarray:
        lo, hi = self._range(q)
        offsets = np.sort(self.positions[lo:hi])
        if within_document and offsets.size:
            starts = self.dataset.doc_token_starts
            docs = np.searchsorted(starts, offsets, side="right") - 1
            offsets = offsets[offsets + q.size <= starts[docs + 1]]
        return offsets

    def count(self, query, within_document: bool = False) -> int:
        self._check_fresh()
        q = self._query_array(query)
        if not within_document:
            lo, hi = self._range(q)
            return hi - lo
        return int(self._match_offsets(q, True).size)

    def contains(self, query, within_document: bool = False) -> bool:
        return self.count(query, within_document) > 0

    def positions_of(
        self, query, limit: int | None = None, resolve: bool = False,
        within_document: bool = False,
    ) -> list[dict]:
        """Ascending global offsets of every match, at most limit entries."""
        self._check_fresh()
        q = self._query_array(query)
        offsets = self._match_offsets(q, within_document)
        if limit is not None:
            offsets = offsets[:limit]
        if not resolve:
            return [{"offset": int(p)} for p in offsets]
        starts = self.dataset.doc_token_starts
        out = []
        for p in offsets:
            doc = int(np.searchsorted(starts, p, side="right")) - 1
            out.append(
                {
                    "offset": int(p),
                    "document_id": doc,
                    "offset_in_document": int(p - starts[doc]),
                }
            )
        return out

    def next_token_distribution(self, query) -> NextTokenDistribution:
        self._check_fresh()
        q = self._query_array(query)
        lo, hi = self._range(q)
        run = self.positions[lo:hi]
        run = run[run + q.size < self.total_tokens]
        cont = self.dataset.store.array[run + q.size]
        values, counts = np.unique(cont, return_counts=True)
        return NextTokenDistribution(
            query=[int(t) for t in q],
            continuations={int(v): int(c) for v, c in zip(values, counts)},
            total=int(run.size),
        )

    def _unigram_distribution(self) -> NextTokenDistribution:
        if self._unigram is None:
            values, counts = np.unique(self.dataset.store.array[:], return_counts=True)
            self._unigram = NextTokenDistribution(
                query=[],
                continuations={int(v): int(c) for v, c in zip(values, counts)},
                total=self.total_tokens,
            )
        return self._unigram

    def sample_continuation(
        self, prompt, length: int, max_context: int, seed: int
    ) -> list[int]:
        """Generate tokens from the backoff n-gram model, deterministic per seed.

        At each step the longest context suffix of at most max_context-1
        tokens with any observed continuation is used; empty context falls
        back to the stream's unigram counts.
        """
        self._check_fresh()
        if length < 0 or max_context < 1:
            raise EmptyQuery("length must be >= 0 and max_context >= 1")
        rng = SplitMix64(seed)
        context = [int(t) for t in prompt]
        out: list[int] = []
        for _ in range(length):
            if self.total_tokens == 0:
                raise NoContinuationAnywhere("stream is empty")
            ctx = context[len(context) - (max_context - 1) :] if max_context > 1 else []
            dist = None
            while ctx:
                dist = self.next_token_distribution(ctx)
                if dist.total > 0:
                    break
                ctx = ctx[1:]
                dist = None
            if dist is None:
                dist = self._unigram_distribution()
            tokens = list(dist.continuations.keys())
            counts = list(dist.continuations.values())
            token = weighted_pick(tokens, counts, rng)
            context.append(token)
            out.append(token)
        return out


def build_index(dataset: Dataset, persist: bool = True) -> SuffixArrayIndex:
    """Build (and by default persist) the suffix array for the dataset's
    current version. Builds are serialized via the writer lock."""
    with dataset.lock:
        version = dataset.version
        positions = build_suffix_positions(np.asarray(dataset.store.array, dtype=np.int64))
        index = SuffixArrayIndex(dataset, positions, version)
        if persist:
            save_index(index)
    return index


def save_index(index: SuffixArrayIndex) -> Path:
    path = index.dataset.paths.suffix_array
    n = index.total_tokens
    width = 4 if n < (1 << 32) else 8
    try:
        with open(path, "wb") as f:
            f.write(SA_MAGIC)
            f.write(struct.pack("<QQB", index.dataset_version, n, width))
            f.write(index.positions.astype("<u4" if width == 4 else "<u8").tobytes())
    except OSError as e:
        raise IoFailure(str(e)) from e
    return path


def load_index(dataset: Dataset) -> SuffixArrayIndex | None:
    """Load the persisted index; None when absent or malformed."""
    path = dataset.paths.suffix_array
    try:
        blob = path.read_bytes()
    except FileNotFoundError:
        return None
    header_len = len(SA_MAGIC) + 17
    if len(blob) < header_len or blob[: len(SA_MAGIC)] != SA_MAGIC:
        return None
    version, n, width = struct.unpack("<QQB", blob[len(SA_MAGIC) : header_len])
    if width not in (4, 8) or len(blob) != header_len + n * width:
        return None
    positions = np.frombuffer(
        blob, dtype="<u4" if width == 4 else "<u8", count=n, offset=header_len
    ).astype(np.int64)
    return SuffixArrayIndex(dataset, positions, version)


def get_index(dataset: Dataset, rebuild: bool = False) -> SuffixArrayIndex:
    """Load-if-fresh or build: the returned index always matches the current version."""
    if not rebuild:
        index = load_index(dataset)
        if index is not None and index.dataset_version == dataset.version:
            return index
    return build_index(dataset)
