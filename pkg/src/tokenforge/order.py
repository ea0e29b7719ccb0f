"""Deterministic reconstruction of the training-time view of a dataset.

The ordered token stream is the epoch-wise concatenation of documents, each
epoch's document order shuffled independently (seed + epoch). Training
sample i is the L+1-token slice [i*L, i*L + L + 1) of that stream (inputs
plus the shifted next-token targets); a second shuffle permutes samples,
and step s consumes batch_size of them.

This ordering is fully pinned by the splitmix64 + Fisher-Yates stack in
:mod:`tokenforge.rng`; it is reproducible everywhere but deliberately does
NOT byte-match the shuffle artifacts of any particular training framework.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DatasetTooSmall, SampleOutOfRange, StepOutOfRange
from .format import Dataset
from .rng import shuffle_in_place

_HEADER_WORDS = 6  # seed, seq_len, batch_size, epochs, num_samples, dataset_version


@dataclass(frozen=True)
class OrderConfig:
    seed: int
    seq_len: int
    batch_size: int
    epochs: int = 1

    def __post_init__(self):
        if self.seq_len < 1 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("seq_len, batch_size and epochs must all be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative 64-bit integer")


@dataclass(frozen=True)
class SampleSpan:
    """One contiguous per-sequence piece of a training sample."""

    document_id: int
    sequence_id: int
    token_offset: int
    token_count: int


@dataclass
class TrainingOrder:
    config: OrderConfig
    doc_order: np.ndarray  # document ids, length document_count * epochs
    num_samples: int
    shuffle: np.ndarray  # permutation of [0, num_samples)
    dataset_version: int
    _stream_starts: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def num_steps(self) -> int:
        return self.num_samples // self.config.batch_size

    def to_bytes(self) -> bytes:
        cfg = self.config
        header = struct.pack(
            "<6Q", cfg.seed, cfg.seq_len, cfg.batch_size, cfg.epochs,
            self.num_samples, self.dataset_version,
        )
        return (
            header
            + self.doc_order.astype("<u8").tobytes()
            + self.shuffle.astype("<u8").tobytes()
        )

    def stream_starts(self, dataset: Dataset) -> np.ndarray:
        """Token offset of each doc_order entry in the ordered stream."""
        if self._stream_starts is None:
            doc_lengths = np.diff(dataset.doc_token_starts)
            starts = np.zeros(len(self.doc_order) + 1, dtype=np.int64)
            np.cumsum(doc_lengths[self.doc_order], out=starts[1:])
            self._stream_starts = starts
        return self._stream_starts


def build_order(dataset: Dataset, config: OrderConfig) -> TrainingOrder:
    """Deterministically derive the full training order for (dataset, config)."""
    total = dataset.total_tokens * config.epochs
    if dataset.document_count == 0 or total < config.seq_len + 1:
        raise DatasetTooSmall(
            f"stream of {total} tokens cannot yield a sample of {config.seq_len + 1}"
        )
    doc_count = dataset.document_count
    blocks = []
    for epoch in range(config.epochs):
        block = np.arange(doc_count, dtype=np.int64)
        shuffle_in_place(block, config.seed + epoch)
        blocks.append(block)
    doc_order = np.concatenate(blocks)
    num_samples = (total - 1) // config.seq_len
    shuffle = np.arange(num_samples, dtype=np.int64)
    shuffle_in_place(shuffle, config.seed)
    return TrainingOrder(config, doc_order, num_samples, shuffle, dataset.version)


def resolve_step(order: TrainingOrder, step: int) -> np.ndarray:
    if not 0 <= step < order.num_steps:
        raise StepOutOfRange(f"step {step} outside [0, {order.num_steps})")
    b = order.config.batch_size
    return order.shuffle[step * b : (step + 1) * b]


def resolve_sample(order: TrainingOrder, dataset: Dataset, sample_id: int) -> list[SampleSpan]:
    """Partition sample_id's L+1 stream tokens into per-sequence spans."""
    if not 0 <= sample_id < order.num_samples:
        raise SampleOutOfRange(f"sample {sample_id} outside [0, {order.num_samples})")
    seq_len = order.config.seq_len
    starts = order.stream_starts(dataset)
    seq_starts = dataset.seq_token_starts
    doc_starts = dataset.doc_token_starts

    pos = sample_id * seq_len
    need = seq_len + 1
    k = int(np.searchsorted(starts, pos, side="right")) - 1
    spans: list[SampleSpan] = []
    while need > 0:
        entry_end = int(starts[k + 1])
        if entry_end <= pos:  # zero-length document entry, or entry exhausted
            k += 1
            continue
        doc = int(order.doc_order[k])
        index_pos = int(doc_starts[doc]) + (pos - int(starts[k]))
        seq = int(np.searchsorted(seq_starts, index_pos, side="right")) - 1
        seq_end = int(seq_starts[seq + 1])
        take = min(need, entry_end - pos, seq_end - index_pos)
        spans.append(SampleSpan(doc, seq, index_pos - int(seq_starts[seq]), take))
        pos += take
        need -= take
    return spans


def sample_tokens(order: TrainingOrder, dataset: Dataset, sample_id: int) -> np.ndarray:
    """Materialize a sample's L+1 tokens by concatenating its span fetches."""
    spans = resolve_sample(order, dataset, sample_id)
    return np.concatenate(
        [dataset.fetch_tokens(s.sequence_id, s.token_offset, s.token_count) for s in spans]
    )


def order_cache_path(dataset: Dataset, config: OrderConfig) -> Path:
    return dataset.paths.order_cache(
        config.seed, config.seq_len, config.batch_size, config.epochs
    )


def save_order(order: TrainingOrder, dataset: Dataset) -> Path:
    path = order_cache_path(dataset, order.config)
    path.write_bytes(order.to_bytes())
    return path


def load_order(dataset: Dataset, config: OrderConfig) -> TrainingOrder | None:
    """Load a cached order; None when absent, malformed, or built against another version."""
    path = order_cache_path(dataset, config)
    try:
        blob = path.read_bytes()
    except FileNotFoundError:
        return None
    if len(blob) < 8 * _HEADER_WORDS:
        return None
    seed, seq_len, batch_size, epochs, num_samples, version = struct.unpack(
        "<6Q", blob[: 8 * _HEADER_WORDS]
    )
    if (seed, seq_len, batch_size, epochs) != (
        config.seed, config.seq_len, config.batch_size, config.epochs,
    ):
        return None
    if version != dataset.version:
        return None
    doc_count = dataset.document_count * config.epochs
    expected = 8 * (_HEADER_WORDS + doc_count + num_samples)
    if len(blob) != expected:
        return None
    off = 8 * _HEADER_WORDS
    doc_order = np.frombuffer(blob, dtype="<u8", count=doc_count, offset=off).astype(np.int64)
    off += 8 * doc_count
    shuffle = np.frombuffer(blob, dtype="<u8", count=num_samples, offset=off).astype(np.int64)
    return TrainingOrder(config, doc_order, num_samples, shuffle, version)


def get_order(dataset: Dataset, config: OrderConfig, use_cache: bool = True) -> TrainingOrder:
    """Cached-or-built order for (dataset, config); persists fresh builds."""
    if use_cache:
        cached = load_order(dataset, config)
        if cached is not None:
            return cached
    order = build_order(dataset, config)
    if use_cache:
        save_order(order, dataset)
    return order
