"""Facade tying the per-concern handlers to one open dataset."""

from __future__ import annotations

from typing import TextIO

import numpy as np

from . import editing, order as order_mod, sampling, search, views
from .export import ExportSelection, export as run_export
from .format import Dataset, validate_dataset
from .order import OrderConfig, TrainingOrder
from .paths import DatasetPaths
from .sampling import SamplePolicy
from .tokenizers import Detokenizer, Tokenizer, get_detokenizer, get_tokenizer


class DatasetManager:
    """Unified entry point: opens the dataset once, then inspects, samples,
    edits, searches, and exports through a single object.

    Construction parses the index and opens the token store; training
    orders and the search index are built lazily and cached per dataset
    version.
    """

    def __init__(
        self,
        prefix,
        order_config: OrderConfig | None = None,
        tokenizer: "Tokenizer | str | None" = None,
        detokenizer: "Detokenizer | str | None" = None,
    ):
        self.dataset = Dataset(prefix)
        self.order_config = order_config
        self.tokenizer = get_tokenizer(tokenizer) if isinstance(tokenizer, str) else tokenizer
        self.detokenizer = (
            get_detokenizer(detokenizer) if isinstance(detokenizer, str) else detokenizer
        )
        self._orders: dict[tuple, TrainingOrder] = {}
        self._search_index: search.SuffixArrayIndex | None = None

    @property
    def paths(self) -> DatasetPaths:
        return self.dataset.paths

    @property
    def version(self) -> int:
        return self.dataset.version

    def info(self) -> dict:
        ds = self.dataset
        return {
            "sequence_count": ds.sequence_count,
            "document_count": ds.document_count,
            "total_tokens": ds.total_tokens,
            "dtype": ds.index.dtype.name,
            "version": ds.version,
            "has_tokenizer": self.tokenizer is not None,
            "has_detokenizer": self.detokenizer is not None,
        }

    def validate(self) -> list[dict]:
        return validate_dataset(self.paths)

    # ordering

    def order(self, config: OrderConfig | None = None, use_cache: bool = True) -> TrainingOrder:
        config = config or self.order_config
        if config is None:
            raise ValueError("no order config given and none set on the manager")
        key = (config.seed, config.seq_len, config.batch_size, config.epochs)
        cached = self._orders.get(key)
        if cached is None or cached.dataset_version != self.dataset.version:
            cached = order_mod.get_order(self.dataset, config, use_cache=use_cache)
            self._orders[key] = cached
        return cached

    # inspection

    def sequence_view(self, seq_id: int, detokenize: bool = False) -> views.SequenceView:
        return views.get_sequence_view(
            self.dataset, seq_id, self.detokenizer if detokenize else None
        )

    def document_view(self, doc_id: int, detokenize: bool = False) -> dict:
        return views.get_document_view(
            self.dataset, doc_id, self.detokenizer if detokenize else None
        )

    def batch_view(
        self, step: int, config: OrderConfig | None = None, detokenize: bool = False
    ) -> views.BatchView:
        return views.get_batch_view(
            self.dataset, self.order(config), step, self.detokenizer if detokenize else None
        )

    # sampling

    def sample(
        self, policy: SamplePolicy, limit: int | None = None,
        config: OrderConfig | None = None,
    ) -> list[int]:
        order = None
        if policy.unit == "sample":
            order = self.order(config)
        return sampling.sample_dataset(self.dataset, policy, limit=limit, order=order)

    # editing (each call takes the writer lock for its duration)

    def overwrite(self, seq_id: int, offset: int, tokens) -> editing.EditReceipt:
        with self.dataset.lock:
            return editing.overwrite_sequence(self.dataset, seq_id, offset, tokens)

    def splice(
        self, seq_id: int, offset: int, delete_count: int, insert_tokens,
        out_prefix: str | None = None,
    ) -> tuple[DatasetPaths, editing.EditReceipt]:
        return editing.splice_sequence(
            self.dataset, seq_id, offset, delete_count, insert_tokens, out_prefix
        )

    def inject(
        self, sample_id: int, offset_in_sample: int, tokens,
        config: OrderConfig | None = None,
    ) -> list[editing.EditReceipt]:
        order = self.order(config)
        with self.dataset.lock:
            return editing.inject_into_sample(
                self.dataset, order, sample_id, offset_in_sample, tokens
            )

    # search

    def search_index(self, rebuild: bool = False) -> search.SuffixArrayIndex:
        idx = self._search_index
        if rebuild or idx is None or idx.dataset_version != self.dataset.version:
            idx = search.get_index(self.dataset, rebuild=rebuild)
            self._search_index = idx
        return idx

    # export

    def export(
        self,
        selection: ExportSelection,
        sink: TextIO,
        config: OrderConfig | None = None,
    ) -> int:
        order = None
        if selection.kind == "batches":
            order = self.order(config)
        return run_export(
            self.dataset, selection, sink, detokenizer=self.detokenizer, order=order
        )

    # randomized edit positions for benchmark-style workloads

    def random_overwrite_positions(
        self, payload_len: int, count: int, seed: int
    ) -> list[tuple[int, int]]:
        """(seq_id, offset) pairs where a payload of payload_len fits, drawn
        with the pinned RNG; sequences shorter than the payload are skipped."""
        from .rng import SplitMix64

        rng = SplitMix64(seed)
        lengths = self.dataset.index.lengths
        n = self.dataset.sequence_count
        out: list[tuple[int, int]] = []
        attempts = 0
        while len(out) < count and attempts < count * 100:
            attempts += 1
            seq_id = rng.below(n)
            room = int(lengths[seq_id]) - payload_len
            if room < 0:
                continue
            out.append((seq_id, rng.below(room + 1)))
        return out
