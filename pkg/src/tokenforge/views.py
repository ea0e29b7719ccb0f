"""Read-side views: single sequences, documents, and whole training batches."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .format import Dataset
from .ingest import document_metadata
from .order import SampleSpan, TrainingOrder, resolve_sample, resolve_step
from .tokenizers import Detokenizer


@dataclass
class SequenceView:
    seq_id: int
    doc_id: int
    tokens: np.ndarray
    length: int
    text: str | None = None

    def to_dict(self) -> dict:
        out = {
            "seq_id": self.seq_id,
            "doc_id": self.doc_id,
            "tokens": self.tokens.tolist(),
            "length": self.length,
        }
        if self.text is not None:
            out["text"] = self.text
        return out


@dataclass
class SampleView:
    sample_id: int
    tokens: np.ndarray
    spans: list[SampleSpan]
    text: str | None = None

    def to_dict(self) -> dict:
        out = {
            "sample_id": self.sample_id,
            "tokens": self.tokens.tolist(),
            "spans": [
                {
                    "document_id": s.document_id,
                    "sequence_id": s.sequence_id,
                    "token_offset": s.token_offset,
                    "token_count": s.token_count,
                }
                for s in self.spans
            ],
        }
        if self.text is not None:
            out["text"] = self.text
        return out


@dataclass
class BatchView:
    step: int
    sample_ids: list[int]
    samples: list[SampleView]

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "sample_ids": self.sample_ids,
            "samples": [s.to_dict() for s in self.samples],
        }


def get_sequence_view(
    dataset: Dataset, seq_id: int, detokenizer: Detokenizer | None = None
) -> SequenceView:
    tokens = dataset.fetch_tokens(seq_id)
    return SequenceView(
        seq_id=seq_id,
        doc_id=dataset.index.doc_of_seq(seq_id),
        tokens=tokens,
        length=len(tokens),
        text=detokenizer(tokens.tolist()) if detokenizer else None,
    )


def get_batch_view(
    dataset: Dataset,
    order: TrainingOrder,
    step: int,
    detokenizer: Detokenizer | None = None,
) -> BatchView:
    """Materialize every sample of one training step, with provenance spans."""
    sample_ids = [int(s) for s in resolve_step(order, step)]
    samples = []
    for sample_id in sample_ids:
        spans = resolve_sample(order, dataset, sample_id)
        tokens = np.concatenate(
            [dataset.fetch_tokens(s.sequence_id, s.token_offset, s.token_count) for s in spans]
        )
        samples.append(
            SampleView(
                sample_id=sample_id,
                tokens=tokens,
                spans=spans,
                text=detokenizer(tokens.tolist()) if detokenizer else None,
            )
        )
    return BatchView(step=step, sample_ids=sample_ids, samples=samples)


def get_document_view(
    dataset: Dataset, doc_id: int, detokenizer: Detokenizer | None = None
) -> dict:
    """Document page payload: member sequences, sidecar metadata, optional text."""
    sequences = dataset.fetch_document(doc_id)
    lo = int(dataset.index.doc_boundaries[doc_id])
    meta = document_metadata(dataset.paths, doc_id)
    tokens = dataset.document_tokens(doc_id)
    out = {
        "doc_id": doc_id,
        "seq_ids": list(range(lo, lo + len(sequences))),
        "sequences": [s.tolist() for s in sequences],
        "token_count": int(tokens.size),
        "source_doc_id": meta.get("doc_id"),
        "metadata": meta.get("metadata") or {},
    }
    if detokenizer:
        out["text"] = detokenizer(tokens.tolist())
    return out
