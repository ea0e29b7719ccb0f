"""Export any selection of sequences, documents, batches, or token ranges.

Output is JSONL (one object per line, UTF-8) or CSV (header row; token
lists encoded as space-separated decimals in a single cell). Both formats
carry identical token payloads and are loadable by generic dataset readers.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .errors import IoFailure, MissingDetokenizer, SelectionOutOfRange
from .format import Dataset
from .order import TrainingOrder, resolve_sample, resolve_step, sample_tokens
from .tokenizers import Detokenizer

KINDS = ("sequences", "documents", "batches", "token_range")

# canonical column order; a selection's fields are a subset of these
_FIELD_ORDER = ("step", "sample_id", "seq_id", "doc_id", "tokens", "text")

_DEFAULT_FIELDS = {
    "sequences": ["seq_id", "tokens"],
    "documents": ["doc_id", "tokens"],
    "batches": ["step", "sample_id", "tokens"],
    "token_range": ["tokens"],
}


@dataclass
class ExportSelection:
    kind: str
    ids_or_ranges: list
    fields: list[str] = field(default_factory=list)
    format: str = "jsonl"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SelectionOutOfRange(f"unknown selection kind {self.kind!r}")
        if self.format not in ("jsonl", "csv"):
            raise SelectionOutOfRange(f"unknown export format {self.format!r}")
        if not self.fields:
            self.fields = list(_DEFAULT_FIELDS[self.kind])
        unknown = set(self.fields) - set(_FIELD_ORDER)
        if unknown:
            raise SelectionOutOfRange(f"unknown fields {sorted(unknown)}")
        self.fields = [f for f in _FIELD_ORDER if f in self.fields]


def _records(dataset: Dataset, selection: ExportSelection, order: TrainingOrder | None):
    kind = selection.kind
    if kind == "sequences":
        for seq_id in selection.ids_or_ranges:
            seq_id = int(seq_id)
            if not 0 <= seq_id < dataset.sequence_count:
                raise SelectionOutOfRange(
                    f"sequence {seq_id} outside [0, {dataset.sequence_count})"
                )
            yield {
                "seq_id": seq_id,
                "doc_id": dataset.index.doc_of_seq(seq_id),
                "tokens": dataset.fetch_tokens(seq_id),
            }
    elif kind == "documents":
        for doc_id in selection.ids_or_ranges:
            doc_id = int(doc_id)
            if not 0 <= doc_id < dataset.document_count:
                raise SelectionOutOfRange(
                    f"document {doc_id} outside [0, {dataset.document_count})"
                )
            lo = int(dataset.index.doc_boundaries[doc_id])
            hi = int(dataset.index.doc_boundaries[doc_id + 1])
            yield {
                "doc_id": doc_id,
                "seq_id": list(range(lo, hi)),
                "tokens": dataset.document_tokens(doc_id),
            }
    elif kind == "batches":
        if order is None:
            raise ValueError("batches selection requires a training order")
        for step in selection.ids_or_ranges:
            step = int(step)
            if not 0 <= step < order.num_steps:
                raise SelectionOutOfRange(f"step {step} outside [0, {order.num_steps})")
            for sample_id in resolve_step(order, step):
                sample_id = int(sample_id)
                spans = resolve_sample(order, dataset, sample_id)
                yield {
                    "step": step,
                    "sample_id": sample_id,
                    "seq_id": [s.sequence_id for s in spans],
                    "doc_id": [s.document_id for s in spans],
                    "tokens": sample_tokens(order, dataset, sample_id),
                }
    else:  # token_range
        for pair in selection.ids_or_ranges:
            start, end = int(pair[0]), int(pair[1])
            if start < 0 or end < start or end > dataset.total_tokens:
                raise SelectionOutOfRange(
                    f"token range [{start}, {end}) outside [0, {dataset.total_tokens})"
                )
            yield {"tokens": dataset.store.read(start, end - start)}


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    return value


def _csv_cell(value):
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        return " ".join(str(int(v)) for v in value)
    if isinstance(value, (np.integer,)):
        return int(value)
    return value


def export(
    dataset: Dataset,
    selection: ExportSelection,
    sink: TextIO,
    detokenizer: Detokenizer | None = None,
    order: TrainingOrder | None = None,
) -> int:
    """Write one output record per selected unit, in selection order.

    Returns the number of records written. Requesting the text field
    without a detokenizer raises MissingDetokenizer.
    """
    if "text" in selection.fields and detokenizer is None:
        raise MissingDetokenizer("selection requests text but no detokenizer was provided")
    count = 0
    try:
        writer = None
        if selection.format == "csv":
            writer = csv.writer(sink, lineterminator="\n")
            writer.writerow(selection.fields)
        for record in _records(dataset, selection, order):
            if "text" in selection.fields:
                record["text"] = detokenizer(_jsonable(record["tokens"]))
            row = {f: record[f] for f in selection.fields}
            if writer is not None:
                writer.writerow([_csv_cell(row[f]) for f in selection.fields])
            else:
                sink.write(
                    json.dumps(
                        {f: _jsonable(v) for f, v in row.items()},
                        separators=(",", ":"),
                        ensure_ascii=False,
                    )
                    + "\n"
                )
            count += 1
    except OSError as e:
        raise IoFailure(str(e)) from e
    return count
