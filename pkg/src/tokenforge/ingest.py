"""Convert external corpora (JSONL/CSV) into indexed datasets.

Both readers stream records one at a time; combined with the streaming
DatasetWriter, peak memory is bounded by the largest single record. A
sidecar ``<bin>.meta.jsonl`` keeps one line of (doc_id, metadata) per
document, in dataset order, since the index itself has no metadata slot.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

from .dtypes import UINT16, DType
from .errors import MalformedRecord, MissingTokenizer
from .format import DatasetIndex, DatasetWriter
from .paths import DatasetPaths
from .tokenizers import Tokenizer


@dataclass
class IngestRecord:
    """One source document: exactly one of tokens/text, plus flat metadata."""

    doc_id: str | None = None
    tokens: list[int] | None = None
    text: str | None = None
    metadata: dict[str, str] = field(default_factory=dict)

    def validate(self, line_no: int) -> None:
        if (self.tokens is None) == (self.text is None):
            raise MalformedRecord(
                f"line {line_no}: exactly one of 'tokens' and 'text' must be present"
            )
        if self.tokens is not None:
            if not all(isinstance(t, int) and not isinstance(t, bool) for t in self.tokens):
                raise MalformedRecord(f"line {line_no}: tokens must be integers")
            if any(t < 0 for t in self.tokens):
                raise MalformedRecord(f"line {line_no}: tokens must be non-negative")
        for k, v in self.metadata.items():
            if not isinstance(k, str) or not isinstance(v, str):
                raise MalformedRecord(f"line {line_no}: metadata must map strings to strings")


def iter_jsonl_records(stream: TextIO) -> Iterator[IngestRecord]:
    """Parse JSONL into records; line numbers are 1-based in errors."""
    for line_no, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise MalformedRecord(f"line {line_no}: invalid JSON ({e.msg})") from e
        if not isinstance(obj, dict):
            raise MalformedRecord(f"line {line_no}: record must be a JSON object")
        record = IngestRecord(
            doc_id=obj.get("doc_id"),
            tokens=obj.get("tokens"),
            text=obj.get("text"),
            metadata=obj.get("metadata") or {},
        )
        record.validate(line_no)
        yield record


def iter_csv_records(stream: TextIO) -> Iterator[IngestRecord]:
    """Parse CSV with columns doc_id, tokens, text and meta_-prefixed extras.

    The tokens cell holds space-separated decimal integers (CSV has no arrays).
    """
    reader = csv.DictReader(stream)
    for line_no, row in enumerate(reader, start=2):  # header is line 1
        tokens_cell = (row.get("tokens") or "").strip()
        text_cell = row.get("text")
        tokens: list[int] | None = None
        if tokens_cell:
            try:
                tokens = [int(part) for part in tokens_cell.split()]
            except ValueError:
                raise MalformedRecord(
                    f"line {line_no}: tokens cell must be space-separated integers"
                ) from None
        record = IngestRecord(
            doc_id=(row.get("doc_id") or None),
            tokens=tokens,
            text=text_cell if (text_cell and not tokens_cell) else None,
            metadata={k[5:]: v for k, v in row.items() if k.startswith("meta_") and v},
        )
        record.validate(line_no)
        yield record


def ingest(
    records: Iterable[IngestRecord],
    target,
    dtype: DType | None = None,
    tokenizer: Tokenizer | None = None,
) -> DatasetIndex:
    """Stream records into a new dataset, one document per record, in order.

    Text records require a tokenizer. dtype defaults to uint16; pass int32
    for vocabularies past 65535.
    """
    paths = DatasetPaths.of(target)
    dtype = dtype or UINT16
    with DatasetWriter(paths, dtype) as writer, open(paths.metadata, "w", encoding="utf-8") as meta:
        for position, record in enumerate(records):
            if record.tokens is not None:
                tokens = record.tokens
            else:
                if tokenizer is None:
                    raise MissingTokenizer(
                        f"record {position} carries text but no tokenizer was provided"
                    )
                tokens = tokenizer(record.text)
            writer.add_document(tokens)
            meta.write(
                json.dumps(
                    {"doc_id": record.doc_id, "metadata": record.metadata},
                    separators=(",", ":"),
                )
                + "\n"
            )
        return writer.finalize()


def ingest_file(
    path,
    target,
    dtype: DType | None = None,
    tokenizer: Tokenizer | None = None,
    input_format: str | None = None,
) -> DatasetIndex:
    """Ingest a .jsonl or .csv file; format inferred from the extension."""
    fmt = input_format or ("csv" if str(path).endswith(".csv") else "jsonl")
    with open(path, "r", encoding="utf-8", newline="" if fmt == "csv" else None) as f:
        reader = iter_csv_records(f) if fmt == "csv" else iter_jsonl_records(f)
        return ingest(reader, target, dtype=dtype, tokenizer=tokenizer)


def read_metadata(prefix) -> list[dict]:
    """Load the sidecar (doc_id, metadata) lines; empty list when absent."""
    paths = DatasetPaths.of(prefix)
    try:
        with open(paths.metadata, "r", encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]
    except FileNotFoundError:
        return []


def document_metadata(prefix, doc_id: int) -> dict:
    """Sidecar entry for one document; empty fields when no sidecar exists."""
    paths = DatasetPaths.of(prefix)
    try:
        with open(paths.metadata, "r", encoding="utf-8") as f:
            for position, line in enumerate(f):
                if position == doc_id:
                    return json.loads(line)
    except FileNotFoundError:
        pass
    return {"doc_id": None, "metadata": {}}
