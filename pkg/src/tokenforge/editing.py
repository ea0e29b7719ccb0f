"""Token-level dataset surgery, no re-tokenization required.

Two modes: ``overwrite_sequence`` patches bytes in place (length-preserving,
O(edit size), keeps the training order intact) and ``splice_sequence``
streams a whole new dataset for length-changing edits, leaving the original
untouched. ``inject_into_sample`` aims an overwrite at a training-sample
position, splitting it across storage sequences as needed.

Every mutation bumps the dataset version counter and appends its receipt to
the append-only edit journal, so counterfactual datasets stay replayable.
"""

from __future__ import annotations

import datetime
import json
import shutil
from dataclasses import dataclass

import numpy as np

from .errors import (
    ResultEmptySequence,
    SliceOutOfRange,
    TokenOverflowsDType,
)
from .format import Dataset, bump_version, read_version, write_index, write_version
from .locking import WriterLock
from .order import TrainingOrder, resolve_sample
from .paths import DatasetPaths

_COPY_CHUNK = 1 << 20


@dataclass
class EditReceipt:
    edit_kind: str  # overwrite | splice | inject
    target_kind: str  # sequence | sample
    target_id: int
    offset: int
    tokens_removed: int
    tokens_inserted: int
    version_before: int
    version_after: int
    timestamp: str
    sample_id: int | None = None

    def to_dict(self) -> dict:
        out = {
            "edit_kind": self.edit_kind,
            "target_kind": self.target_kind,
            "target_id": self.target_id,
            "offset": self.offset,
            "tokens_removed": self.tokens_removed,
            "tokens_inserted": self.tokens_inserted,
            "version_before": self.version_before,
            "version_after": self.version_after,
            "timestamp": self.timestamp,
        }
        if self.sample_id is not None:
            out["sample_id"] = self.sample_id
        return out


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _append_receipt(paths: DatasetPaths, receipt: EditReceipt) -> None:
    with open(paths.journal, "a", encoding="utf-8") as f:
        f.write(json.dumps(receipt.to_dict(), separators=(",", ":")) + "\n")


def read_journal(prefix) -> list[dict]:
    paths = DatasetPaths.of(prefix)
    try:
        with open(paths.journal, "r", encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]
    except FileNotFoundError:
        return []


def _tokens_for_dtype(dataset: Dataset, tokens) -> np.ndarray:
    dtype = dataset.index.dtype
    arr = np.asarray(tokens)
    if arr.size == 0:
        return np.empty(0, dtype=dtype.numpy)
    if not np.issubdtype(arr.dtype, np.integer):
        as_int = arr.astype(np.int64)
        if not np.array_equal(as_int, arr):
            raise TokenOverflowsDType("tokens must be integers")
        arr = as_int
    lo, hi = int(arr.min()), int(arr.max())
    if lo < dtype.min_token or hi > dtype.max_token:
        raise TokenOverflowsDType(f"token range [{lo}, {hi}] does not fit {dtype.name}")
    return arr.astype(dtype.numpy, copy=False)


def overwrite_sequence(
    dataset: Dataset, seq_id: int, offset: int, tokens,
    _kind: str = "overwrite", _sample_id: int | None = None,
) -> EditReceipt:
    """Replace len(tokens) tokens of one sequence in place.

    Touches exactly the edited byte range of the .bin and nothing in the
    .idx. The caller must hold the dataset's writer lock.
    """
    dataset.lock.require()
    if not 0 <= seq_id < dataset.sequence_count:
        raise SliceOutOfRange(f"sequence {seq_id} outside [0, {dataset.sequence_count})")
    length = int(dataset.index.lengths[seq_id])
    arr = _tokens_for_dtype(dataset, tokens)
    if offset < 0 or offset + arr.size > length:
        raise SliceOutOfRange(
            f"overwrite [{offset}, {offset + arr.size}) outside sequence {seq_id} "
            f"of length {length}"
        )
    if arr.size:
        byte_start = int(dataset.index.pointers[seq_id]) + offset * dataset.index.dtype.width_bytes
        with open(dataset.paths.bin, "r+b") as f:
            f.seek(byte_start)
            f.write(arr.tobytes())
    before, after = bump_version(dataset.paths)
    receipt = EditReceipt(
        edit_kind=_kind,
        target_kind="sequence",
        target_id=seq_id,
        offset=offset,
        tokens_removed=int(arr.size),
        tokens_inserted=int(arr.size),
        version_before=before,
        version_after=after,
        timestamp=_now(),
        sample_id=_sample_id,
    )
    _append_receipt(dataset.paths, receipt)
    return receipt


def splice_sequence(
    dataset: Dataset,
    seq_id: int,
    offset: int,
    delete_count: int,
    insert_tokens,
    out_prefix: str | None = None,
) -> tuple[DatasetPaths, EditReceipt]:
    """Length-changing edit: stream a new dataset with one sequence rewritten.

    The source files are never touched; the new dataset inherits the source
    journal plus this receipt, and its version file records the bump.
    """
    if not 0 <= seq_id < dataset.sequence_count:
        raise SliceOutOfRange(f"sequence {seq_id} outside [0, {dataset.sequence_count})")
    length = int(dataset.index.lengths[seq_id])
    if offset < 0 or delete_count < 0 or offset + delete_count > length:
        raise SliceOutOfRange(
            f"splice [{offset}, {offset + delete_count}) outside sequence {seq_id} "
            f"of length {length}"
        )
    insert = _tokens_for_dtype(dataset, insert_tokens)
    new_length = length - delete_count + insert.size
    if new_length < 1:
        raise ResultEmptySequence(f"sequence {seq_id} would end up empty")

    version_before = read_version(dataset.paths)
    version_after = version_before + 1
    if out_prefix is None:
        out_prefix = f"{dataset.paths.prefix}.v{version_after}"
    out = DatasetPaths.of(out_prefix)
    width = dataset.index.dtype.width_bytes

    with WriterLock(out):
        cut_start = int(dataset.index.pointers[seq_id]) + offset * width
        cut_end = cut_start + delete_count * width
        with open(dataset.paths.bin, "rb") as src, open(out.bin, "wb") as dst:
            _copy_range(src, dst, 0, cut_start)
            dst.write(insert.tobytes())
            src_size = dataset.paths.bin.stat().st_size
            _copy_range(src, dst, cut_end, src_size)

        lengths = dataset.index.lengths.astype(np.int64)
        lengths[seq_id] = new_length
        pointers = np.zeros(len(lengths), dtype=np.int64)
        np.cumsum(lengths[:-1] * width, out=pointers[1:])
        write_index(out.idx, dataset.index.dtype, lengths, pointers, dataset.index.doc_boundaries)
        write_version(out, version_after)
        if dataset.paths.metadata.exists():
            shutil.copyfile(dataset.paths.metadata, out.metadata)
        if dataset.paths.journal.exists():
            shutil.copyfile(dataset.paths.journal, out.journal)
        receipt = EditReceipt(
            edit_kind="splice",
            target_kind="sequence",
            target_id=seq_id,
            offset=offset,
            tokens_removed=delete_count,
            tokens_inserted=int(insert.size),
            version_before=version_before,
            version_after=version_after,
            timestamp=_now(),
        )
        _append_receipt(out, receipt)
    return out, receipt


def _copy_range(src, dst, start: int, end: int) -> None:
    src.seek(start)
    remaining = end - start
    while remaining > 0:
        chunk = src.read(min(_COPY_CHUNK, remaining))
        if not chunk:
            break
        dst.write(chunk)
        remaining -= len(chunk)


def inject_into_sample(
    dataset: Dataset,
    order: TrainingOrder,
    sample_id: int,
    offset_in_sample: int,
    tokens,
) -> list[EditReceipt]:
    """Overwrite a run of tokens at a position inside one training sample.

    The run is split across the sample's spans, producing one receipt per
    storage sequence touched. Reading the batch back afterwards shows the
    injected tokens contiguously at the requested sample offset.
    """
    spans = resolve_sample(order, dataset, sample_id)
    sample_len = order.config.seq_len + 1
    arr = np.asarray(tokens)
    if offset_in_sample < 0 or offset_in_sample + arr.size > sample_len:
        raise SliceOutOfRange(
            f"injection [{offset_in_sample}, {offset_in_sample + arr.size}) outside "
            f"sample of {sample_len} tokens"
        )
    receipts: list[EditReceipt] = []
    if arr.size == 0:
        # degenerate edit: no bytes change, but the mutation is still journaled
        pos = 0
        for span in spans:
            if pos + span.token_count > offset_in_sample or span is spans[-1]:
                in_span = min(offset_in_sample - pos, span.token_count)
                receipts.append(
                    overwrite_sequence(
                        dataset, span.sequence_id, span.token_offset + in_span, [],
                        _kind="inject", _sample_id=sample_id,
                    )
                )
                break
            pos += span.token_count
        return receipts

    lo, hi = offset_in_sample, offset_in_sample + arr.size
    pos = 0
    for span in spans:
        span_lo, span_hi = pos, pos + span.token_count
        piece_lo, piece_hi = max(lo, span_lo), min(hi, span_hi)
        if piece_lo < piece_hi:
            receipts.append(
                overwrite_sequence(
                    dataset,
                    span.sequence_id,
                    span.token_offset + (piece_lo - span_lo),
                    arr[piece_lo - lo : piece_hi - lo],
                    _kind="inject",
                    _sample_id=sample_id,
                )
            )
        pos = span_hi
    return receipts
