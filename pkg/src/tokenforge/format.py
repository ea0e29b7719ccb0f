"""Reader, writer, and validator for the two-file indexed dataset format.

Layout of the .idx file (everything little-endian):

    magic      9 bytes   b"MMIDIDX\\x00\\x00"
    version    u64       1
    dtype      u8        payload dtype code
    seqs       i64       sequence count
    bounds     i64       document boundary count (= document count + 1)
    lengths    i32 * seqs
    pointers   i64 * seqs     byte offsets into the .bin
    doc_bounds i64 * bounds   cumulative sequence indices, first 0, last seqs

The .bin file is the flat little-endian token payload, sequences packed
back-to-back. This layout interoperates with the Megatron-family tooling.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .dtypes import DType
from .errors import (
    BadMagic,
    DocOutOfRange,
    EmptyDocument,
    InconsistentPointers,
    IoFailure,
    SeqOutOfRange,
    SliceOutOfRange,
    TokenOverflowsDType,
    TruncatedIndex,
    UnknownDType,
    UnsupportedVersion,
)
from .locking import WriterLock
from .paths import DatasetPaths

INDEX_MAGIC = b"MMIDIDX\x00\x00"
INDEX_VERSION = 1
_HEADER_LEN = 9 + 8 + 1 + 8 + 8  # 34 bytes


@dataclass
class DatasetIndex:
    """Fully parsed and validated .idx contents."""

    dtype: DType
    sequence_count: int
    boundary_count: int
    lengths: np.ndarray  # i32[sequence_count]
    pointers: np.ndarray  # i64[sequence_count]
    doc_boundaries: np.ndarray  # i64[boundary_count]

    @property
    def document_count(self) -> int:
        return self.boundary_count - 1

    @property
    def total_tokens(self) -> int:
        return int(self.lengths.sum(dtype=np.int64)) if self.sequence_count else 0

    def expected_bin_size(self) -> int:
        if self.sequence_count == 0:
            return 0
        return int(self.pointers[-1]) + int(self.lengths[-1]) * self.dtype.width_bytes

    def doc_of_seq(self, seq_id: int) -> int:
        """Document whose [start, end) sequence span contains seq_id."""
        return int(np.searchsorted(self.doc_boundaries, seq_id, side="right")) - 1


def _as_buffer(source) -> np.ndarray:
    """View a byte source (bytes or file path) as a flat uint8 array."""
    if isinstance(source, (bytes, bytearray, memoryview)):
        return np.frombuffer(source, dtype=np.uint8)
    path = source.idx if isinstance(source, DatasetPaths) else Path(os.fspath(source))
    if path.stat().st_size == 0:
        raise TruncatedIndex(f"{path}: empty index file (offset=0)")
    return np.memmap(path, dtype=np.uint8, mode="r")


def _read_raw_index(buf: np.ndarray):
    """Decode header and arrays without invariant checks; structural errors raise."""
    if len(buf) < _HEADER_LEN:
        raise TruncatedIndex(f"index shorter than header: {len(buf)} bytes (offset={len(buf)})")
    magic = buf[:9].tobytes()
    if magic != INDEX_MAGIC:
        raise BadMagic(f"bad magic {magic!r} (offset=0)")
    (version,) = struct.unpack("<Q", buf[9:17].tobytes())
    if version != INDEX_VERSION:
        raise UnsupportedVersion(f"unsupported index version {version} (offset=9)")
    code = int(buf[17])
    dtype = DType(code)  # raises UnknownDType, offset 17
    seqs, bounds = struct.unpack("<qq", buf[18:34].tobytes())
    if seqs < 0 or bounds < 0:
        raise TruncatedIndex(f"negative counts seqs={seqs} bounds={bounds} (offset=18)")
    expected = _HEADER_LEN + 4 * seqs + 8 * seqs + 8 * bounds
    if len(buf) != expected:
        raise TruncatedIndex(
            f"index is {len(buf)} bytes, layout needs {expected} (offset={min(len(buf), expected)})"
        )
    off = _HEADER_LEN
    lengths = np.frombuffer(buf, dtype="<i4", count=seqs, offset=off)
    off += 4 * seqs
    pointers = np.frombuffer(buf, dtype="<i8", count=seqs, offset=off)
    off += 8 * seqs
    doc_boundaries = np.frombuffer(buf, dtype="<i8", count=bounds, offset=off)
    return DatasetIndex(dtype, seqs, bounds, lengths, pointers, doc_boundaries)


def _index_violations(index: DatasetIndex) -> Iterator[dict]:
    """Yield every violated index invariant as a {check, location, detail} entry."""
    n = index.sequence_count
    width = index.dtype.width_bytes
    if n:
        bad = np.nonzero(index.lengths < 1)[0]
        for i in bad[:16]:
            yield {
                "check": "SequenceLengthInvalid",
                "location": f"i={int(i)}",
                "detail": f"lengths[{int(i)}] = {int(index.lengths[i])}, must be >= 1",
            }
        if index.pointers[0] != 0:
            yield {
                "check": "InconsistentPointers",
                "location": "i=0",
                "detail": f"pointers[0] = {int(index.pointers[0])}, must be 0",
            }
        diffs = np.diff(index.pointers)
        want = index.lengths[:-1].astype(np.int64) * width
        bad = np.nonzero(diffs != want)[0]
        for i in bad[:16]:
            yield {
                "check": "InconsistentPointers",
                "location": f"i={int(i)}",
                "detail": (
                    f"pointers[{int(i) + 1}] - pointers[{int(i)}] = {int(diffs[i])}, "
                    f"expected lengths[{int(i)}] * {width} = {int(want[i])}"
                ),
            }
    if index.boundary_count == 0:
        yield {
            "check": "DocBoundariesInvalid",
            "location": "boundary_count",
            "detail": "boundary_count is 0, must be document_count + 1 >= 1",
        }
        return
    b = index.doc_boundaries
    if b[0] != 0:
        yield {
            "check": "DocBoundariesInvalid",
            "location": "i=0",
            "detail": f"doc_boundaries[0] = {int(b[0])}, must be 0",
        }
    if b[-1] != n:
        yield {
            "check": "DocBoundariesInvalid",
            "location": f"i={index.boundary_count - 1}",
            "detail": f"doc_boundaries[-1] = {int(b[-1])}, must equal sequence_count {n}",
        }
    bad = np.nonzero(np.diff(b) < 0)[0]
    for i in bad[:16]:
        yield {
            "check": "DocBoundariesInvalid",
            "location": f"i={int(i)}",
            "detail": f"doc_boundaries[{int(i) + 1}] < doc_boundaries[{int(i)}]",
        }


def parse_index(source) -> DatasetIndex:
    """Parse and fully validate an index from bytes or an .idx path."""
    index = _read_raw_index(_as_buffer(source))
    for violation in _index_violations(index):
        raise InconsistentPointers(f"{violation['detail']} ({violation['location']})")
    return index


def write_index(idx_path, dtype: DType, lengths, pointers, doc_boundaries) -> None:
    """Write a complete .idx in one go (in-memory arrays; see DatasetWriter for streaming)."""
    lengths = np.asarray(lengths, dtype="<i4")
    pointers = np.asarray(pointers, dtype="<i8")
    doc_boundaries = np.asarray(doc_boundaries, dtype="<i8")
    with open(idx_path, "wb") as f:
        f.write(INDEX_MAGIC)
        f.write(struct.pack("<Q", INDEX_VERSION))
        f.write(struct.pack("<B", dtype.code))
        f.write(struct.pack("<qq", len(lengths), len(doc_boundaries)))
        f.write(lengths.tobytes())
        f.write(pointers.tobytes())
        f.write(doc_boundaries.tobytes())


class TokenStore:
    """Random-access view over the .bin payload; never loads the whole file."""

    def __init__(self, bin_path, dtype: DType):
        self.bin_path = Path(os.fspath(bin_path))
        self.dtype = dtype
        size = self.bin_path.stat().st_size
        if size % dtype.width_bytes != 0:
            raise TruncatedIndex(
                f"{self.bin_path}: {size} bytes is not a multiple of token width {dtype.width_bytes}"
            )
        self.total_tokens = size // dtype.width_bytes
        if size == 0:
            self._data = np.empty(0, dtype=dtype.numpy)
        else:
            self._data = np.memmap(self.bin_path, dtype=dtype.numpy, mode="r")

    @property
    def array(self) -> np.ndarray:
        """The full token stream as a lazily-paged array."""
        return self._data

    def read(self, start: int, count: int) -> np.ndarray:
        if count < 0 or start < 0 or start + count > self.total_tokens:
            raise SliceOutOfRange(
                f"token range [{start}, {start + count}) outside [0, {self.total_tokens})"
            )
        return self._data[start : start + count]


class Dataset:
    """Immutable read handle over one .bin/.idx pair. Safe for concurrent readers."""

    def __init__(self, prefix):
        self.paths = DatasetPaths.of(prefix)
        if not self.paths.idx.exists():
            raise IoFailure(f"index file not found: {self.paths.idx}")
        if not self.paths.bin.exists():
            raise IoFailure(f"payload file not found: {self.paths.bin}")
        self.index = parse_index(self.paths.idx)
        if not self.index.dtype.is_integer:
            raise UnknownDType(
                f"payload dtype {self.index.dtype.name} is not an integer type; "
                "token datasets require integer dtypes"
            )
        self.store = TokenStore(self.paths.bin, self.index.dtype)
        if self.store.total_tokens * self.index.dtype.width_bytes != self.index.expected_bin_size():
            raise InconsistentPointers(
                f"{self.paths.bin} is {self.store.total_tokens * self.index.dtype.width_bytes} "
                f"bytes, index expects {self.index.expected_bin_size()}"
            )
        self._seq_token_starts: np.ndarray | None = None
        self._lock: WriterLock | None = None

    @property
    def lock(self) -> WriterLock:
        """The dataset's exclusive writer lock; mutations happen under it."""
        if self._lock is None:
            self._lock = WriterLock(self.paths)
        return self._lock

    @property
    def sequence_count(self) -> int:
        return self.index.sequence_count

    @property
    def document_count(self) -> int:
        return self.index.document_count

    @property
    def total_tokens(self) -> int:
        return self.store.total_tokens

    @property
    def version(self) -> int:
        return read_version(self.paths)

    @property
    def seq_token_starts(self) -> np.ndarray:
        """Cumulative token offsets: seq i starts at entry i; entry n is the total."""
        if self._seq_token_starts is None:
            starts = np.zeros(self.sequence_count + 1, dtype=np.int64)
            np.cumsum(self.index.lengths, out=starts[1:])
            self._seq_token_starts = starts
        return self._seq_token_starts

    @property
    def doc_token_starts(self) -> np.ndarray:
        return self.seq_token_starts[self.index.doc_boundaries]

    def fetch_tokens(self, seq_id: int, offset: int = 0, count: int | None = None) -> np.ndarray:
        if not 0 <= seq_id < self.sequence_count:
            raise SeqOutOfRange(f"sequence {seq_id} outside [0, {self.sequence_count})")
        length = int(self.index.lengths[seq_id])
        if count is None:
            count = length - offset
        if offset < 0 or count < 0 or offset + count > length:
            raise SliceOutOfRange(
                f"slice [{offset}, {offset + count}) outside sequence {seq_id} of length {length}"
            )
        start = int(self.index.pointers[seq_id]) // self.index.dtype.width_bytes + offset
        return self.store.read(start, count)

    def fetch_document(self, doc_id: int) -> list[np.ndarray]:
        if not 0 <= doc_id < self.document_count:
            raise DocOutOfRange(f"document {doc_id} outside [0, {self.document_count})")
        lo = int(self.index.doc_boundaries[doc_id])
        hi = int(self.index.doc_boundaries[doc_id + 1])
        return [self.fetch_tokens(s) for s in range(lo, hi)]

    def document_tokens(self, doc_id: int) -> np.ndarray:
        """All tokens of a document as one contiguous slice of the stream."""
        if not 0 <= doc_id < self.document_count:
            raise DocOutOfRange(f"document {doc_id} outside [0, {self.document_count})")
        starts = self.doc_token_starts
        return self.store.read(int(starts[doc_id]), int(starts[doc_id + 1] - starts[doc_id]))


# dataset version counter ("<idx>.version", decimal, newline-terminated)

def read_version(paths: DatasetPaths) -> int:
    try:
        return int(paths.version.read_text().strip())
    except FileNotFoundError:
        return 0


def write_version(paths: DatasetPaths, version: int) -> None:
    paths.version.write_text(f"{version}\n")


def bump_version(paths: DatasetPaths) -> tuple[int, int]:
    before = read_version(paths)
    write_version(paths, before + 1)
    return before, before + 1


class DatasetWriter:
    """Streaming builder: memory use stays bounded regardless of corpus size.

    Token bytes go straight to the .bin; per-sequence lengths spool to a
    temporary sidecar and are replayed twice at finalize (once verbatim,
    once to accumulate pointers), so nothing grows with document count.
    """

    _FLUSH_EVERY = 65536  # buffered lengths before spooling

    def __init__(self, target, dtype: DType):
        self.paths = DatasetPaths.of(target)
        self.dtype = dtype
        self._lock = WriterLock(self.paths)
        self._lock.acquire()
        try:
            self._bin = open(self.paths.bin, "wb")
        except OSError as e:
            self._lock.release()
            raise IoFailure(str(e)) from e
        self._spool_path = Path(str(self.paths.idx) + ".lengths.tmp")
        self._spool = open(self._spool_path, "w+b")
        self._pending: list[int] = []
        self._count = 0
        self._finalized = False

    def add_document(self, tokens) -> None:
        arr = np.asarray(tokens)
        if arr.ndim != 1 or arr.size == 0:
            raise EmptyDocument(f"document {self._count} is empty or not one-dimensional")
        if not np.issubdtype(arr.dtype, np.integer):
            try:
                as_int = arr.astype(np.int64)
            except (OverflowError, ValueError, TypeError) as e:
                raise TokenOverflowsDType(f"document {self._count}: {e}") from e
            if not np.array_equal(as_int, arr):
                raise TokenOverflowsDType(f"document {self._count} has non-integer tokens")
            arr = as_int
        lo, hi = int(arr.min()), int(arr.max())
        if lo < self.dtype.min_token or hi > self.dtype.max_token:
            raise TokenOverflowsDType(
                f"document {self._count}: token range [{lo}, {hi}] does not fit {self.dtype.name}"
            )
        try:
            self._bin.write(arr.astype(self.dtype.numpy, copy=False).tobytes())
        except OSError as e:
            raise IoFailure(str(e)) from e
        self._pending.append(arr.size)
        self._count += 1
        if len(self._pending) >= self._FLUSH_EVERY:
            self._flush_lengths()

    def _flush_lengths(self) -> None:
        if self._pending:
            self._spool.write(np.asarray(self._pending, dtype="<i4").tobytes())
            self._pending.clear()

    def finalize(self) -> DatasetIndex:
        if self._finalized:
            raise IoFailure("writer already finalized")
        self._finalized = True
        try:
            self._flush_lengths()
            self._bin.close()
            self._spool.flush()
            n = self._count
            with open(self.paths.idx, "wb") as idx:
                idx.write(INDEX_MAGIC)
                idx.write(struct.pack("<Q", INDEX_VERSION))
                idx.write(struct.pack("<B", self.dtype.code))
                idx.write(struct.pack("<qq", n, n + 1))
                # pass 1: lengths verbatim
                self._spool.seek(0)
                while chunk := self._spool.read(1 << 20):
                    idx.write(chunk)
                # pass 2: pointers accumulated from lengths
                self._spool.seek(0)
                offset = 0
                width = self.dtype.width_bytes
                while chunk := self._spool.read(1 << 20):
                    lens = np.frombuffer(chunk, dtype="<i4").astype(np.int64)
                    ptrs = np.empty(len(lens), dtype="<i8")
                    ptrs[0] = offset
                    np.cumsum(lens[:-1] * width, out=ptrs[1:])
                    ptrs[1:] += offset
                    offset += int(lens.sum() * width)
                    idx.write(ptrs.tobytes())
                # boundaries: one sequence per document
                for lo in range(0, n + 1, 1 << 17):
                    hi = min(lo + (1 << 17), n + 1)
                    idx.write(np.arange(lo, hi, dtype="<i8").tobytes())
            write_version(self.paths, 0)
        except OSError as e:
            raise IoFailure(str(e)) from e
        finally:
            self._spool.close()
            self._spool_path.unlink(missing_ok=True)
            self._lock.release()
        return parse_index(self.paths.idx)

    def abort(self) -> None:
        if not self._finalized:
            self._finalized = True
            self._bin.close()
            self._spool.close()
            self._spool_path.unlink(missing_ok=True)
            self._lock.release()

    def __enter__(self) -> "DatasetWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is not None:
            self.abort()


def build_dataset(target, dtype: DType, documents: Iterable) -> DatasetIndex:
    """Stream documents (one token array each) into a new .bin/.idx pair."""
    with DatasetWriter(target, dtype) as writer:
        for doc in documents:
            writer.add_document(doc)
        return writer.finalize()


def validate_dataset(prefix) -> list[dict]:
    """Collect every violated invariant; an empty list means well-formed."""
    paths = DatasetPaths.of(prefix)
    report: list[dict] = []
    for path in (paths.idx, paths.bin):
        if not path.exists():
            report.append(
                {"check": "MissingFile", "location": str(path), "detail": "file does not exist"}
            )
    if report:
        return report
    try:
        index = _read_raw_index(_as_buffer(paths.idx))
    except (BadMagic, UnsupportedVersion, UnknownDType, TruncatedIndex) as e:
        report.append({"check": e.code, "location": str(paths.idx), "detail": e.detail})
        return report
    report.extend(_index_violations(index))
    if not index.dtype.is_integer:
        report.append(
            {
                "check": "NonIntegerDType",
                "location": "offset=17",
                "detail": f"payload dtype {index.dtype.name} is not an integer type",
            }
        )
    bin_size = paths.bin.stat().st_size
    expected = index.expected_bin_size()
    if bin_size != expected:
        report.append(
            {
                "check": "BinSizeMismatch",
                "location": str(paths.bin),
                "detail": f"payload is {bin_size} bytes, index expects {expected}",
            }
        )
    return report
