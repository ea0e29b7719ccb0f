import hashlib
import json

import numpy as np
import pytest

from tokenforge import Dataset, OrderConfig, build_order, resolve_sample
from tokenforge.editing import (
    inject_into_sample,
    overwrite_sequence,
    read_journal,
    splice_sequence,
)
from tokenforge.errors import (
    LockNotHeld,
    ResultEmptySequence,
    SliceOutOfRange,
    TokenOverflowsDType,
)
from tokenforge.format import read_version
from tokenforge.views import get_batch_view

from conftest import make_dataset, random_docs
from oracles import splice_lists


class TestOverwrite:
    def test_basic(self, tmp_path):
        ds = make_dataset(tmp_path, [[5, 6, 7, 8]])
        with ds.lock:
            receipt = overwrite_sequence(ds, 0, 1, [9, 9])
        assert ds.fetch_tokens(0).tolist() == [5, 9, 9, 8]
        assert receipt.tokens_removed == 2 and receipt.tokens_inserted == 2
        assert (receipt.version_before, receipt.version_after) == (0, 1)

    def test_requires_lock(self, tmp_path):
        ds = make_dataset(tmp_path, [[5, 6, 7, 8]])
        with pytest.raises(LockNotHeld):
            overwrite_sequence(ds, 0, 0, [1])

    def test_empty_tokens_bumps_version_without_byte_changes(self, tmp_path):
        ds = make_dataset(tmp_path, [[5, 6, 7, 8]])
        before = ds.paths.bin.read_bytes()
        with ds.lock:
            receipt = overwrite_sequence(ds, 0, 2, [])
        assert ds.paths.bin.read_bytes() == before
        assert receipt.version_after == 1
        assert read_version(ds.paths) == 1

    def test_byte_diff_confined_to_target_range(self, tmp_path):
        docs = random_docs(np.random.default_rng(0), 20)
        ds = make_dataset(tmp_path, docs)
        before = bytearray(ds.paths.bin.read_bytes())
        seq_id, offset, payload = 7, 2, [60001, 60002]
        assert len(docs[seq_id]) >= offset + len(payload)
        with ds.lock:
            overwrite_sequence(ds, seq_id, offset, payload)
        after = bytearray(ds.paths.bin.read_bytes())
        start = int(ds.index.pointers[seq_id]) + offset * 2
        end = start + len(payload) * 2
        assert after[:start] == before[:start]
        assert after[end:] == before[end:]
        assert after[start:end] != before[start:end]

    def test_idx_untouched(self, tmp_path):
        ds = make_dataset(tmp_path, [[1, 2, 3]])
        idx_before = ds.paths.idx.read_bytes()
        with ds.lock:
            overwrite_sequence(ds, 0, 0, [4, 5])
        assert ds.paths.idx.read_bytes() == idx_before

    def test_bounds_and_overflow(self, tmp_path):
        ds = make_dataset(tmp_path, [[1, 2, 3]])
        with ds.lock:
            with pytest.raises(SliceOutOfRange):
                overwrite_sequence(ds, 0, 2, [9, 9])
            with pytest.raises(SliceOutOfRange):
                overwrite_sequence(ds, 5, 0, [9])
            with pytest.raises(TokenOverflowsDType):
                overwrite_sequence(ds, 0, 0, [70000])

    def test_journal_appended(self, tmp_path):
        ds = make_dataset(tmp_path, [[1, 2, 3]])
        with ds.lock:
            overwrite_sequence(ds, 0, 0, [9])
            overwrite_sequence(ds, 0, 1, [8])
        journal = read_journal(ds.paths)
        assert [e["version_after"] for e in journal] == [1, 2]
        assert journal[0]["edit_kind"] == "overwrite"


class TestSplice:
    def test_noop_is_token_identical(self, tmp_path):
        docs = random_docs(np.random.default_rng(1), 10)
        ds = make_dataset(tmp_path, docs)
        out, receipt = splice_sequence(ds, 3, 1, 0, [], out_prefix=str(tmp_path / "noop"))
        new = Dataset(out.prefix)
        for i in range(new.document_count):
            assert new.fetch_document(i)[0].tolist() == docs[i]
        assert receipt.tokens_removed == 0 and receipt.tokens_inserted == 0

    def test_grow_shifts_later_pointers(self, tmp_path):
        ds = make_dataset(tmp_path, [[1, 2, 3], [7, 7]])
        out, _ = splice_sequence(ds, 0, 1, 1, [9, 9], out_prefix=str(tmp_path / "grown"))
        new = Dataset(out.prefix)
        assert new.fetch_tokens(0).tolist() == [1, 9, 9, 3]
        assert new.index.lengths.tolist() == [4, 2]
        assert new.index.pointers.tolist() == [0, 8]
        assert new.fetch_tokens(1).tolist() == [7, 7]

    def test_original_untouched(self, tmp_path):
        ds = make_dataset(tmp_path, [[1, 2, 3], [7, 7]])
        bin_before = ds.paths.bin.read_bytes()
        idx_before = ds.paths.idx.read_bytes()
        splice_sequence(ds, 0, 0, 2, [5], out_prefix=str(tmp_path / "new"))
        assert ds.paths.bin.read_bytes() == bin_before
        assert ds.paths.idx.read_bytes() == idx_before
        assert read_version(ds.paths) == 0

    def test_random_splices_match_list_oracle(self, tmp_path):
        rng = np.random.default_rng(2)
        for trial in range(20):
            docs = random_docs(rng, 8, max_len=12)
            ds = make_dataset(tmp_path, docs, name=f"src{trial}")
            seq_id = int(rng.integers(0, len(docs)))
            length = len(docs[seq_id])
            offset = int(rng.integers(0, length + 1))
            delete = int(rng.integers(0, length - offset + 1))
            insert = rng.integers(0, 100, size=int(rng.integers(0, 6))).tolist()
            want = splice_lists(docs, seq_id, offset, delete, insert)
            if len(want[seq_id]) == 0:
                continue
            out, _ = splice_sequence(
                ds, seq_id, offset, delete, insert, out_prefix=str(tmp_path / f"out{trial}")
            )
            new = Dataset(out.prefix)
            got = [new.fetch_document(i)[0].tolist() for i in range(new.document_count)]
            assert got == want
            # conservation
            assert new.total_tokens == ds.total_tokens - delete + len(insert)

    def test_empty_result_rejected(self, tmp_path):
        ds = make_dataset(tmp_path, [[1, 2]])
        with pytest.raises(ResultEmptySequence):
            splice_sequence(ds, 0, 0, 2, [])

    def test_new_dataset_carries_bumped_version_and_journal(self, tmp_path):
        ds = make_dataset(tmp_path, [[1, 2, 3]])
        with ds.lock:
            overwrite_sequence(ds, 0, 0, [9])
        out, receipt = splice_sequence(ds, 0, 1, 1, [5, 5], out_prefix=str(tmp_path / "derived"))
        assert receipt.version_before == 1 and receipt.version_after == 2
        assert read_version(out) == 2
        journal = read_journal(out)
        assert [e["edit_kind"] for e in journal] == ["overwrite", "splice"]


class TestInject:
    def _dataset_with_order(self, tmp_path, doc_len=6, n_docs=8, seq_len=9):
        docs = [list(range(i * 100, i * 100 + doc_len)) for i in range(n_docs)]
        ds = make_dataset(tmp_path, docs)
        order = build_order(ds, OrderConfig(seed=4, seq_len=seq_len, batch_size=1))
        return ds, order

    def test_inside_one_span(self, tmp_path):
        ds, order = self._dataset_with_order(tmp_path, doc_len=30, n_docs=2, seq_len=9)
        with ds.lock:
            receipts = inject_into_sample(ds, order, 0, 2, [901, 902])
        assert len(receipts) == 1
        assert receipts[0].edit_kind == "inject"
        step = int(np.nonzero(order.shuffle == 0)[0][0])  # batch_size is 1
        batch = get_batch_view(ds, order, step)
        sample = next(s for s in batch.samples if s.sample_id == 0)
        assert sample.tokens[2:4].tolist() == [901, 902]

    def test_across_document_boundary(self, tmp_path):
        ds, order = self._dataset_with_order(tmp_path, doc_len=6, n_docs=8, seq_len=9)
        # find a sample whose spans straddle sequences
        target = next(
            sid
            for sid in range(order.num_samples)
            if len(resolve_sample(order, ds, sid)) > 1
        )
        payload = [911, 912, 913, 914, 915, 916, 917, 918]
        with ds.lock:
            receipts = inject_into_sample(ds, order, target, 1, payload)
        assert len(receipts) >= 2
        batch = get_batch_view(ds, order, int(np.nonzero(order.shuffle == target)[0][0]))
        sample = next(s for s in batch.samples if s.sample_id == target)
        assert sample.tokens[1 : 1 + len(payload)].tolist() == payload

    def test_empty_injection_single_receipt(self, tmp_path):
        ds, order = self._dataset_with_order(tmp_path)
        bin_before = ds.paths.bin.read_bytes()
        with ds.lock:
            receipts = inject_into_sample(ds, order, 0, 3, [])
        assert len(receipts) == 1
        assert ds.paths.bin.read_bytes() == bin_before
        assert receipts[0].version_after == 1

    def test_too_long(self, tmp_path):
        ds, order = self._dataset_with_order(tmp_path, seq_len=9)
        with ds.lock:
            with pytest.raises(SliceOutOfRange):
                inject_into_sample(ds, order, 0, 5, list(range(6)))  # 5 + 6 > 10

    def test_receipts_record_sample(self, tmp_path):
        ds, order = self._dataset_with_order(tmp_path)
        with ds.lock:
            receipts = inject_into_sample(ds, order, 2, 0, [42])
        entry = read_journal(ds.paths)[-1]
        assert entry["sample_id"] == 2
        assert entry["edit_kind"] == "inject"
        assert receipts[0].target_kind == "sequence"
