import numpy as np
import pytest

from tokenforge import Dataset, DType, build_dataset

UINT16 = DType.from_name("uint16")

GOLDEN_DOCS = [[10, 11, 12, 13], [20], [30, 31, 32, 33, 34, 35, 36]]

# the worked example used throughout: one document, stream [1,2,1,2,3]
EXAMPLE_STREAM_DOC = [1, 2, 1, 2, 3]


def make_dataset(tmp_path, docs, dtype=UINT16, name="data"):
    prefix = str(tmp_path / name)
    build_dataset(prefix, dtype, docs)
    return Dataset(prefix)


def random_docs(rng: np.random.Generator, n_docs: int, max_len: int = 40, vocab: int = 256):
    return [
        rng.integers(0, vocab, size=int(rng.integers(1, max_len + 1))).tolist()
        for _ in range(n_docs)
    ]


@pytest.fixture
def golden_dataset(tmp_path):
    return make_dataset(tmp_path, GOLDEN_DOCS, name="golden")


@pytest.fixture
def example_dataset(tmp_path):
    return make_dataset(tmp_path, [EXAMPLE_STREAM_DOC], name="example")
