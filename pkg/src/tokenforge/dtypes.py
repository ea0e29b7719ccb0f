"""Token payload dtypes and their on-disk codes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnknownDType

# code -> numpy dtype, little-endian on disk
_CODE_TO_NUMPY = {
    1: np.dtype("<u1"),
    2: np.dtype("<i1"),
    3: np.dtype("<i2"),
    4: np.dtype("<i4"),
    5: np.dtype("<i8"),
    6: np.dtype("<f4"),
    7: np.dtype("<f8"),
    8: np.dtype("<u2"),
}

_NAME_TO_CODE = {
    "uint8": 1,
    "int8": 2,
    "int16": 3,
    "int32": 4,
    "int64": 5,
    "float32": 6,
    "float64": 7,
    "uint16": 8,
}

INTEGER_CODES = frozenset({1, 2, 3, 4, 5, 8})


@dataclass(frozen=True)
class DType:
    """A payload element type identified by its 1-byte on-disk code."""

    code: int

    def __post_init__(self):
        if self.code not in _CODE_TO_NUMPY:
            raise UnknownDType(f"unknown dtype code {self.code}")

    @classmethod
    def from_name(cls, name: str) -> "DType":
        try:
            return cls(_NAME_TO_CODE[name])
        except KeyError:
            raise UnknownDType(f"unknown dtype name {name!r}") from None

    @property
    def numpy(self) -> np.dtype:
        return _CODE_TO_NUMPY[self.code]

    @property
    def width_bytes(self) -> int:
        return self.numpy.itemsize

    @property
    def name(self) -> str:
        return self.numpy.name

    @property
    def is_integer(self) -> bool:
        return self.code in INTEGER_CODES

    @property
    def min_token(self) -> int:
        return int(np.iinfo(self.numpy).min)

    @property
    def max_token(self) -> int:
        return int(np.iinfo(self.numpy).max)


UINT8 = DType(1)
INT32 = DType(4)
UINT16 = DType(8)


def choose_dtype(max_token_id: int) -> DType:
    """Default dtype rule for new datasets: uint16 under 65536-token vocabs, else int32."""
    return UINT16 if max_token_id < 65536 else INT32
