"""Path conventions: one dataset = a shared path prefix plus fixed suffixes."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class DatasetPaths:
    """All on-disk artifacts of one dataset, derived from its path prefix."""

    prefix: str

    @classmethod
    def of(cls, prefix: "str | os.PathLike | DatasetPaths") -> "DatasetPaths":
        if isinstance(prefix, DatasetPaths):
            return prefix
        return cls(os.fspath(prefix))

    @property
    def bin(self) -> Path:
        return Path(self.prefix + ".bin")

    @property
    def idx(self) -> Path:
        return Path(self.prefix + ".idx")

    @property
    def lock(self) -> Path:
        return Path(str(self.idx) + ".lock")

    @property
    def version(self) -> Path:
        return Path(str(self.idx) + ".version")

    @property
    def journal(self) -> Path:
        return Path(str(self.idx) + ".edits.jsonl")

    @property
    def suffix_array(self) -> Path:
        return Path(str(self.idx) + ".sa")

    @property
    def metadata(self) -> Path:
        return Path(str(self.bin) + ".meta.jsonl")

    def order_cache(self, seed: int, seq_len: int, batch_size: int, epochs: int) -> Path:
        return Path(f"{self.idx}.order.{seed}.{seq_len}.{batch_size}.{epochs}.bin")

    def exist(self) -> bool:
        return self.bin.exists() and self.idx.exists()
