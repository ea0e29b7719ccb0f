"""Policy-driven subset selection over sequences or training samples."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import PolicyInvalid
from .format import Dataset
from .order import TrainingOrder, sample_tokens
from .rng import draw_without_replacement

KINDS = ("random_k", "length_range", "contains_ngram", "stride", "custom_predicate")

# kinds expressible over the wire; custom_predicate is library-only (no remote code)
DECLARATIVE_KINDS = ("random_k", "length_range", "contains_ngram", "stride")


@dataclass
class SamplePolicy:
    """What to select and how; ``unit`` picks the population.

    unit="sequence" walks storage sequences; unit="sample" walks training
    samples and needs an order.
    """

    kind: str
    unit: str = "sequence"
    seed: int = 0
    k: int | None = None  # random_k
    min_len: int | None = None  # length_range
    max_len: int | None = None
    ngram: list[int] | None = None  # contains_ngram
    every: int | None = None  # stride
    start: int = 0
    predicate: Callable[[np.ndarray], bool] | None = None  # custom_predicate
    params: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise PolicyInvalid(f"unknown policy kind {self.kind!r}")
        if self.unit not in ("sequence", "sample"):
            raise PolicyInvalid(f"unknown unit {self.unit!r}")
        if self.kind == "random_k" and (self.k is None or self.k < 0):
            raise PolicyInvalid("random_k requires k >= 0")
        if self.kind == "length_range":
            if self.min_len is None or self.max_len is None:
                raise PolicyInvalid("length_range requires min_len and max_len")
            if self.min_len > self.max_len or self.min_len < 0:
                raise PolicyInvalid(f"bad length range [{self.min_len}, {self.max_len}]")
        if self.kind == "contains_ngram" and not self.ngram:
            raise PolicyInvalid("contains_ngram requires a non-empty ngram")
        if self.kind == "stride" and (self.every is None or self.every < 1):
            raise PolicyInvalid("stride requires every >= 1")
        if self.kind == "custom_predicate" and self.predicate is None:
            raise PolicyInvalid("custom_predicate requires a callable")


def contains_subsequence(tokens: np.ndarray, ngram: list[int]) -> bool:
    """Adjacent-run containment check, vectorized."""
    m = len(ngram)
    if m == 0 or len(tokens) < m:
        return False
    window = np.lib.stride_tricks.sliding_window_view(tokens, m)
    return bool((window == np.asarray(ngram, dtype=tokens.dtype)).all(axis=1).any())


def sample_dataset(
    dataset: Dataset,
    policy: SamplePolicy,
    limit: int | None = None,
    order: TrainingOrder | None = None,
) -> list[int]:
    """Ids satisfying the policy: ascending for deterministic kinds, draw
    order for random_k, always deterministic under the policy seed."""
    policy.validate()
    if limit is not None and limit < 0:
        raise PolicyInvalid("limit must be >= 0")
    if policy.unit == "sample":
        if order is None:
            raise PolicyInvalid("unit='sample' requires a training order")
        population = order.num_samples
        tokens_of = lambda i: sample_tokens(order, dataset, i)
        length_of = lambda i: order.config.seq_len + 1
    else:
        population = dataset.sequence_count
        tokens_of = lambda i: dataset.fetch_tokens(i)
        length_of = lambda i: int(dataset.index.lengths[i])

    if policy.kind == "random_k":
        ids = draw_without_replacement(population, policy.k, policy.seed)
        return ids if limit is None else ids[:limit]

    if policy.kind == "stride":
        ids = range(policy.start, population, policy.every)
    elif policy.kind == "length_range":
        ids = (i for i in range(population) if policy.min_len <= length_of(i) <= policy.max_len)
    elif policy.kind == "contains_ngram":
        ids = (i for i in range(population) if contains_subsequence(tokens_of(i), policy.ngram))
    else:  # custom_predicate
        ids = (i for i in range(population) if policy.predicate(tokens_of(i)))

    out: list[int] = []
    for i in ids:
        if limit is not None and len(out) >= limit:
            break
        out.append(int(i))
    return out
