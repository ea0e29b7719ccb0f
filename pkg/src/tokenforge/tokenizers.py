"""Pluggable text<->token boundary.

A tokenizer is any ``str -> list[int]`` callable and a detokenizer any
``sequence[int] -> str`` callable. The toolkit ships only the byte-level
pair (token id = byte value), which is enough for desk-scale work; real
subword vocabularies plug in through the same two callables.
"""

from __future__ import annotations

from typing import Callable, Iterable

Tokenizer = Callable[[str], list[int]]
Detokenizer = Callable[[Iterable[int]], str]


def byte_tokenize(text: str) -> list[int]:
    return list(text.encode("utf-8"))


def byte_detokenize(tokens: Iterable[int]) -> str:
    return bytes(int(t) & 0xFF for t in tokens).decode("utf-8", errors="replace")


_TOKENIZERS: dict[str, Tokenizer] = {"byte": byte_tokenize}
_DETOKENIZERS: dict[str, Detokenizer] = {"byte": byte_detokenize}


def register(name: str, tokenizer: Tokenizer, detokenizer: Detokenizer | None = None) -> None:
    _TOKENIZERS[name] = tokenizer
    if detokenizer is not None:
        _DETOKENIZERS[name] = detokenizer


def get_tokenizer(name: str | None) -> Tokenizer | None:
    if name is None:
        return None
    try:
        return _TOKENIZERS[name]
    except KeyError:
        raise KeyError(f"no tokenizer registered under {name!r}") from None


def get_detokenizer(name: str | None) -> Detokenizer | None:
    if name is None:
        return None
    try:
        return _DETOKENIZERS[name]
    except KeyError:
        raise KeyError(f"no detokenizer registered under {name!r}") from None
