"""Byte-level vocabulary with mandatory single-byte fallback."""
from __future__ import annotations

import re
from collections import Counter
from typing import Iterable, Sequence

from .errors import UnknownTokenError, VocabularyError

_WORD_RE = re.compile(r" ?\w+", re.UNICODE)


def to_bytes(text: str | bytes) -> bytes:
    if isinstance(text, bytes):
        return text
    return text.encode("utf-8", "surrogateescape")


def to_text(data: bytes) -> str:
    return data.decode("utf-8", "surrogateescape")


class Vocabulary:
    """Dense token-id <-> byte-string table.

    Every byte value 0-255 must be a token of its own, so any byte string is
    tokenizable.  The end-of-sequence token renders as the empty string.
    """

    def __init__(self, tokens: Sequence[bytes], eos_id: int):
        self._tokens = tuple(bytes(t) for t in tokens)
        if not 0 <= eos_id < len(self._tokens):
            raise VocabularyError(f"eos_id {eos_id} out of range")
        if self._tokens[eos_id] != b"":
            raise VocabularyError("eos token must render as empty bytes")
        self.eos_id = eos_id
        index: dict[bytes, int] = {}
        for tid, tok in enumerate(self._tokens):
            if tid == eos_id:
                continue
            if not tok:
                raise VocabularyError(f"token {tid} has empty bytes")
            if tok in index:
                raise VocabularyError(f"duplicate token bytes {tok!r}")
            index[tok] = tid
        missing = [b for b in range(256) if bytes([b]) not in index]
        if missing:
            raise VocabularyError(f"no byte fallback for {len(missing)} byte values")
        self._index = index
        self.byte_fallback_ids = tuple(index[bytes([b])] for b in range(256))
        self.max_token_len = max(len(t) for t in self._tokens)

    @classmethod
    def with_words(cls, words: Iterable[str | bytes]) -> "Vocabulary":
        """Bytes 0-255 get ids 0-255, then the given words, then EOS."""
        tokens = [bytes([b]) for b in range(256)]
        seen = set(tokens)
        for w in words:
            wb = to_bytes(w)
            if len(wb) > 1 and wb not in seen:
                seen.add(wb)
                tokens.append(wb)
        tokens.append(b"")
        return cls(tokens, eos_id=len(tokens) - 1)

    @classmethod
    def from_corpus(cls, corpus: str, max_words: int | None = None,
                    extra: Iterable[str] = ()) -> "Vocabulary":
        """Word tokens (with and without a leading space) seen in ``corpus``.

        Words are ordered by descending frequency, ties alphabetically, so the
        result depends only on the corpus text.
        """
        counts = Counter(_WORD_RE.findall(corpus))
        for w in list(counts):
            # both spellings, so a word can open a line or follow a space
            counts.setdefault(w.lstrip(" "), 0)
            counts.setdefault(" " + w.lstrip(" "), 0)
        ranked = sorted(counts, key=lambda w: (-counts[w], w))
        if max_words is not None:
            ranked = ranked[:max_words]
        return cls.with_words(list(extra) + ranked)

    def __len__(self) -> int:
        return len(self._tokens)

    def __iter__(self):
        return iter(self._tokens)

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, Vocabulary) and self._tokens == other._tokens
                and self.eos_id == other.eos_id)

    def __hash__(self) -> int:
        return hash((self._tokens, self.eos_id))

    def token_bytes(self, token_id: int) -> bytes:
        if not 0 <= token_id < len(self._tokens):
            raise UnknownTokenError(token_id, len(self._tokens))
        return self._tokens[token_id]

    def token_text(self, token_id: int) -> str:
        return to_text(self.token_bytes(token_id))

    def id_of(self, token: str | bytes) -> int:
        try:
            return self._index[to_bytes(token)]
        except KeyError:
            raise KeyError(f"no token {token!r}") from None

    def get(self, token: str | bytes) -> int | None:
        return self._index.get(to_bytes(token))

    @property
    def tokens(self) -> tuple[bytes, ...]:
        return self._tokens

    def to_json(self) -> dict:
        import base64
        return {
            "eos_id": self.eos_id,
            "tokens": [base64.b64encode(t).decode("ascii") for t in self._tokens],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Vocabulary":
        import base64
        return cls([base64.b64decode(t) for t in obj["tokens"]], int(obj["eos_id"]))


def tokenize(text: str | bytes, vocab: Vocabulary) -> list[int]:
    """Greedy longest-match tokenization; never emits EOS."""
    data = to_bytes(text)
    index = vocab._index
    longest = vocab.max_token_len
    out: list[int] = []
    i, n = 0, len(data)
    while i < n:
        for length in range(min(longest, n - i), 0, -1):
            tid = index.get(data[i:i + length])
            if tid is not None:
                out.append(tid)
                i += length
                break
    return out


def detokenize_bytes(ids: Iterable[int], vocab: Vocabulary) -> bytes:
    return b"".join(vocab.token_bytes(int(t)) for t in ids)


def detokenize(ids: Iterable[int], vocab: Vocabulary) -> str:
    return to_text(detokenize_bytes(ids, vocab))
