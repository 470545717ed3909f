"""Keeps forbidden words out of generated text, including across token joins.

A token is statically forbidden when its own text contains a word.  A word can
also be assembled from pieces ("r" + "ed"), so given the text generated so far
:meth:`WordGuard.blocked` also returns the tokens that would complete a word
started at the end of that text.  Matching is ASCII case-insensitive.
"""
from __future__ import annotations

from typing import Iterable

from .vocab import Vocabulary, to_bytes


class WordGuard:
    def __init__(self, vocab: Vocabulary, words: Iterable[str]):
        self.vocab = vocab
        self.words = tuple(sorted({to_bytes(w).lower() for w in words if w}))
        lowered = [t.lower() for t in vocab.tokens]
        eos = vocab.eos_id
        self.static = frozenset(
            tid for tid, tok in enumerate(lowered)
            if tid != eos and any(w in tok for w in self.words))
        # (word, k) -> tokens starting with word[k:]  (word[:k] already written)
        self._completers: dict[tuple[bytes, int], frozenset[int]] = {}
        for w in self.words:
            for k in range(1, len(w)):
                rest = w[k:]
                ids = frozenset(tid for tid, tok in enumerate(lowered)
                                if tid != eos and tok.startswith(rest))
                if ids:
                    self._completers[(w, k)] = ids
        self.max_len = max((len(w) for w in self.words), default=0)

    def __bool__(self) -> bool:
        return bool(self.words)

    def blocked(self, generated: bytes) -> frozenset[int]:
        """Static set plus tokens that would finish a word begun in ``generated``."""
        if not self.words:
            return frozenset()
        tail = generated[-(self.max_len - 1):].lower() if self.max_len > 1 else b""
        extra: set[int] = set()
        for (w, k), ids in self._completers.items():
            if tail.endswith(w[:k]):
                extra |= ids
        return self.static | extra if extra else self.static

    def violates(self, text: str | bytes) -> bool:
        low = to_bytes(text).lower()
        return any(w in low for w in self.words)
