"""Incremental byte-level recognition and valid-token masks."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .source import Grammar
from .tables import ByteTables, VocabTrie, build_trie, compile_tables
from ..errors import RejectionError
from ..vocab import Vocabulary, to_bytes

TokenMask = np.ndarray  # bool[|V|]


class CompiledGrammar:
    """Grammar plus kernel-ready tables; shareable across threads."""

    def __init__(self, grammar: Grammar, kernel=None):
        self.grammar = grammar
        self.kernel = kernel if kernel is not None else _backend.kernel
        self.tables: ByteTables = compile_tables(grammar)
        self._kt = self.kernel.prepare(self.tables)
        self._tries: dict[int, tuple[Vocabulary, VocabTrie, object]] = {}
        self._lock = threading.Lock()
        self._initial = self.kernel.initial_column(self._kt)

    def trie(self, vocab: Vocabulary):
        entry = self._tries.get(id(vocab))
        if entry is None or entry[0] is not vocab:
            trie = build_trie(vocab)
            entry = (vocab, trie, self.kernel.prepare_trie(trie))
            with self._lock:
                self._tries[id(vocab)] = entry
        return entry[2]


def compile_grammar(g: Grammar | CompiledGrammar, kernel: str | None = None) -> CompiledGrammar:
    if isinstance(g, CompiledGrammar):
        if kernel is None or g.kernel.NAME == kernel:
            return g
        g = g.grammar
    if kernel is not None:
        return CompiledGrammar(g, _backend.load(kernel))
    cached = g.__dict__.get("_compiled")
    if cached is None:
        cached = CompiledGrammar(g)
        object.__setattr__(g, "_compiled", cached)
    return cached


@dataclass(frozen=True, eq=False)
class RecognizerState:
    """Parse state after ``consumed``; a pure function of (grammar, consumed)."""
    compiled: CompiledGrammar
    consumed: bytes
    columns: tuple = field(repr=False)

    @property
    def grammar(self) -> Grammar:
        return self.compiled.grammar

    def canonical(self) -> tuple[frozenset, ...]:
        return tuple(self.compiled.kernel.canonical(c) for c in self.columns)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RecognizerState):
            return NotImplemented
        return (self.compiled.grammar == other.compiled.grammar
                and self.consumed == other.consumed
                and self.canonical() == other.canonical())

    def __hash__(self) -> int:
        return hash(self.consumed)

    @property
    def is_complete(self) -> bool:
        c = self.compiled
        return c.kernel.is_complete(c._kt, self.columns[-1])

    def partial_terminals(self) -> list[tuple[bytes, int]]:
        """Terminals the parse is currently inside of, with the byte offset reached."""
        return _partial_terminals(self)

    def accepts_prefix(self, data: bytes | str) -> bool:
        try:
            advance(self, data)
        except RejectionError:
            return False
        return True

    def viable_terminals(self) -> set[bytes]:
        """Grammar terminals that can come next, with or without the separator."""
        sep = self.grammar.implicit_separator
        out = set()
        for t in self.grammar.terminals:
            if self.accepts_prefix(t) or (sep and self.accepts_prefix(sep + t)):
                out.add(t)
        return out


def init_state(g: Grammar | CompiledGrammar) -> RecognizerState:
    c = compile_grammar(g)
    return RecognizerState(c, b"", (c._initial,))


def advance(state: RecognizerState, data: bytes | str) -> RecognizerState:
    """Consume ``data``; raises :class:`RejectionError` at the first dead byte."""
    data = to_bytes(data)
    if not data:
        return state
    c = state.compiled
    kernel, kt = c.kernel, c._kt
    cols = list(state.columns)
    for i, b in enumerate(data):
        col = kernel.advance(kt, cols, b)
        if col is None:
            raise RejectionError(len(state.consumed) + i, state.consumed + data)
        cols.append(col)
    return RecognizerState(c, state.consumed + data, tuple(cols))


def is_complete(state: RecognizerState) -> bool:
    return state.is_complete


def valid_mask(state: RecognizerState, vocab: Vocabulary) -> TokenMask:
    """Bit t is set iff token t's bytes keep the parse alive; EOS iff complete."""
    c = state.compiled
    mask = c.kernel.mask_walk(c._kt, state.columns, c.trie(vocab))
    mask = np.array(mask, dtype=bool)
    mask[vocab.eos_id] = state.is_complete
    return mask


def _partial_terminals(state: RecognizerState) -> list[tuple[bytes, int]]:
    c = state.compiled
    npos, inside = c.tables.npos, c.tables.inside_terminal
    out = {inside[item % npos] for item in c.kernel.canonical(state.columns[-1])}
    out.discard(None)
    return sorted(out)
