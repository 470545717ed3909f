"""Byte-level compilation of a grammar and a byte trie over a vocabulary.

Each production is flattened into a code sequence: values 0-255 are literal
bytes (terminal bytes and separator bytes), values >= 256 are nonterminals
(``256 + index``).  A dotted rule is a position in the concatenation of all
code sequences, each followed by an end marker; ``dr_next[pos]`` is the code
after the dot, or -1 when the rule is complete.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .source import Grammar
from ..vocab import Vocabulary

NT_BASE = 256


@dataclass(frozen=True, eq=False)
class ByteTables:
    dr_next: np.ndarray     # int32[npos]
    dr_lhs: np.ndarray      # int32[npos]
    pred_start: np.ndarray  # int32[n_nt + 1], CSR offsets into pred_pos
    pred_pos: np.ndarray    # int32, dotted-rule start of each production
    nullable: np.ndarray    # uint8[n_nt]
    start: int
    names: tuple[str, ...]
    # (terminal, bytes of it already matched) for dots strictly inside a terminal
    inside_terminal: tuple = ()

    @property
    def npos(self) -> int:
        return len(self.dr_next)


def compile_tables(g: Grammar) -> ByteTables:
    index = {name: i for i, name in enumerate(g.nonterminals)}
    sep = list(g.implicit_separator)
    codes_per_prod: list[tuple[int, list[int]]] = []
    inside: list = []
    for p in g.productions:
        codes: list[int] = []
        marks: list = []
        for i, sym in enumerate(p.rhs):
            if i and not p.glue[i - 1]:
                codes.extend(sep)
                marks.extend([None] * len(sep))
            if isinstance(sym, bytes):
                codes.extend(sym)
                marks.extend([None] + [(sym, k) for k in range(1, len(sym))])
            else:
                codes.append(NT_BASE + index[sym])
                marks.append(None)
        codes_per_prod.append((index[p.lhs], codes))
        inside.extend(marks + [None])

    dr_next: list[int] = []
    dr_lhs: list[int] = []
    starts: list[list[int]] = [[] for _ in g.nonterminals]
    for lhs, codes in codes_per_prod:
        starts[lhs].append(len(dr_next))
        dr_next.extend(codes)
        dr_next.append(-1)
        dr_lhs.extend([lhs] * (len(codes) + 1))

    nullable = [False] * len(g.nonterminals)
    changed = True
    while changed:
        changed = False
        for lhs, codes in codes_per_prod:
            if not nullable[lhs] and all(
                    c >= NT_BASE and nullable[c - NT_BASE] for c in codes):
                nullable[lhs] = True
                changed = True

    pred_start = [0]
    pred_pos: list[int] = []
    for s in starts:
        pred_pos.extend(s)
        pred_start.append(len(pred_pos))
    return ByteTables(
        dr_next=np.array(dr_next, dtype=np.int32),
        dr_lhs=np.array(dr_lhs, dtype=np.int32),
        pred_start=np.array(pred_start, dtype=np.int32),
        pred_pos=np.array(pred_pos, dtype=np.int32),
        nullable=np.array(nullable, dtype=np.uint8),
        start=index[g.start],
        names=tuple(g.nonterminals),
        inside_terminal=tuple(inside),
    )


@dataclass(frozen=True, eq=False)
class VocabTrie:
    """Byte trie over all non-EOS tokens, children stored in CSR form."""
    child_start: np.ndarray  # int32[n_nodes + 1]
    child_byte: np.ndarray   # int32[n_edges]
    child_node: np.ndarray   # int32[n_edges]
    node_token: np.ndarray   # int32[n_nodes], token id ending here or -1
    depth: int
    n_tokens: int


def build_trie(vocab: Vocabulary) -> VocabTrie:
    children: list[dict[int, int]] = [{}]
    node_token = [-1]
    for tid, tok in enumerate(vocab.tokens):
        if tid == vocab.eos_id:
            continue
        node = 0
        for b in tok:
            nxt = children[node].get(b)
            if nxt is None:
                nxt = len(children)
                children[node][b] = nxt
                children.append({})
                node_token.append(-1)
            node = nxt
        node_token[node] = tid
    child_start = [0]
    child_byte: list[int] = []
    child_node: list[int] = []
    for ch in children:
        for b in sorted(ch):
            child_byte.append(b)
            child_node.append(ch[b])
        child_start.append(len(child_byte))
    return VocabTrie(
        child_start=np.array(child_start, dtype=np.int32),
        child_byte=np.array(child_byte, dtype=np.int32),
        child_node=np.array(child_node, dtype=np.int32),
        node_token=np.array(node_token, dtype=np.int32),
        depth=vocab.max_token_len,
        n_tokens=len(vocab),
    )
