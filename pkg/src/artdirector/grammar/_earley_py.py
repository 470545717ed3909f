"""Pure-Python Earley kernel.

A column is a tuple of packed items ``origin * npos + pos``.  The compiled
extension ``_earley_ext`` implements the same functions with numpy columns.
"""
from __future__ import annotations

import numpy as np

NAME = "python"


class Tables:
    __slots__ = ("dr_next", "dr_lhs", "pred", "nullable", "start", "npos")

    def __init__(self, bt):
        self.dr_next = bt.dr_next.tolist()
        self.dr_lhs = bt.dr_lhs.tolist()
        ps, pp = bt.pred_start.tolist(), bt.pred_pos.tolist()
        self.pred = [pp[ps[a]:ps[a + 1]] for a in range(len(ps) - 1)]
        self.nullable = [bool(x) for x in bt.nullable]
        self.start = bt.start
        self.npos = bt.npos


class Trie:
    __slots__ = ("children", "node_token", "n_tokens")

    def __init__(self, trie):
        cs = trie.child_start.tolist()
        cb = trie.child_byte.tolist()
        cn = trie.child_node.tolist()
        self.children = [list(zip(cb[cs[i]:cs[i + 1]], cn[cs[i]:cs[i + 1]]))
                         for i in range(len(cs) - 1)]
        self.node_token = trie.node_token.tolist()
        self.n_tokens = trie.n_tokens


def prepare(byte_tables) -> Tables:
    return Tables(byte_tables)


def prepare_trie(trie) -> Trie:
    return Trie(trie)


def _closure(t: Tables, columns, k: int, items: list, seen: set) -> None:
    npos = t.npos
    dr_next, dr_lhs, pred, nullable = t.dr_next, t.dr_lhs, t.pred, t.nullable
    base = k * npos
    i = 0
    while i < len(items):
        item = items[i]
        i += 1
        origin, pos = divmod(item, npos)
        nx = dr_next[pos]
        if nx == -1:
            if origin == k:
                continue  # nullable completions were advanced at prediction
            target = 256 + dr_lhs[pos]
            for it2 in columns[origin]:
                p2 = it2 % npos
                if dr_next[p2] == target:
                    new = it2 + 1
                    if new not in seen:
                        seen.add(new)
                        items.append(new)
        elif nx >= 256:
            a = nx - 256
            for p in pred[a]:
                new = base + p
                if new not in seen:
                    seen.add(new)
                    items.append(new)
            if nullable[a]:
                new = item + 1
                if new not in seen:
                    seen.add(new)
                    items.append(new)


def initial_column(t: Tables) -> tuple:
    items = list(t.pred[t.start])
    seen = set(items)
    _closure(t, (), 0, items, seen)
    return tuple(items)


def _step(t: Tables, columns, b: int):
    k = len(columns)
    npos = t.npos
    dr_next = t.dr_next
    items = [it + 1 for it in columns[-1] if dr_next[it % npos] == b]
    if not items:
        return None
    seen = set(items)
    _closure(t, columns, k, items, seen)
    return tuple(items)


def advance(t: Tables, columns, b: int):
    """Column after consuming byte ``b``, or None if no item can scan it."""
    return _step(t, columns, b)


def is_complete(t: Tables, column) -> bool:
    npos, start = t.npos, t.start
    dr_next, dr_lhs = t.dr_next, t.dr_lhs
    for it in column:
        if it < npos and dr_next[it] == -1 and dr_lhs[it] == start:
            return True
    return False


def mask_walk(t: Tables, columns, trie: Trie) -> np.ndarray:
    """Boolean array: token id -> its bytes keep the recognizer alive."""
    out = np.zeros(trie.n_tokens, dtype=bool)
    cols = list(columns)
    children, node_token = trie.children, trie.node_token

    def visit(node: int) -> None:
        for b, child in children[node]:
            col = _step(t, cols, b)
            if col is None:
                continue
            tok = node_token[child]
            if tok >= 0:
                out[tok] = True
            if children[child]:
                cols.append(col)
                visit(child)
                cols.pop()

    visit(0)
    return out


def canonical(column) -> frozenset:
    return frozenset(int(x) for x in column)
