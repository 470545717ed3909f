# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled Earley kernel; same functions as ``_earley_py``.

Columns are sorted-by-insertion ``int64`` numpy arrays of packed items
``origin * npos + pos``.
"""
from libc.stdint cimport int64_t, int32_t
from libcpp.vector cimport vector
from libcpp.unordered_set cimport unordered_set

import numpy as np
cimport numpy as cnp

cnp.import_array()

NAME = "cython"


cdef struct ColView:
    const int64_t* data
    Py_ssize_t n


cdef class Tables:
    cdef const int32_t[::1] dr_next
    cdef const int32_t[::1] dr_lhs
    cdef const int32_t[::1] pred_start
    cdef const int32_t[::1] pred_pos
    cdef const cnp.uint8_t[::1] nullable
    cdef public int start
    cdef public int64_t npos

    def __init__(self, bt):
        self.dr_next = np.ascontiguousarray(bt.dr_next, dtype=np.int32)
        self.dr_lhs = np.ascontiguousarray(bt.dr_lhs, dtype=np.int32)
        self.pred_start = np.ascontiguousarray(bt.pred_start, dtype=np.int32)
        self.pred_pos = np.ascontiguousarray(bt.pred_pos, dtype=np.int32)
        self.nullable = np.ascontiguousarray(bt.nullable, dtype=np.uint8)
        self.start = bt.start
        self.npos = bt.npos


cdef class Trie:
    cdef const int32_t[::1] child_start
    cdef const int32_t[::1] child_byte
    cdef const int32_t[::1] child_node
    cdef const int32_t[::1] node_token
    cdef public int depth
    cdef public Py_ssize_t n_tokens

    def __init__(self, trie):
        self.child_start = np.ascontiguousarray(trie.child_start, dtype=np.int32)
        self.child_byte = np.ascontiguousarray(trie.child_byte, dtype=np.int32)
        self.child_node = np.ascontiguousarray(trie.child_node, dtype=np.int32)
        self.node_token = np.ascontiguousarray(trie.node_token, dtype=np.int32)
        self.depth = trie.depth
        self.n_tokens = trie.n_tokens


def prepare(byte_tables):
    return Tables(byte_tables)


def prepare_trie(trie):
    return Trie(trie)


cdef inline void _add(vector[int64_t]& items, unordered_set[int64_t]& seen, int64_t it):
    if seen.insert(it).second:
        items.push_back(it)


cdef void _closure(Tables t, vector[ColView]& views, Py_ssize_t k,
                   vector[int64_t]& items, unordered_set[int64_t]& seen) noexcept:
    cdef int64_t npos = t.npos
    cdef int64_t base = k * npos
    cdef size_t i = 0
    cdef int64_t item, origin, pos, it2, p2
    cdef int32_t nx, a, target
    cdef Py_ssize_t j
    cdef ColView col
    while i < items.size():
        item = items[i]
        i += 1
        origin = item // npos
        pos = item - origin * npos
        nx = t.dr_next[pos]
        if nx == -1:
            if origin == k:
                continue
            target = 256 + t.dr_lhs[pos]
            col = views[origin]
            for j in range(col.n):
                it2 = col.data[j]
                p2 = it2 % npos
                if t.dr_next[p2] == target:
                    _add(items, seen, it2 + 1)
        elif nx >= 256:
            a = nx - 256
            for j in range(t.pred_start[a], t.pred_start[a + 1]):
                _add(items, seen, base + t.pred_pos[j])
            if t.nullable[a]:
                _add(items, seen, item + 1)


cdef bint _step(Tables t, vector[ColView]& views, int b, vector[int64_t]& out) noexcept:
    cdef Py_ssize_t k = views.size()
    cdef ColView prev = views[k - 1]
    cdef unordered_set[int64_t] seen
    cdef Py_ssize_t j
    cdef int64_t it
    cdef int64_t npos = t.npos
    out.clear()
    for j in range(prev.n):
        it = prev.data[j]
        if t.dr_next[it % npos] == b:
            _add(out, seen, it + 1)
    if out.empty():
        return False
    _closure(t, views, k, out, seen)
    return True


cdef vector[ColView] _views(list columns):
    cdef vector[ColView] views
    cdef ColView v
    cdef const int64_t[::1] arr
    views.reserve(len(columns) + 64)
    for c in columns:
        arr = c
        v.n = arr.shape[0]
        v.data = &arr[0] if v.n > 0 else NULL
        views.push_back(v)
    return views


cdef object _to_array(vector[int64_t]& items):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(items.size(), dtype=np.int64)
    cdef size_t i
    for i in range(items.size()):
        out[i] = items[i]
    out.flags.writeable = False
    return out


def initial_column(Tables t):
    cdef vector[int64_t] items
    cdef unordered_set[int64_t] seen
    cdef vector[ColView] views
    cdef Py_ssize_t j
    for j in range(t.pred_start[t.start], t.pred_start[t.start + 1]):
        _add(items, seen, t.pred_pos[j])
    _closure(t, views, 0, items, seen)
    return _to_array(items)


def advance(Tables t, columns, int b):
    cdef list cols = list(columns)
    cdef vector[ColView] views = _views(cols)
    cdef vector[int64_t] out
    if not _step(t, views, b, out):
        return None
    return _to_array(out)


def is_complete(Tables t, column):
    cdef const int64_t[::1] arr = column
    cdef Py_ssize_t j
    cdef int64_t it
    for j in range(arr.shape[0]):
        it = arr[j]
        if it < t.npos and t.dr_next[it] == -1 and t.dr_lhs[it] == t.start:
            return True
    return False


cdef void _visit(Tables t, Trie tr, vector[ColView]& views,
                 vector[vector[int64_t]]& store, Py_ssize_t depth, int node,
                 cnp.uint8_t* out) noexcept:
    cdef int e, child, tok
    cdef ColView v
    for e in range(tr.child_start[node], tr.child_start[node + 1]):
        child = tr.child_node[e]
        if not _step(t, views, tr.child_byte[e], store[depth]):
            continue
        tok = tr.node_token[child]
        if tok >= 0:
            out[tok] = 1
        if tr.child_start[child + 1] > tr.child_start[child]:
            v.data = store[depth].data()
            v.n = store[depth].size()
            views.push_back(v)
            _visit(t, tr, views, store, depth + 1, child, out)
            views.pop_back()


def mask_walk(Tables t, columns, Trie trie):
    cdef list cols = list(columns)
    cdef vector[ColView] views = _views(cols)
    cdef vector[vector[int64_t]] store
    store.resize(trie.depth + 1)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(trie.n_tokens, dtype=np.uint8)
    _visit(t, trie, views, store, 0, 0, <cnp.uint8_t*> out.data)
    return out.view(bool)


def canonical(column):
    return frozenset(int(x) for x in column)
