"""Known-good prompt store: hashed bag-of-words embeddings and exact k-NN.

Embedding: lowercase, split into alphanumeric runs, hash each term with
64-bit FNV-1a modulo ``dimension``, count term frequencies, L2-normalize.
Empty text maps to the unit vector on bucket 0.
"""
from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatchError, DuplicateIdError, UnknownIdError

DEFAULT_DIMENSION = 256
SCORE_DECIMALS = 12

_TERM_RE = re.compile(r"[^\W_]+", re.UNICODE)
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def terms(text: str) -> list[str]:
    return _TERM_RE.findall(text.lower())


def embed(text: str, dimension: int = DEFAULT_DIMENSION) -> np.ndarray:
    vec = np.zeros(dimension, dtype=np.float64)
    for term in terms(text):
        vec[fnv1a_64(term.encode("utf-8")) % dimension] += 1.0
    norm = np.sqrt(np.sum(vec * vec))
    if norm == 0.0:
        vec[0] = 1.0
        return vec
    return vec / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * b) / (np.sqrt(np.sum(a * a)) * np.sqrt(np.sum(b * b))))


def rank_by_similarity(matrix: np.ndarray, keys: Sequence[str], query: np.ndarray,
                       k: int) -> list[int]:
    """Row indices of the ``k`` rows most similar to ``query``.

    Scores are rounded to 1e-12 so mathematically tied rows fall back to key
    order instead of floating-point noise.
    """
    if k <= 0 or len(keys) == 0:
        return []
    scores = np.round(np.sum(matrix * query[None, :], axis=1), SCORE_DECIMALS)
    order = sorted(range(len(keys)), key=lambda i: (-scores[i], keys[i]))
    return order[:k]


@dataclass(frozen=True)
class PromptExample:
    id: str
    text: str
    tags: tuple[str, ...] = ()
    quality: float = 1.0
    embedding: np.ndarray | None = field(default=None, compare=False, repr=False)

    def to_json(self) -> dict:
        return {"id": self.id, "text": self.text, "tags": list(self.tags),
                "quality": self.quality}


class PromptStore:
    """Id-indexed prompt collection with optional JSON-lines persistence.

    Queries read an immutable snapshot; writes are serialized by a lock and
    swap in a new snapshot, so a query never sees a half-applied write.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION, path: str | os.PathLike | None = None):
        self.dimension = dimension
        self.path = path
        self._lock = threading.Lock()
        self._examples: dict[str, PromptExample] = {}
        self._snapshot: tuple[tuple[str, ...], np.ndarray, tuple[PromptExample, ...]] = (
            (), np.zeros((0, dimension)), ())

    def __len__(self) -> int:
        return len(self._snapshot[0])

    def __contains__(self, example_id: str) -> bool:
        return example_id in self._examples

    def get(self, example_id: str) -> PromptExample:
        try:
            return self._examples[example_id]
        except KeyError:
            raise UnknownIdError(example_id) from None

    @property
    def examples(self) -> tuple[PromptExample, ...]:
        return self._snapshot[2]

    def _rebuild(self) -> None:
        ids = tuple(sorted(self._examples))
        exs = tuple(self._examples[i] for i in ids)
        matrix = (np.vstack([e.embedding for e in exs]) if exs
                  else np.zeros((0, self.dimension)))
        self._snapshot = (ids, matrix, exs)

    def _prepare(self, example: PromptExample) -> PromptExample:
        if example.embedding is None:
            return PromptExample(example.id, example.text, tuple(example.tags),
                                 float(example.quality), embed(example.text, self.dimension))
        if len(example.embedding) != self.dimension:
            raise DimensionMismatchError(
                f"embedding has dimension {len(example.embedding)}, store uses {self.dimension}")
        return example

    def add_example(self, example: PromptExample, persist: bool = True) -> "PromptStore":
        example = self._prepare(example)
        with self._lock:
            if example.id in self._examples:
                raise DuplicateIdError(example.id)
            self._examples[example.id] = example
            self._rebuild()
            if persist and self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(example.to_json()) + "\n")
        return self

    def add_many(self, examples: Iterable[PromptExample]) -> "PromptStore":
        prepared = [self._prepare(e) for e in examples]
        with self._lock:
            for e in prepared:
                if e.id in self._examples:
                    raise DuplicateIdError(e.id)
            ids = [e.id for e in prepared]
            if len(set(ids)) != len(ids):
                raise DuplicateIdError("duplicate ids within batch")
            for e in prepared:
                self._examples[e.id] = e
            self._rebuild()
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    for e in prepared:
                        fh.write(json.dumps(e.to_json()) + "\n")
        return self

    def remove_example(self, example_id: str) -> "PromptStore":
        with self._lock:
            if example_id not in self._examples:
                raise UnknownIdError(example_id)
            del self._examples[example_id]
            self._rebuild()
            if self.path is not None:
                self._write_all(self.path)
        return self

    def _write_all(self, path) -> None:
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            for e in self._snapshot[2]:
                fh.write(json.dumps(e.to_json()) + "\n")
        os.replace(tmp, path)

    def save(self, path=None) -> None:
        with self._lock:
            self._write_all(path or self.path)

    @classmethod
    def load(cls, path, dimension: int = DEFAULT_DIMENSION) -> "PromptStore":
        """Read a JSON-lines store; embeddings are recomputed, never read."""
        store = cls(dimension, path)
        examples = []
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        obj = json.loads(line)
                        examples.append(PromptExample(
                            str(obj["id"]), obj["text"], tuple(obj.get("tags", ())),
                            float(obj.get("quality", 1.0))))
        prepared = [store._prepare(e) for e in examples]
        for e in prepared:
            if e.id in store._examples:
                raise DuplicateIdError(e.id)
            store._examples[e.id] = e
        store._rebuild()
        return store


def add_example(store: PromptStore, example: PromptExample) -> PromptStore:
    return store.add_example(example)


def remove_example(store: PromptStore, example_id: str) -> PromptStore:
    return store.remove_example(example_id)


def knn(store: PromptStore, query: str, k: int) -> list[PromptExample]:
    """Top-k examples by cosine similarity; ties go to the smaller id."""
    if k < 0:
        raise ValueError("k must be >= 0")
    ids, matrix, exs = store._snapshot
    order = rank_by_similarity(matrix, ids, embed(query, store.dimension), k)
    return [exs[i] for i in order]


def assemble_context(instruction: str, store: PromptStore, query: str, k: int = 5) -> str:
    """Instruction, retrieved examples, then the request, blank-line separated."""
    sections = [instruction]
    for i, ex in enumerate(knn(store, query, k), start=1):
        sections.append(f"Example {i}: {ex.text}")
    sections.append(f"Request: {query}")
    return "\n\n".join(sections)
