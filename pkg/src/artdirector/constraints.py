"""Sequence-level constraints tracked token by token.

Each constraint is a set of alternative token sequences; it is fulfilled once
any alternative occurs contiguously.  Progress per alternative follows the
KMP automaton, so overlapping partial matches are never lost.

A phrase compiles to two spellings: with a leading space, which can start
anywhere, and bare, which can only open the sequence.  Matches therefore
always begin on a word boundary.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Sequence

from .errors import ConstraintError, EmptyPhraseError, UnknownPaletteError
from .vocab import Vocabulary, tokenize

KINDS = ("phrasal", "disjunctive", "color_patterns", "subject_anchor")


def load_palettes(path=None) -> dict[str, list[str]]:
    """Palette table from a JSON file, or the packaged default."""
    if path is None:
        text = resources.files("artdirector.data").joinpath("palettes.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    table = json.loads(text)
    return {str(k): [str(p) for p in v] for k, v in table.items()}


@dataclass(frozen=True)
class ConstraintSpec:
    kind: str
    phrases: tuple[str, ...] = ()
    palette: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConstraintError(f"unknown constraint kind {self.kind!r}")
        object.__setattr__(self, "phrases", tuple(self.phrases))

    @classmethod
    def phrasal(cls, phrase: str) -> "ConstraintSpec":
        return cls("phrasal", (phrase,))

    @classmethod
    def disjunctive(cls, phrases: Sequence[str]) -> "ConstraintSpec":
        return cls("disjunctive", tuple(phrases))

    @classmethod
    def subject_anchor(cls, phrase: str) -> "ConstraintSpec":
        return cls("subject_anchor", (phrase,))

    @classmethod
    def color_patterns(cls, palette: str,
                       table: Mapping[str, Sequence[str]] | None = None) -> "ConstraintSpec":
        table = load_palettes() if table is None else table
        if palette not in table:
            raise UnknownPaletteError(palette)
        return cls("color_patterns", tuple(table[palette]), palette)

    @classmethod
    def from_json(cls, obj: Mapping, table: Mapping | None = None) -> "ConstraintSpec":
        kind = obj.get("kind")
        if kind == "color_patterns":
            if "palette" in obj:
                return cls.color_patterns(obj["palette"], table)
            return cls("color_patterns", tuple(obj.get("phrases", ())))
        phrases = obj.get("phrases")
        if phrases is None and "phrase" in obj:
            phrases = [obj["phrase"]]
        return cls(kind, tuple(phrases or ()))


@dataclass(frozen=True)
class ConstraintState:
    progress: tuple[int, ...]
    fulfilled: bool = False
    started: bool = False  # at least one token consumed


def _failure(seq: Sequence[int]) -> list[int]:
    fail = [0] * len(seq)
    k = 0
    for i in range(1, len(seq)):
        while k and seq[i] != seq[k]:
            k = fail[k - 1]
        if seq[i] == seq[k]:
            k += 1
        fail[i] = k
    return fail


@dataclass(frozen=True, eq=False)
class CompiledConstraint:
    spec: ConstraintSpec
    alternatives: tuple[tuple[int, ...], ...]
    _fail: tuple[tuple[int, ...], ...] = field(repr=False, default=())
    # leading[i]: alternative i may only begin at the first token
    leading: tuple[bool, ...] = ()

    @property
    def reusable(self) -> bool:
        return self.spec.kind == "subject_anchor"

    @property
    def total_steps(self) -> int:
        return min(len(a) for a in self.alternatives)

    def initial(self) -> ConstraintState:
        return ConstraintState((0,) * len(self.alternatives))

    def advance(self, state: ConstraintState, token: int) -> ConstraintState:
        if state.fulfilled:
            return state
        progress = []
        for i, (alt, fail, k) in enumerate(zip(self.alternatives, self._fail, state.progress)):
            while k and alt[k] != token:
                k = fail[k - 1]
            if alt[k] == token and (k or not (state.started and self._leading(i))):
                k += 1
            if k == len(alt):
                return ConstraintState(tuple(len(a) for a in self.alternatives), True, True)
            progress.append(k)
        return ConstraintState(tuple(progress), False, True)

    def _leading(self, i: int) -> bool:
        return bool(self.leading) and self.leading[i]

    def steps_done(self, state: ConstraintState) -> int:
        if state.fulfilled:
            return self.total_steps
        # a longer alternative can get ahead of the shortest one; cap below done
        return min(max(state.progress), self.total_steps - 1)

    def next_token(self, state: ConstraintState) -> int | None:
        """Next token of the most advanced alternative (first on ties)."""
        if state.fulfilled:
            return None
        open_ = [i for i in range(len(self.alternatives))
                 if state.progress[i] or not (state.started and self._leading(i))]
        best = max(open_, key=lambda i: (state.progress[i], -i))
        return self.alternatives[best][state.progress[best]]

    def satisfied_by(self, tokens: Sequence[int]) -> bool:
        state = self.initial()
        for t in tokens:
            state = self.advance(state, t)
        return state.fulfilled


def compile_constraint(spec: ConstraintSpec, vocab: Vocabulary) -> CompiledConstraint:
    """Tokenize every phrase, both bare and with a leading space.

    Both spellings count, so a phrase can open the prompt or follow a word.
    """
    if not spec.phrases:
        raise EmptyPhraseError(f"{spec.kind} constraint has no phrases")
    alts: dict[tuple[int, ...], bool] = {}
    for phrase in spec.phrases:
        if not phrase or not phrase.strip():
            raise EmptyPhraseError(f"empty phrase in {spec.kind} constraint")
        if phrase[0].isspace():
            variants = [(phrase, False)]
        else:
            variants = [(phrase, True), (" " + phrase, False)]
        for text, leading in variants:
            ids = tuple(tokenize(text, vocab))
            # a spelling usable anywhere wins over the same ids restricted to the start
            alts[ids] = alts.get(ids, True) and leading
    seqs = tuple(alts)
    return CompiledConstraint(spec, seqs, tuple(tuple(_failure(a)) for a in seqs),
                              tuple(alts[a] for a in seqs))
