"""Constrained beam search with progress banks and round-robin selection."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .constraints import (
    CompiledConstraint,
    ConstraintSpec,
    ConstraintState,
    compile_constraint,
    load_palettes,
)
from .errors import ConstraintError, UnsatisfiableError
from .provider import state_key
from .vocab import detokenize


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]
    score: float
    constraint_states: tuple[ConstraintState, ...]
    bank: int
    finished: bool = False
    text: str = ""

    @property
    def fulfilled(self) -> bool:
        return all(s.fulfilled for s in self.constraint_states)

    def sort_key(self):
        return (-self.score, self.tokens)


def _compile_all(constraints, vocab) -> list[CompiledConstraint]:
    out = []
    for c in constraints:
        out.append(c if isinstance(c, CompiledConstraint) else compile_constraint(c, vocab))
    return out


def _top_tokens(lp: np.ndarray, k: int) -> list[int]:
    finite = np.flatnonzero(np.isfinite(lp))
    if len(finite) <= k:
        chosen = finite
    else:
        # stable ordering: higher logprob first, then lower token id
        chosen = finite[np.lexsort((finite, -lp[finite]))][:k]
    return [int(t) for t in chosen]


def _round_robin(candidates: list[Hypothesis], width: int) -> list[Hypothesis]:
    banks: dict[int, list[Hypothesis]] = {}
    for h in candidates:
        banks.setdefault(h.bank, []).append(h)
    order = sorted(banks, reverse=True)
    for b in order:
        banks[b].sort(key=Hypothesis.sort_key)
    selected: list[Hypothesis] = []
    cursor = {b: 0 for b in order}
    while len(selected) < width:
        progressed = False
        for b in order:
            if cursor[b] < len(banks[b]) and len(selected) < width:
                selected.append(banks[b][cursor[b]])
                cursor[b] += 1
                progressed = True
        if not progressed:
            break
    return selected


def beam_search(provider, constraints: Sequence[ConstraintSpec | CompiledConstraint],
                width: int = 8, max_tokens: int = 24, seed: int = 0,
                context: Sequence[int] = (), recombine: bool = True) -> list[Hypothesis]:
    """Beam decoding whose results contain every constraint.

    Per step, each hypothesis proposes its ``width`` best next tokens plus the
    next token each unfulfilled constraint needs.  Candidates are grouped into
    banks by constraint steps completed and the beam is refilled round-robin,
    most-complete bank first.  With ``recombine``, candidates whose provider
    state and constraint states coincide are merged, keeping the best.

    ``seed`` is accepted for interface symmetry; the search is deterministic.
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    vocab = provider.vocab
    eos = vocab.eos_id
    compiled = _compile_all(constraints, vocab)
    ctx = tuple(int(t) for t in context)

    def bank_of(states):
        return sum(c.steps_done(s) for c, s in zip(compiled, states))

    init_states = tuple(c.initial() for c in compiled)
    beam = [Hypothesis((), 0.0, init_states, bank_of(init_states))]
    finished: list[Hypothesis] = []
    best_partial = beam[0]

    for _ in range(max_tokens):
        pool: dict = {}
        plain: list[Hypothesis] = []
        for h in beam:
            lp = provider.next_logprobs(ctx + h.tokens)
            proposals = _top_tokens(lp, width)
            seen = set(proposals)
            for c, s in zip(compiled, h.constraint_states):
                forced = c.next_token(s)
                if forced is not None and forced not in seen and np.isfinite(lp[forced]):
                    seen.add(forced)
                    proposals.append(forced)
            for t in proposals:
                score = h.score + float(lp[t])
                tokens = h.tokens + (t,)
                if t == eos:
                    if h.fulfilled:
                        finished.append(Hypothesis(tokens, score, h.constraint_states,
                                                   h.bank, True))
                    continue
                states = tuple(c.advance(s, t) for c, s in zip(compiled, h.constraint_states))
                cand = Hypothesis(tokens, score, states, bank_of(states))
                if recombine:
                    key = (state_key(provider, ctx + tokens), states)
                    prev = pool.get(key)
                    if prev is None or cand.sort_key() < prev.sort_key():
                        pool[key] = cand
                else:
                    plain.append(cand)
        candidates = list(pool.values()) if recombine else plain
        if not candidates:
            beam = []
            break
        beam = _round_robin(candidates, width)
        top = max(beam, key=lambda h: (h.bank, h.score))
        if (top.bank, top.score) > (best_partial.bank, best_partial.score) or not best_partial.tokens:
            best_partial = top

    results = finished + [h for h in beam if h.fulfilled]
    if not results:
        best = Hypothesis(best_partial.tokens, best_partial.score,
                          best_partial.constraint_states, best_partial.bank,
                          text=detokenize(best_partial.tokens, vocab))
        raise UnsatisfiableError(
            f"no hypothesis fulfilled all {len(compiled)} constraint(s) within "
            f"{max_tokens} tokens; best partial {best.text!r}", best)
    results.sort(key=Hypothesis.sort_key)
    return [Hypothesis(h.tokens, h.score, h.constraint_states, h.bank, h.finished,
                       detokenize(h.tokens, vocab)) for h in results]


def seasonal_series(provider, anchor: ConstraintSpec, palette_sequence: Sequence[str],
                    width: int = 8, palette_table: Mapping | None = None,
                    max_tokens: int = 24, context: Sequence[int] = ()) -> list[Hypothesis]:
    """One best prompt per palette, each keeping the same subject anchor."""
    if anchor.kind != "subject_anchor":
        raise ConstraintError("anchor must be a subject_anchor constraint")
    table = load_palettes() if palette_table is None else palette_table
    anchor_c = compile_constraint(anchor, provider.vocab)
    out = []
    for name in palette_sequence:
        colour = ConstraintSpec.color_patterns(name, table)
        results = beam_search(provider, [anchor_c, colour], width=width,
                              max_tokens=max_tokens, context=context)
        out.append(results[0])
    return out
