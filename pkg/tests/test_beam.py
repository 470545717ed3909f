import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artdirector.beam import beam_search, seasonal_series
from artdirector.constraints import (
    ConstraintSpec,
    compile_constraint,
    load_palettes,
)
from artdirector.errors import EmptyPhraseError, UnknownPaletteError, UnsatisfiableError
from artdirector.provider import train_ngram
from artdirector.vocab import Vocabulary, detokenize, tokenize

import oracles


@pytest.fixture(scope="module")
def words_vocab():
    return Vocabulary.with_words(["oak", " oak", " tree", "tree", " winter", " hues",
                                  " next", " to", "above", " above", "a", "ab"])


def feed(c, tokens):
    state = c.initial()
    for t in tokens:
        state = c.advance(state, t)
    return state


def test_phrasal_fulfilled_after_two_word_tokens(words_vocab):
    v = words_vocab
    c = compile_constraint(ConstraintSpec.phrasal("oak tree"), v)
    s1 = feed(c, [v.id_of("oak")])
    assert not s1.fulfilled and c.steps_done(s1) == 1
    s2 = c.advance(s1, v.id_of(" tree"))
    assert s2.fulfilled and c.steps_done(s2) == c.total_steps == 2


def test_disjunctive_and_palette(words_vocab):
    v = words_vocab
    c = compile_constraint(ConstraintSpec.disjunctive(["next to", "above"]), v)
    assert feed(c, [v.id_of(" above")]).fulfilled
    table = {"winter": ["winter hues", "snowy palette"]}
    w = compile_constraint(ConstraintSpec.color_patterns("winter", table), v)
    assert feed(w, tokenize(" winter hues", v)).fulfilled
    assert not feed(w, tokenize(" winter", v)).fulfilled


def test_bare_spelling_only_opens_the_sequence(words_vocab):
    v = words_vocab
    c = compile_constraint(ConstraintSpec.phrasal("oak tree"), v)
    assert feed(c, tokenize("oak tree", v)).fulfilled
    assert feed(c, tokenize("a oak tree", v)).fulfilled
    glued = [v.id_of("a"), v.id_of("oak"), v.id_of(" tree")]
    assert not feed(c, glued).fulfilled
    mid = feed(c, [v.id_of("a")])
    assert c.next_token(mid) == v.id_of(" oak")


def test_kmp_overlap_is_not_missed():
    v = Vocabulary.with_words(["x", " x", " y"])
    x, y = v.id_of(" x"), v.id_of(" y")
    c = compile_constraint(ConstraintSpec.phrasal("x x y"), v)
    # a reset-to-zero matcher loses the second " x" and misses the phrase
    assert feed(c, [x, x, x, y]).fulfilled
    c2 = compile_constraint(ConstraintSpec.phrasal("x y x y"), v)
    assert feed(c2, [x, y, x, y, x, y]).fulfilled
    assert feed(c2, [x, y, x, x, y, x, y]).fulfilled
    assert not feed(c2, [x, y, x, x, y]).fulfilled


def test_fulfilment_is_monotone(words_vocab):
    v = words_vocab
    c = compile_constraint(ConstraintSpec.phrasal("oak tree"), v)
    s = feed(c, tokenize("oak tree", v))
    for t in range(len(v)):
        assert c.advance(s, t).fulfilled


def test_constraint_errors(words_vocab):
    with pytest.raises(EmptyPhraseError):
        compile_constraint(ConstraintSpec.phrasal(""), words_vocab)
    with pytest.raises(EmptyPhraseError):
        compile_constraint(ConstraintSpec.disjunctive([]), words_vocab)
    with pytest.raises(UnknownPaletteError):
        ConstraintSpec.color_patterns("lunar")


def test_default_palettes():
    table = load_palettes()
    assert set(table) == {"winter", "spring", "summer", "fall", "sunrise", "sunset",
                          "neon", "pastel"}
    assert all(2 <= len(p) <= 4 for p in table.values())
    assert "winter hues" in table["winter"] and "spring blossoms" in table["spring"]


def test_subject_anchor_is_reusable(words_vocab):
    assert compile_constraint(ConstraintSpec.subject_anchor("oak tree"), words_vocab).reusable
    assert not compile_constraint(ConstraintSpec.phrasal("oak tree"), words_vocab).reusable


CORPUS = ("an oak tree in the snow\nan oak tree surrounded by a winter wonderland\n"
          "winter hues over the hills\na field of spring blossoms\n")


@pytest.fixture(scope="module")
def model():
    return train_ngram(CORPUS, order=2, alpha=0.01)


def test_both_constraints_present(model):
    cons = [ConstraintSpec.subject_anchor("oak tree"), ConstraintSpec.phrasal("winter hues")]
    results = beam_search(model, cons, width=4, max_tokens=16)
    assert results
    for h in results:
        assert "oak tree" in h.text and "winter hues" in h.text


def test_hypothesis_bookkeeping(model):
    cons = [ConstraintSpec.phrasal("oak tree")]
    compiled = [compile_constraint(c, model.vocab) for c in cons]
    for h in beam_search(model, compiled, width=3, max_tokens=10):
        score = 0.0
        for i, t in enumerate(h.tokens):
            score += model.next_logprobs(list(h.tokens[:i]))[t]
        assert h.score == pytest.approx(score, abs=1e-9)
        states = tuple(feed(c, [t for t in h.tokens if t != model.vocab.eos_id])
                       for c in compiled)
        assert h.constraint_states == states
        assert h.bank == sum(c.steps_done(s) for c, s in zip(compiled, states))


def plain_beam(provider, width, max_tokens):
    """Textbook beam search without constraints, for the identity check."""
    eos = provider.vocab.eos_id
    beam, done = [((), 0.0)], []
    for _ in range(max_tokens):
        cands = {}
        for toks, score in beam:
            lp = provider.next_logprobs(list(toks))
            order = sorted(np.flatnonzero(np.isfinite(lp)), key=lambda t: (-lp[t], t))[:width]
            for t in order:
                if t == eos:
                    done.append((toks + (int(t),), score + lp[t]))
                    continue
                key = provider.state_key(toks + (int(t),))
                cand = (toks + (int(t),), score + lp[t])
                prev = cands.get(key)
                if prev is None or (-cand[1], cand[0]) < (-prev[1], prev[0]):
                    cands[key] = cand
        beam = sorted(cands.values(), key=lambda c: (-c[1], c[0]))[:width]
    out = done + beam
    out.sort(key=lambda c: (-c[1], c[0]))
    return out


def test_no_constraints_is_plain_beam(model):
    ours = beam_search(model, [], width=3, max_tokens=6)
    ref = plain_beam(model, 3, 6)
    assert [h.tokens for h in ours] == [c[0] for c in ref]


def test_unsatisfiable_reports_best_partial(model):
    with pytest.raises(UnsatisfiableError) as info:
        beam_search(model, [ConstraintSpec.phrasal("oak tree in the snow")], width=2,
                    max_tokens=3)
    assert info.value.best is not None


def test_seasonal_series(model):
    table = {"winter": ["winter hues", "winter wonderland"], "spring": ["spring blossoms"]}
    out = seasonal_series(model, ConstraintSpec.subject_anchor("oak tree"),
                          ["winter", "spring"], width=4, palette_table=table)
    assert len(out) == 2
    assert all("oak tree" in h.text for h in out)
    assert any(p in out[0].text for p in table["winter"])
    assert "spring blossoms" in out[1].text
    single = seasonal_series(model, ConstraintSpec.subject_anchor("oak tree"), ["spring"],
                             width=4, palette_table=table)
    direct = beam_search(model, [ConstraintSpec.subject_anchor("oak tree"),
                                 ConstraintSpec("color_patterns", ("spring blossoms",), "spring")],
                         width=4)
    assert single[0].tokens == direct[0].tokens


def desk_instance(seed):
    rnd = random.Random(seed)
    words = oracles.desk_words(rnd, rnd.randint(2, 4))
    corpus = oracles.desk_corpus(rnd, words)
    model = train_ngram(corpus, order=2, alpha=0.5, support="corpus")
    support = [int(t) for t in np.flatnonzero(np.isfinite(model.next_logprobs([])))]
    content = [t for t in support if t != model.vocab.eos_id]
    phrase = " ".join(rnd.choice(words) for _ in range(rnd.randint(1, 2)))
    budget = 1
    while budget < 6 and len(content) ** (budget + 1) <= 60_000:
        budget += 1
    return model, support, content, phrase, budget


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_beam_matches_exhaustive_optimum(seed):
    model, support, content, phrase, budget = desk_instance(seed)
    assert len(support) <= 12
    vocab = model.vocab
    m = len(tokenize(phrase, vocab))
    width = len(support) * (m + 2)
    ref = oracles.exhaustive_constrained_best(
        model, content, budget, lambda seq: oracles.has_phrase(detokenize(seq, vocab), phrase))
    try:
        results = beam_search(model, [ConstraintSpec.phrasal(phrase)], width=width,
                              max_tokens=budget)
    except UnsatisfiableError:
        assert ref is None
        return
    assert ref is not None
    assert results[0].score == pytest.approx(ref[0], abs=1e-9)
    assert all(oracles.has_phrase(h.text, phrase) for h in results)
