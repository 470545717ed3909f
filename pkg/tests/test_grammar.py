import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artdirector.errors import (
    EmptyTerminalError,
    ExplosionError,
    GrammarSyntaxError,
    LengthExhaustedError,
    RejectionError,
    UndefinedSymbolError,
    UnproductiveNonterminalError,
)
from artdirector.grammar import (
    PAPER_GRAMMAR,
    advance,
    compile_grammar,
    enumerate_bytes,
    enumerate_language,
    grammar_sample,
    init_state,
    is_complete,
    load_grammar,
    parse_grammar,
    valid_mask,
)
from artdirector.provider import train_ngram
from artdirector.sampling import SamplingParams
from artdirector.vocab import Vocabulary

import oracles

WORDS = ["cat", "dog", "sitting", "jumping", "next", " to", "above", " cat", " dog",
         " sitting", " jumping", " next to", " above", "ca", "t s", "do"]


@pytest.fixture(scope="module")
def paper():
    return parse_grammar(PAPER_GRAMMAR)


@pytest.fixture(scope="module")
def vocab():
    return Vocabulary.with_words(WORDS)


def start(g, kernel):
    return init_state(compile_grammar(g, kernel=kernel))


def test_parse_paper_grammar_counts(paper):
    assert len(paper.nonterminals) == 4
    assert len(paper.terminals) == 6
    # rule 1 has three alternatives, rules 2-4 two each
    assert len(paper.productions) == 9
    assert paper.start == "S"
    assert paper.implicit_separator == b" "


def test_grammar_round_trips_through_text(paper):
    again = parse_grammar(str(paper))
    assert again.productions == paper.productions
    assert enumerate_bytes(again, 4) == enumerate_bytes(paper, 4)


@pytest.mark.parametrize("source, error", [
    ("root ::= root\n", UnproductiveNonterminalError),
    ('S ::= A "x"\n', UndefinedSymbolError),
    ('S ::= ""\n', EmptyTerminalError),
    ('S ::= "x\n', GrammarSyntaxError),
    ("S = x\n", GrammarSyntaxError),
])
def test_parse_errors(source, error):
    with pytest.raises(error):
        parse_grammar(source)


def test_syntax_error_position():
    with pytest.raises(GrammarSyntaxError) as info:
        parse_grammar('S ::= "a"\nT ::= "b" )\n')
    assert info.value.line == 2


def test_escapes_and_separator_directive():
    g = parse_grammar('%separator none\nS ::= "a\\tb" ~ "\\x41" | "q\\"" "r"\n')
    assert enumerate_bytes(g, 3) == {b"a\tbA", b'q"r'}


def test_init_state_first_terminals(paper, kernel):
    s = start(paper, kernel)
    assert s.viable_terminals() == {b"cat", b"dog"}
    assert not s.is_complete
    assert s.consumed == b""


def test_paper_continuations(paper, kernel):
    s = advance(start(paper, kernel), "cat sitting")
    assert s.is_complete  # S -> Element Attribute
    assert s.viable_terminals() == {b"next to", b"above"}


def test_paper_rejection_offset(paper, kernel):
    with pytest.raises(RejectionError) as info:
        advance(start(paper, kernel), "cat sitting jumping")
    assert info.value.offset == len("cat sitting j") - 1


@pytest.mark.parametrize("text, complete", [
    ("cat sitting next to dog", True),
    ("cat", True),
    ("cat sitting next to", False),
    ("dog jumping above cat", True),
    ("ca", False),
])
def test_is_complete_examples(paper, kernel, text, complete):
    assert is_complete(advance(start(paper, kernel), text)) is complete


def test_advance_empty_is_identity(paper, kernel):
    s = advance(start(paper, kernel), "cat")
    assert advance(s, "") is s


def test_initial_mask_paper(paper, vocab, kernel):
    mask = valid_mask(start(paper, kernel), vocab)
    allowed = {vocab.token_bytes(t) for t in np.flatnonzero(mask)}
    assert allowed == {b"c", b"d", b"ca", b"do", b"cat", b"dog"}
    assert not mask[vocab.eos_id]


def test_single_string_grammar_mask(kernel):
    g = parse_grammar('S ::= "xy"\n')
    v = Vocabulary.with_words(["xy", "xyz", "yx"])
    s = start(g, kernel)
    allowed = {v.token_bytes(t) for t in np.flatnonzero(valid_mask(s, v))}
    assert allowed == {b"x", b"xy"}
    done = advance(s, "xy")
    m = valid_mask(done, v)
    assert list(np.flatnonzero(m)) == [v.eos_id]


def test_enumerate_paper(paper):
    lang = enumerate_language(paper, 4)
    assert len(lang) == 22
    assert "cat sitting next to dog" in lang
    assert enumerate_language(paper, 1) == {"cat", "dog"}
    assert enumerate_language(parse_grammar('S ::= "x"\n'), 1) == {"x"}


def test_enumerate_guard():
    g = parse_grammar('S ::= "a" | "b" | S S\n')
    with pytest.raises(ExplosionError):
        enumerate_language(g, 30, cap=200)
    with pytest.raises(ValueError):
        enumerate_language(g, 0)


def test_epsilon_and_nullable_chains(kernel):
    g = parse_grammar('%separator none\nS ::= A B "x"\nA ::= ε | "a"\nB ::= A A\n')
    s = start(g, kernel)
    for text in ["x", "ax", "aax", "aaax"]:
        assert is_complete(advance(s, text)), text
    with pytest.raises(RejectionError):
        advance(s, "aaaax")


def test_separator_inside_multibyte_terminal(paper, kernel):
    s = advance(start(paper, kernel), "cat sitting next")
    assert s.partial_terminals() == [(b"next to", 4)]


def test_load_grammar_file(tmp_path):
    path = tmp_path / "g.g"
    path.write_text(PAPER_GRAMMAR)
    assert len(enumerate_language(load_grammar(path), 4)) == 22


def test_sample_single_string_regardless_of_provider():
    g = parse_grammar('S ::= "only this"\n')
    m = train_ngram("something else entirely\n")
    for seed in range(5):
        assert grammar_sample(m, g, SamplingParams(seed=seed, max_tokens=20)) == "only this"


def test_sample_length_exhausted(paper):
    m = train_ngram("zzz\n")
    with pytest.raises(LengthExhaustedError) as info:
        grammar_sample(m, paper, SamplingParams(seed=0, max_tokens=1, temperature=0))
    assert info.value.partial in {"c", "d", "ca", "do", "cat", "dog"} or info.value.partial


def test_sample_is_deterministic(paper):
    m = train_ngram("cat sitting next to dog\ndog above cat\n")
    outs = {grammar_sample(m, paper, SamplingParams(seed=11, max_tokens=30)) for _ in range(3)}
    assert len(outs) == 1


# properties -----------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seeds, st.data())
def test_chunk_associativity(seed, data):
    src = oracles.random_grammar_source(random.Random(seed))
    g = parse_grammar(src)
    lang = sorted(oracles.language(src))
    text = data.draw(st.sampled_from(lang))
    cut = data.draw(st.integers(0, len(text)))
    for name in oracles_kernels():
        s0 = start(g, name)
        whole = advance(s0, text)
        split = advance(advance(s0, text[:cut]), text[cut:])
        bytewise = s0
        for b in text:
            bytewise = advance(bytewise, bytes([b]))
        assert whole == split == bytewise


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_is_complete_matches_oracle_language(seed):
    src = oracles.random_grammar_source(random.Random(seed))
    g = parse_grammar(src)
    lang = oracles.language(src)
    assert enumerate_bytes(g, 64) == lang
    for name in oracles_kernels():
        s0 = start(g, name)
        for text in oracles.prefixes(lang):
            assert advance(s0, text).is_complete == (text in lang)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_kernels_agree(seed):
    names = oracles_kernels()
    if len(names) < 2:
        pytest.skip("compiled kernel not built")
    src = oracles.random_grammar_source(random.Random(seed), recursive=True)
    g = parse_grammar(src)
    v = Vocabulary.with_words(oracles.TERMINAL_POOL + [" a", "-b", "a b"])
    rnd = random.Random(seed)
    for _ in range(4):
        states = [start(g, n) for n in names]
        for _ in range(6):
            masks = [valid_mask(s, v) for s in states]
            assert (masks[0] == masks[1]).all()
            assert states[0].canonical() == states[1].canonical()
            choices = [t for t in np.flatnonzero(masks[0]) if t != v.eos_id]
            if not choices:
                break
            t = rnd.choice(choices)
            states = [advance(s, v.token_bytes(t)) for s in states]


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_recursive_mask_is_sound(seed):
    """Every set bit on a recursive grammar leads to a string of the language."""
    src = oracles.random_grammar_source(random.Random(seed), recursive=True)
    g = parse_grammar(src)
    v = Vocabulary.with_words(oracles.TERMINAL_POOL)
    try:
        lang = oracles.language(src, depth=4)
    except OverflowError:
        return
    live = oracles.prefixes(lang)
    mask = valid_mask(start(g, None), v)
    for t in range(len(v)):
        if t == v.eos_id:
            if b"" in lang:
                assert mask[t]
        elif v.token_bytes(t) in live:
            assert mask[t]


def oracles_kernels():
    from conftest import KERNELS
    return KERNELS
