"""Reference implementations the package is checked against.

Each oracle is deliberately naive: brute force, direct enumeration or a
linear scan, sharing no code with the implementation under test.
"""
from __future__ import annotations

import math
import random
import re
from functools import lru_cache

# grammar --------------------------------------------------------------------

TERMINAL_POOL = ["a", "b", "ab", "ba", "abc", "c", "ca", "bb"]


def random_grammar_source(rnd: random.Random, n_nonterminals: int = 5,
                          n_terminals: int = 8, recursive: bool = False) -> str:
    """Grammar text with rules that only refer to later nonterminals.

    That ordering makes the language finite unless ``recursive`` lets a rule
    mention its own or an earlier nonterminal.
    """
    names = [f"N{i}" for i in range(rnd.randint(1, n_nonterminals))]
    terms = rnd.sample(TERMINAL_POOL, rnd.randint(1, min(n_terminals, len(TERMINAL_POOL))))
    sep = rnd.choice(['" "', "none", '"-"'])
    lines = [f"%separator {sep}"]
    for i, name in enumerate(names):
        later = names[i + 1:]
        alts = []
        # first alternative always terminates so every nonterminal is productive
        alts.append(_alt(rnd, [f'"{t}"' for t in terms] + later, 1, 2))
        for _ in range(rnd.randint(0, 2)):
            pool = [f'"{t}"' for t in terms] + later
            if recursive:
                pool += names[: i + 1]
            alts.append(_alt(rnd, pool, 0, 3))
        lines.append(f"{name} ::= " + " | ".join(alts))
    return "\n".join(lines) + "\n"


def _alt(rnd, pool, lo, hi):
    n = rnd.randint(lo, hi)
    if n == 0:
        return "ε"
    syms = [rnd.choice(pool) for _ in range(n)]
    # keep the first alternative productive when it names a nonterminal
    out = syms[0]
    for s in syms[1:]:
        out += (" ~ " if rnd.random() < 0.3 else " ") + s
    return out


def parse_rules(source: str):
    """Tiny independent reader for the subset produced above."""
    sep = b" "
    rules = {}
    order = []
    for line in source.splitlines():
        if line.startswith("%separator"):
            arg = line.split(None, 1)[1]
            sep = b"" if arg == "none" else arg.strip('"').encode()
            continue
        if "::=" not in line:
            continue
        lhs, rhs = (x.strip() for x in line.split("::=", 1))
        order.append(lhs)
        alts = []
        for alt in rhs.split("|"):
            alt = alt.strip()
            if alt == "ε":
                alts.append([])
                continue
            items = []
            glue_next = False
            for tok in re.findall(r'"[^"]*"|~|\S+', alt):
                if tok == "~":
                    glue_next = True
                    continue
                sym = tok[1:-1].encode() if tok.startswith('"') else tok
                items.append((sym, glue_next))
                glue_next = False
            alts.append(items)
        rules[lhs] = alts
    return rules, order[0], sep


def language(source: str, depth: int = 6) -> set[bytes]:
    """Strings derivable within ``depth`` nested expansions (exact for finite grammars)."""
    rules, start, sep = parse_rules(source)

    @lru_cache(maxsize=None)
    def derive(sym, d):
        if isinstance(sym, bytes):
            return frozenset([sym])
        if d == 0:
            return frozenset()
        out = set()
        for alt in rules[sym]:
            partial = {b""}
            for i, (s, glued) in enumerate(alt):
                joint = b"" if i == 0 or glued else sep
                partial = {p + joint + x for p in partial for x in derive(s, d - 1)}
                if len(partial) > 20000:
                    raise OverflowError("language too large for the oracle")
            out |= partial
        return frozenset(out)

    return set(derive(start, depth))


def prefixes(strings) -> set[bytes]:
    return {s[:i] for s in strings for i in range(len(s) + 1)}


def mask_oracle(lang: set[bytes], consumed: bytes, vocab) -> list[bool]:
    live = prefixes(lang)
    out = []
    for t in range(len(vocab)):
        if t == vocab.eos_id:
            out.append(consumed in lang)
        else:
            out.append(consumed + vocab.token_bytes(t) in live)
    return out


# n-gram ---------------------------------------------------------------------

def ngram_prob(lines: list[list[int]], order: int, alpha: float, vocab_size: int,
               context: tuple[int, ...], token: int) -> float:
    """Add-alpha estimate from explicit per-line token sequences."""
    k = order - 1
    ctx = tuple(context[-k:]) if k else ()
    hits = total = 0
    for seq in lines:
        for i, tok in enumerate(seq):
            window = tuple(seq[max(0, i - k):i])
            if window == ctx:
                total += 1
                hits += tok == token
    return (hits + alpha) / (total + alpha * vocab_size)


# beam -----------------------------------------------------------------------

def exhaustive_constrained_best(provider, tokens_allowed, max_tokens, satisfied):
    """Highest-scoring complete sequence satisfying ``satisfied``.

    A sequence is complete when EOS ends it within ``max_tokens`` tokens (EOS
    included) or when it reaches ``max_tokens`` tokens without EOS. Depth-first
    walk over ``tokens_allowed``; ties go to the lexicographically smaller
    sequence. Returns (score, tokens) or None.
    """
    eos = provider.vocab.eos_id
    best = [None]

    def offer(total, seq):
        b = best[0]
        if total > -math.inf and (b is None or total > b[0] or (total == b[0] and seq < b[1])):
            best[0] = (total, seq)

    def visit(seq, score):
        if len(seq) == max_tokens:
            if satisfied(seq):
                offer(score, seq)
            return
        lp = provider.next_logprobs(list(seq))
        if seq and satisfied(seq):
            offer(score + float(lp[eos]), seq + (eos,))
        for t in tokens_allowed:
            s = score + float(lp[t])
            if s > -math.inf:
                visit(seq + (t,), s)

    visit((), 0.0)
    return best[0]


def has_phrase(text: str, phrase: str) -> bool:
    """``phrase`` occurs at the start of ``text`` or right after a space."""
    return text.startswith(phrase) or (" " + phrase) in text


def contains_run(seq, phrase) -> bool:
    n = len(phrase)
    return any(tuple(seq[i:i + n]) == tuple(phrase) for i in range(len(seq) - n + 1))


# smc ------------------------------------------------------------------------

def exact_conditional(provider, prompt, max_tokens, ok):
    """Distribution over finished generations given ``ok(text)``, by enumeration."""
    vocab = provider.vocab
    eos = vocab.eos_id
    dist: dict[str, float] = {}

    def walk(gen, logp):
        if len(gen) == max_tokens:
            return
        lp = provider.next_logprobs(list(prompt) + gen)
        for t in range(len(vocab)):
            if lp[t] == -math.inf:
                continue
            if t == eos:
                text = b"".join(vocab.token_bytes(x) for x in gen).decode("utf-8", "surrogateescape")
                if ok(text):
                    dist[text] = dist.get(text, 0.0) + math.exp(logp + lp[t])
                continue
            walk(gen + [t], logp + lp[t])

    walk([], 0.0)
    z = sum(dist.values())
    return {k: v / z for k, v in dist.items()}


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


# retrieval ------------------------------------------------------------------

def linear_knn(items: list[tuple[str, list[float]]], query: list[float], k: int) -> list[str]:
    def cos(a, b):
        na = math.sqrt(sum(x * x for x in a))
        nb = math.sqrt(sum(x * x for x in b))
        if na == 0 or nb == 0:
            return 0.0
        return sum(x * y for x, y in zip(a, b)) / (na * nb)

    scored = [(-round(cos(v, query), 12), key) for key, v in items]
    scored.sort()
    return [key for _, key in scored[:k]]


def hashed_tf(text: str, dimension: int = 256) -> list[float]:
    vec = [0.0] * dimension
    for term in re.findall(r"[^\W_]+", text.lower()):
        h = 14695981039346656037
        for byte in term.encode("utf-8"):
            h = ((h ^ byte) * 1099511628211) % 2**64
        vec[h % dimension] += 1.0
    norm = math.sqrt(sum(x * x for x in vec))
    if norm == 0:
        vec[0] = 1.0
        return vec
    return [x / norm for x in vec]


# guidance -------------------------------------------------------------------

def guided_probs(cond: list[float], neg: list[float], gamma: float) -> list[float]:
    logits = [math.log(n) + gamma * (math.log(c) - math.log(n)) for c, n in zip(cond, neg)]
    m = max(logits)
    z = sum(math.exp(x - m) for x in logits)
    return [math.exp(x - m) / z for x in logits]


# prompts --------------------------------------------------------------------

def jaccard(a: str, b: str) -> float:
    wa = set(re.split(r"[^0-9a-z]+", a.lower())) - {""}
    wb = set(re.split(r"[^0-9a-z]+", b.lower())) - {""}
    if not wa and not wb:
        return 1.0
    return len(wa & wb) / len(wa | wb)


# desk-scale instances -------------------------------------------------------

def desk_words(rnd: random.Random, n: int) -> list[str]:
    """Distinct two-letter words like "Ka"; text containment then equals token containment."""
    words = set()
    while len(words) < n:
        words.add(rnd.choice("BDFKLMNPRST") + rnd.choice("aeiou"))
    return sorted(words)


def desk_corpus(rnd: random.Random, words: list[str], lines: int = 8) -> str:
    return "\n".join(" ".join(rnd.choice(words) for _ in range(rnd.randint(1, 4)))
                     for _ in range(lines)) + "\n"
