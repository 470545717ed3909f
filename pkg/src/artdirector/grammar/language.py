"""Bounded enumeration of a grammar's language (test oracle)."""
from __future__ import annotations

from .source import Grammar
from ..errors import ExplosionError
from ..vocab import to_text


def enumerate_bytes(g: Grammar, max_terminals: int, cap: int = 100_000) -> set[bytes]:
    """Every string derivable with at most ``max_terminals`` terminal symbols."""
    if max_terminals < 1:
        raise ValueError("max_terminals must be >= 1")
    sep = g.implicit_separator
    # nonterminal -> {string: fewest terminals needed to derive it}
    lang: dict[str, dict[bytes, int]] = {n: {} for n in g.nonterminals}
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            partial = {b"": 0}
            for i, sym in enumerate(p.rhs):
                joint = b"" if i == 0 or p.glue[i - 1] else sep
                opts = {sym: 1} if isinstance(sym, bytes) else lang[sym]
                nxt: dict[bytes, int] = {}
                for s, k in partial.items():
                    for o, ko in opts.items():
                        total = k + ko
                        if total <= max_terminals:
                            key = s + joint + o
                            if total < nxt.get(key, max_terminals + 1):
                                nxt[key] = total
                partial = nxt
                if len(partial) > cap:
                    raise ExplosionError(f"more than {cap} partial strings")
                if not partial:
                    break
            target = lang[p.lhs]
            for s, k in partial.items():
                if k < target.get(s, max_terminals + 1):
                    target[s] = k
                    changed = True
            if len(target) > cap:
                raise ExplosionError(f"language of {p.lhs} exceeds {cap} strings")
    return set(lang[g.start])


def enumerate_language(g: Grammar, max_terminals: int, cap: int = 100_000) -> set[str]:
    return {to_text(s) for s in enumerate_bytes(g, max_terminals, cap)}
