"""Classifier-free guidance over next-token distributions.

The guided distribution is ``neg + gamma * (cond - neg)`` in log space,
renormalized.  ``gamma = 1`` gives back the conditional distribution and
``gamma = 0`` the negative one.  Blacklisted tokens are removed afterwards, so
they stay impossible whatever the guidance does.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import AllMaskedError, ShapeMismatchError
from .numerics import NEG_INF, normalize, sample_index
from .retrieval import embed, rank_by_similarity
from .sampling import SamplingParams
from .vocab import Vocabulary, detokenize, detokenize_bytes, tokenize
from .wordguard import WordGuard

FLAW_ATTRIBUTES = (
    "incoherent-scene",
    "ambiguous-details",
    "verbose",
    "poor-composition",
    "grammar-errors",
)

DEFAULT_GAMMA = 1.5


@dataclass(frozen=True)
class NegativeDemo:
    text: str
    attribute: str = "incoherent-scene"


@dataclass(frozen=True)
class GuidanceConfig:
    gamma: float = DEFAULT_GAMMA
    negative_context: tuple[int, ...] = ()
    blacklist: frozenset[int] = field(default_factory=frozenset)
    # words kept out of the decoded text even when assembled from several tokens
    banned_words: tuple[str, ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")
        object.__setattr__(self, "negative_context", tuple(self.negative_context))
        object.__setattr__(self, "blacklist", frozenset(self.blacklist))
        object.__setattr__(self, "banned_words", tuple(self.banned_words))

    def check(self, vocab: Vocabulary) -> None:
        if vocab.eos_id in self.blacklist:
            raise ValueError("the EOS token cannot be blacklisted")


def guided_logprobs(cond: np.ndarray, neg: np.ndarray, gamma: float) -> np.ndarray:
    cond = np.asarray(cond, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    if cond.shape != neg.shape:
        raise ShapeMismatchError(f"cond {cond.shape} vs neg {neg.shape}")
    if gamma == 1.0:
        return normalize(cond)
    if gamma == 0.0:
        return normalize(neg)
    cond_ok = np.isfinite(cond)
    # a token the negative branch rules out gets no push either way
    neg_eff = np.where(np.isfinite(neg), neg, cond)
    out = np.full(cond.shape, NEG_INF)
    out[cond_ok] = neg_eff[cond_ok] + gamma * (cond[cond_ok] - neg_eff[cond_ok])
    return normalize(out)


def apply_blacklist(v: np.ndarray, blacklist: Iterable[int]) -> np.ndarray:
    ids = np.fromiter((int(t) for t in blacklist), dtype=np.int64)
    if len(ids) == 0:
        return np.asarray(v, dtype=np.float64)
    out = np.array(v, dtype=np.float64)
    out[ids] = NEG_INF
    if not np.isfinite(out).any():
        raise AllMaskedError("blacklist removes every token with non-zero probability")
    return normalize(out)


def blacklist_for_words(vocab: Vocabulary, words: Iterable[str]) -> frozenset[int]:
    """Every token whose text contains one of ``words`` (ASCII case-insensitive)."""
    return WordGuard(vocab, words).static


class NegativeDemoStore:
    """In-memory demo collection searched by embedding similarity."""

    def __init__(self, demos: Iterable[NegativeDemo] = (), dimension: int = 256):
        self.dimension = dimension
        self.demos: list[NegativeDemo] = list(demos)
        self._vectors = [embed(d.text, dimension) for d in self.demos]

    def __len__(self) -> int:
        return len(self.demos)

    def add(self, demo: NegativeDemo) -> None:
        self.demos.append(demo)
        self._vectors.append(embed(demo.text, self.dimension))

    @classmethod
    def load(cls, path, dimension: int = 256) -> "NegativeDemoStore":
        demos = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    obj = json.loads(line)
                    demos.append(NegativeDemo(obj["text"], obj.get("attribute", "")))
        return cls(demos, dimension)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for d in self.demos:
                fh.write(json.dumps({"text": d.text, "attribute": d.attribute}) + "\n")


def select_negative_demos(query: str, store: NegativeDemoStore, k: int) -> list[NegativeDemo]:
    from .errors import EmptyStoreError
    if len(store) == 0:
        raise EmptyStoreError("negative demo store is empty")
    if k <= 0:
        return []
    # ties keep file order
    keys = [f"{i:012d}" for i in range(len(store))]
    order = rank_by_similarity(np.array(store._vectors), keys, embed(query, store.dimension), k)
    return [store.demos[i] for i in order]


def build_negative_context(demos: Sequence[NegativeDemo], vocab: Vocabulary) -> list[int]:
    if not demos:
        return []
    return tokenize("\n".join(d.text for d in demos), vocab)


def guided_decode(provider, prompt_ctx: Sequence[int] | str, config: GuidanceConfig,
                  params=None) -> str:
    return detokenize(guided_decode_tokens(provider, prompt_ctx, config, params), provider.vocab)


def guided_decode_tokens(provider, prompt_ctx, config: GuidanceConfig, params=None) -> list[int]:
    p = SamplingParams.coerce(params)
    vocab = provider.vocab
    config.check(vocab)
    if isinstance(prompt_ctx, (str, bytes)):
        prompt_ctx = tokenize(prompt_ctx, vocab)
    prompt = list(prompt_ctx)
    negative = list(config.negative_context)
    guard = WordGuard(vocab, config.banned_words) if config.banned_words else None
    rng = np.random.default_rng(p.seed)
    out: list[int] = []
    for _ in range(p.max_tokens):
        cond = provider.next_logprobs(prompt + out)
        if config.gamma == 1.0:
            guided = cond
        else:
            guided = guided_logprobs(cond, provider.next_logprobs(negative + out), config.gamma)
        blocked = config.blacklist
        if guard is not None:
            blocked = blocked | guard.blocked(detokenize_bytes(out, vocab))
        guided = apply_blacklist(guided, blocked)
        tok = sample_index(guided, rng, p.temperature)
        if tok == vocab.eos_id:
            break
        out.append(tok)
    return out
