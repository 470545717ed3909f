"""Grammar-constrained sampling from any provider."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .recognizer import CompiledGrammar, advance, init_state, valid_mask
from .source import Grammar
from ..errors import LengthExhaustedError
from ..numerics import NEG_INF, normalize, sample_index
from ..sampling import SamplingParams
from ..vocab import detokenize


def constrained_logprobs(logprobs: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Renormalize ``logprobs`` over ``mask``.

    If the provider puts no mass on any valid token, fall back to uniform over
    the valid set so decoding can always continue.
    """
    masked = np.where(mask, logprobs, NEG_INF)
    if not np.isfinite(masked).any():
        masked = np.where(mask, 0.0, NEG_INF)
    return normalize(masked)


def grammar_sample_tokens(provider, g: Grammar | CompiledGrammar, params=None,
                          context: Sequence[int] = ()) -> list[int]:
    p = SamplingParams.coerce(params)
    vocab = provider.vocab
    rng = np.random.default_rng(p.seed)
    state = init_state(g)
    prefix = list(context)
    generated: list[int] = []
    for _ in range(p.max_tokens):
        mask = valid_mask(state, vocab)
        lp = constrained_logprobs(provider.next_logprobs(prefix + generated), mask)
        tok = sample_index(lp, rng, p.temperature)
        if tok == vocab.eos_id:
            return generated
        state = advance(state, vocab.token_bytes(tok))
        generated.append(tok)
    if state.is_complete:
        return generated
    raise LengthExhaustedError(detokenize(generated, vocab), p.max_tokens)


def grammar_sample(provider, g: Grammar | CompiledGrammar, params=None,
                   context: Sequence[int] = ()) -> str:
    """Sample a string of L(g); ``context`` conditions the provider only."""
    return detokenize(grammar_sample_tokens(provider, g, params, context), provider.vocab)
