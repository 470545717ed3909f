"""Sampling parameters shared by the decoders."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 1.0
    seed: int = 0
    max_tokens: int = 64

    @classmethod
    def coerce(cls, params) -> "SamplingParams":
        if params is None:
            return cls()
        if isinstance(params, cls):
            return params
        return cls(**dict(params))


def ancestral_sample(provider, context, params=None) -> list[int]:
    """Plain sampling from the provider until EOS or ``max_tokens``."""
    import numpy as np

    from .numerics import sample_index

    p = SamplingParams.coerce(params)
    rng = np.random.default_rng(p.seed)
    ctx = list(context)
    out: list[int] = []
    for _ in range(p.max_tokens):
        tok = sample_index(provider.next_logprobs(ctx + out), rng, p.temperature)
        if tok == provider.vocab.eos_id:
            break
        out.append(tok)
    return out
