"""Sequential Monte Carlo steering of token generation.

Each particle samples its next token from a proposal that masks forbidden
tokens, and its log-weight gains ``log p(token) - log q(token)``, i.e. the log
of the unmasked probability mass.  Sampling a forbidden token anyway would kill
the particle (weight -inf); with the masking proposal this never happens.
Particles are resampled multinomially whenever the effective sample size drops
below ``ess_threshold * N``.

Randomness is drawn from streams keyed by ``(seed, step, particle)``, so the
outcome does not depend on how many threads step the particles.
"""
from __future__ import annotations

import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import AllDeadError, AllMaskedError, BudgetError
from .numerics import NEG_INF, logsumexp, normalize, sample_index
from .vocab import Vocabulary, detokenize, detokenize_bytes, tokenize
from .wordguard import WordGuard

PAPER_FORBIDDEN_WORDS = ("water", "lake", "ocean", "river", "sea", "red")


@dataclass(frozen=True)
class Particle:
    context: tuple[int, ...]
    log_weight: float = 0.0
    finished: bool = False
    prompt_len: int = 0

    @property
    def generated(self) -> tuple[int, ...]:
        return self.context[self.prompt_len:]

    @property
    def alive(self) -> bool:
        return self.log_weight != NEG_INF


@dataclass(frozen=True)
class SteeringProgram:
    initial_prompt: str
    forbidden_words: tuple[str, ...] = ()
    max_tokens: int = 32
    n_particles: int = 16
    ess_threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        words = tuple(w.lower() for w in self.forbidden_words)
        if any(not w for w in words):
            raise ValueError("forbidden words must be non-empty")
        object.__setattr__(self, "forbidden_words", words)

    @classmethod
    def from_json(cls, obj: dict) -> "SteeringProgram":
        return cls(
            initial_prompt=obj["prompt"],
            forbidden_words=tuple(obj.get("forbidden_words", ())),
            max_tokens=int(obj.get("max_tokens", 32)),
            n_particles=int(obj.get("n_particles", 16)),
            ess_threshold=float(obj.get("ess_threshold", 0.5)),
            seed=int(obj.get("seed", 0)),
        )

    @classmethod
    def load(cls, path) -> "SteeringProgram":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass
class SMCResult:
    """Returned samples as ``(text, normalized weight)`` plus run diagnostics."""
    samples: list[tuple[str, float]]
    particles: list[Particle]
    resamples: int = 0
    condition_failures: int = 0
    unfinished: int = 0
    ess_trace: list[float] = field(default_factory=list)

    def __iter__(self):
        return iter(self.samples)

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    def distribution(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for text, w in self.samples:
            out[text] = out.get(text, 0.0) + w
        return out


class ConditionCounter:
    """Thread-safe tally of condition failures."""

    def __init__(self):
        self.count = 0
        self._lock = threading.Lock()

    def record(self) -> None:
        with self._lock:
            self.count += 1


def forbidden_token_set(vocab: Vocabulary, words: Iterable[str]) -> frozenset[int]:
    """Tokens whose text contains any of ``words`` (ASCII case-insensitive)."""
    return WordGuard(vocab, words).static


def masked_proposal(logprobs: np.ndarray, forbidden: Iterable[int]) -> np.ndarray:
    ids = np.fromiter((int(t) for t in forbidden), dtype=np.int64)
    if len(ids) == 0:
        return np.asarray(logprobs, dtype=np.float64)
    out = np.array(logprobs, dtype=np.float64)
    out[ids] = NEG_INF
    if not np.isfinite(out).any():
        raise AllMaskedError("every token with non-zero probability is forbidden")
    return normalize(out)


def particle_step(p: Particle, provider, program: SteeringProgram | None,
                  forbidden: Iterable[int] | WordGuard, rng: np.random.Generator | None = None,
                  stats: "ConditionCounter | None" = None) -> Particle:
    """Advance one unfinished particle by one token."""
    if p.finished or not p.alive:
        return p
    rng = rng if rng is not None else np.random.default_rng()
    vocab = provider.vocab
    if isinstance(forbidden, WordGuard):
        guard = forbidden
        static = guard.static
        blocked = guard.blocked(detokenize_bytes(p.generated, vocab))
    else:
        guard = None
        static = blocked = frozenset(forbidden)
    lp = provider.next_logprobs(p.context)
    if blocked:
        try:
            q = masked_proposal(lp, blocked)
        except AllMaskedError:
            return replace(p, log_weight=NEG_INF, finished=True)
        allowed = np.ones(len(lp), dtype=bool)
        allowed[list(blocked)] = False
        increment = logsumexp(lp[allowed])
    else:
        q, increment = lp, 0.0
    tok = sample_index(q, rng)
    context = p.context + (tok,)
    weight = p.log_weight + increment
    violated = tok in static or (
        guard is not None and guard.violates(detokenize_bytes(context[p.prompt_len:], vocab)))
    if violated:
        if stats is not None:
            stats.record()
        weight = NEG_INF
    return Particle(context, weight, tok == vocab.eos_id or weight == NEG_INF, p.prompt_len)


def effective_sample_size(log_weights: Sequence[float]) -> float:
    lw = np.asarray(log_weights, dtype=np.float64)
    finite = np.isfinite(lw)
    if not finite.any():
        raise AllDeadError("every particle has zero weight")
    w = np.exp(lw[finite] - lw[finite].max())
    w /= w.sum()
    return float(1.0 / np.sum(w * w))


def _resample(particles: list[Particle], rng: np.random.Generator) -> list[Particle]:
    lw = np.array([p.log_weight for p in particles])
    n = len(particles)
    probs = np.exp(normalize(lw))
    picks = rng.choice(n, size=n, replace=True, p=probs / probs.sum())
    mean = logsumexp(lw) - math.log(n)
    return [replace(particles[i], log_weight=mean) for i in picks]


def smc_run(program: SteeringProgram, provider, n_particles: int | None = None,
            ess_threshold: float | None = None, seed: int | None = None,
            threads: int = 1, on_budget: str = "error") -> SMCResult:
    """Run SMC steering for ``program``.

    ``on_budget`` decides what happens when particles are still unfinished
    after ``max_tokens``: ``"error"`` raises :class:`BudgetError` carrying the
    finished subset, ``"truncate"`` returns them as if they had ended there.
    """
    n = program.n_particles if n_particles is None else n_particles
    thr = program.ess_threshold if ess_threshold is None else ess_threshold
    seed = program.seed if seed is None else seed
    if n < 1:
        raise ValueError("n_particles must be >= 1")
    if not 0 < thr <= 1:
        raise ValueError("ess_threshold must lie in (0, 1]")
    if on_budget not in ("error", "truncate"):
        raise ValueError("on_budget must be 'error' or 'truncate'")
    vocab = provider.vocab
    guard = WordGuard(vocab, program.forbidden_words)  # compiled once, shared read-only
    prompt = tuple(tokenize(program.initial_prompt, vocab))
    particles = [Particle(prompt, 0.0, False, len(prompt)) for _ in range(n)]
    stats = ConditionCounter()
    resamples = 0
    ess_trace: list[float] = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def step_one(args):
        i, p, step = args
        if p.finished or not p.alive:
            return p
        rng = np.random.default_rng([seed, step, i])
        return particle_step(p, provider, program, guard, rng, stats)

    try:
        for step in range(program.max_tokens):
            if all(p.finished for p in particles):
                break
            jobs = [(i, p, step) for i, p in enumerate(particles)]
            particles = list(pool.map(step_one, jobs)) if pool else [step_one(j) for j in jobs]
            ess = effective_sample_size([p.log_weight for p in particles])
            ess_trace.append(ess)
            if ess < thr * n:
                particles = _resample(particles, np.random.default_rng([seed, step, n, 1]))
                resamples += 1
    finally:
        if pool is not None:
            pool.shutdown()

    live = [p for p in particles if p.alive]
    if not live:
        raise AllDeadError("every particle violated a condition")
    done = [p for p in live if p.finished]
    unfinished = len(live) - len(done)
    kept = live if on_budget == "truncate" else done
    samples = _weighted_samples(kept, vocab)
    result = SMCResult(samples, particles, resamples, stats.count,
                       unfinished, ess_trace)
    if unfinished and on_budget == "error":
        raise BudgetError(
            f"{unfinished} particle(s) unfinished after {program.max_tokens} tokens",
            samples, unfinished)
    return result


def _weighted_samples(particles: list[Particle], vocab: Vocabulary) -> list[tuple[str, float]]:
    if not particles:
        return []
    w = np.exp(normalize(np.array([p.log_weight for p in particles])))
    w = w / w.sum()
    out = []
    for p, wi in zip(particles, w):
        gen = [t for t in p.generated if t != vocab.eos_id]
        out.append((detokenize(gen, vocab), float(wi)))
    return out
