"""Log-space helpers shared by every decoder."""
from __future__ import annotations

import numpy as np

from .errors import AllMaskedError

NEG_INF = float("-inf")


def logsumexp(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=np.float64)
    finite = np.isfinite(values)
    if not finite.any():
        return NEG_INF
    m = values[finite].max()
    return float(m + np.log(np.exp(values[finite] - m).sum()))


def normalize(values: np.ndarray) -> np.ndarray:
    """Shift log-weights so they sum to one in probability space."""
    values = np.asarray(values, dtype=np.float64)
    z = logsumexp(values)
    if z == NEG_INF:
        raise AllMaskedError("no finite entry left to normalize")
    return values - z


def mask_logprobs(values: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    """Set entries where ``allowed`` is false to -inf, then renormalize."""
    out = np.where(allowed, values, NEG_INF)
    return normalize(out)


def sample_index(logprobs: np.ndarray, rng: np.random.Generator,
                 temperature: float = 1.0) -> int:
    """Draw one index by inverse CDF; temperature 0 means argmax."""
    if temperature <= 0:
        return int(np.argmax(logprobs))
    scaled = normalize(np.asarray(logprobs) / temperature) if temperature != 1.0 \
        else np.asarray(logprobs)
    probs = np.exp(scaled)
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    idx = int(np.searchsorted(cdf, u, side="right"))
    if idx >= len(probs) or probs[idx] == 0.0:
        # u landed on the top edge through round-off
        idx = int(np.flatnonzero(probs)[-1])
    return idx
