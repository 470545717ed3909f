"""Next-token provider contract, the add-alpha n-gram model, and remote access.

Decoders only ever touch a provider through ``vocab``, ``next_logprobs``,
``tokenize`` and ``detokenize``.  ``state_key`` is optional: when two contexts
share a key the provider promises identical next-token distributions, which
lets beam search merge hypotheses.
"""
from __future__ import annotations

import json
import math
import threading
import urllib.error
import urllib.request
from collections import Counter
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import IO, Hashable, Iterable, Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import InvalidOrderError, ProviderUnavailableError, UnknownTokenError
from .numerics import NEG_INF, normalize
from .vocab import Vocabulary, detokenize, tokenize


@runtime_checkable
class Provider(Protocol):
    vocab: Vocabulary

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray: ...

    def tokenize(self, text: str | bytes) -> list[int]: ...

    def detokenize(self, ids: Iterable[int]) -> str: ...


class BaseProvider:
    vocab: Vocabulary

    def tokenize(self, text: str | bytes) -> list[int]:
        return tokenize(text, self.vocab)

    def detokenize(self, ids: Iterable[int]) -> str:
        return detokenize(ids, self.vocab)

    def state_key(self, context: Sequence[int]) -> Hashable:
        return tuple(context)

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray:
        raise NotImplementedError


def state_key(provider, context: Sequence[int]) -> Hashable:
    fn = getattr(provider, "state_key", None)
    return fn(context) if fn is not None else tuple(context)


class NGramModel(BaseProvider):
    """Add-alpha smoothed n-gram model over token ids.

    ``counts`` maps a context tuple to a token-count table.  Contexts are the
    last ``order - 1`` tokens, or fewer at the start of a sequence.  When
    ``support`` is given, smoothing mass goes only to those ids and every other
    token gets probability zero.
    """

    def __init__(self, vocab: Vocabulary, order: int, alpha: float,
                 counts: dict[tuple[int, ...], dict[int, int]],
                 support: Iterable[int] | None = None):
        if order < 1:
            raise InvalidOrderError(f"order must be >= 1, got {order}")
        if not alpha > 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        self.vocab = vocab
        self.order = order
        self.alpha = float(alpha)
        self.counts = {k: dict(v) for k, v in counts.items()}
        self.support = None if support is None else frozenset(int(t) for t in support)
        if self.support is None:
            self._base = np.zeros(len(vocab), dtype=bool)
            self._base[:] = True
        else:
            self._base = np.zeros(len(vocab), dtype=bool)
            self._base[sorted(self.support)] = True
        self._support_size = int(self._base.sum())
        self._cache: dict[tuple[int, ...], np.ndarray] = {}
        self._lock = threading.Lock()

    def state_key(self, context: Sequence[int]) -> tuple[int, ...]:
        if self.order == 1:
            return ()
        return tuple(int(t) for t in context[-(self.order - 1):])

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray:
        key = self.state_key(context)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        table = self.counts.get(key, {})
        total = sum(table.values())
        denom = total + self.alpha * self._support_size
        out = np.full(len(self.vocab), NEG_INF)
        out[self._base] = math.log(self.alpha / denom)
        for tid, c in table.items():
            if self._base[tid]:
                out[tid] = math.log((c + self.alpha) / denom)
        out = normalize(out)
        out.flags.writeable = False
        with self._lock:
            self._cache[key] = out
        return out

    def prob(self, token: int, context: Sequence[int]) -> float:
        return float(np.exp(self.next_logprobs(context)[token]))


def train_ngram(corpus: str, order: int = 2, alpha: float = 0.1,
                vocab: Vocabulary | None = None,
                support: str = "vocab") -> NGramModel:
    """Count n-grams over every non-blank line of ``corpus``.

    Each line is tokenized and terminated with EOS; windows never cross line
    boundaries.  ``support="corpus"`` restricts the model to tokens that occur
    in the corpus (plus EOS), which keeps desk-scale models enumerable.
    """
    if order < 1:
        raise InvalidOrderError(f"order must be >= 1, got {order}")
    if not corpus or not corpus.strip():
        raise ValueError("corpus must be non-empty")
    if vocab is None:
        vocab = Vocabulary.from_corpus(corpus)
    counts: dict[tuple[int, ...], Counter] = {}
    seen: set[int] = {vocab.eos_id}
    for line in corpus.splitlines():
        if not line.strip():
            continue
        ids = tokenize(line, vocab) + [vocab.eos_id]
        seen.update(ids)
        for i, tok in enumerate(ids):
            key = tuple(ids[max(0, i - (order - 1)):i]) if order > 1 else ()
            counts.setdefault(key, Counter())[tok] += 1
    if support == "vocab":
        sup = None
    elif support == "corpus":
        sup = seen
    else:
        raise ValueError(f"support must be 'vocab' or 'corpus', got {support!r}")
    return NGramModel(vocab, order, alpha, {k: dict(v) for k, v in counts.items()}, sup)


# ---------------------------------------------------------------------------
# remote providers

def _decode_logprobs(values: list, size: int) -> np.ndarray:
    if len(values) != size:
        raise ProviderUnavailableError(
            f"provider returned {len(values)} logprobs for a vocabulary of {size}")
    arr = np.array([NEG_INF if v is None else float(v) for v in values])
    return normalize(arr)


class RemoteProvider(BaseProvider):
    """Client for the HTTP logprob protocol (``/v1/vocab``, ``/v1/logprobs``)."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.vocab = Vocabulary.from_json(self._request("GET", "/v1/vocab"))

    def _request(self, method: str, path: str, body: dict | None = None) -> dict:
        data = None if body is None else json.dumps(body).encode()
        req = urllib.request.Request(self.url + path, data=data, method=method,
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read())
        except urllib.error.HTTPError as exc:
            raise ProviderUnavailableError(f"{method} {path}: HTTP {exc.code}") from exc
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise ProviderUnavailableError(f"{method} {path}: {exc}") from exc

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray:
        obj = self._request("POST", "/v1/logprobs", {"context": [int(t) for t in context]})
        return _decode_logprobs(obj["logprobs"], len(self.vocab))


class StreamProvider(BaseProvider):
    """Line-delimited JSON over a pair of byte streams (e.g. a subprocess pipe)."""

    def __init__(self, reader: IO[bytes], writer: IO[bytes],
                 vocab: Vocabulary | None = None):
        self._reader = reader
        self._writer = writer
        self._lock = threading.Lock()
        self.vocab = vocab if vocab is not None else Vocabulary.from_json(
            self._call({"vocab": True}))

    def _call(self, body: dict) -> dict:
        with self._lock:
            try:
                self._writer.write(json.dumps(body).encode() + b"\n")
                self._writer.flush()
                line = self._reader.readline()
            except (OSError, ValueError) as exc:
                raise ProviderUnavailableError(str(exc)) from exc
        if not line:
            raise ProviderUnavailableError("provider stream closed")
        obj = json.loads(line)
        if "error" in obj:
            raise ProviderUnavailableError(str(obj["error"]))
        return obj

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray:
        obj = self._call({"context": [int(t) for t in context]})
        return _decode_logprobs(obj["logprobs"], len(self.vocab))


def _handle(model, body: dict) -> dict:
    if body.get("vocab"):
        return model.vocab.to_json()
    context = [int(t) for t in body["context"]]
    for t in context:
        if not 0 <= t < len(model.vocab):
            raise UnknownTokenError(t, len(model.vocab))
    lp = model.next_logprobs(context)
    return {"logprobs": [None if v == NEG_INF else float(v) for v in lp]}


def serve_stream(model, reader: IO[bytes], writer: IO[bytes]) -> None:
    """Answer line-delimited requests until ``reader`` hits EOF."""
    for line in reader:
        if not line.strip():
            continue
        try:
            reply = _handle(model, json.loads(line))
        except Exception as exc:  # reported to the client, never fatal
            reply = {"error": str(exc)}
        writer.write(json.dumps(reply).encode() + b"\n")
        writer.flush()


def make_http_server(model, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """HTTP server exposing ``model``; call ``serve_forever`` to run it."""

    class Handler(BaseHTTPRequestHandler):
        def _send(self, code: int, obj: dict) -> None:
            payload = json.dumps(obj).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def do_GET(self):  # noqa: N802
            if self.path == "/v1/vocab":
                self._send(200, model.vocab.to_json())
            else:
                self._send(404, {"error": "not found"})

        def do_POST(self):  # noqa: N802
            if self.path != "/v1/logprobs":
                self._send(404, {"error": "not found"})
                return
            length = int(self.headers.get("Content-Length", 0))
            try:
                body = json.loads(self.rfile.read(length))
                self._send(200, _handle(model, {"context": body["context"]}))
            except Exception as exc:
                self._send(400, {"error": str(exc)})

        def log_message(self, *args):
            pass

    return ThreadingHTTPServer((host, port), Handler)
