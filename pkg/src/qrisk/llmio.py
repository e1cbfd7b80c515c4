"""Completion, embedding and cross-scoring providers.

Every call goes through :class:`Provider`, which adds retries with
exponential backoff, a simple rate limiter and an optional transcript
cache.  Backends only turn a request payload into a response payload:

* :class:`HttpBackend` speaks OpenAI-style JSON (``/chat/completions``,
  ``/embeddings``) plus a ``/rerank`` endpoint for cross-scoring.
* :class:`MockBackend` answers from Python callables and is what the
  offline pipeline and the tests use.

The transcript is a directory of JSONL shards addressed by the SHA-256 of
the canonical request, so a warm cache replays a whole run without network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

log = logging.getLogger(__name__)

COMPLETE, EMBED, CROSS = "complete", "embed", "cross"


class ProviderError(RuntimeError):
    """A provider call failed permanently."""


class TransientProviderError(ProviderError):
    """A failure worth retrying (timeouts, 429, 5xx)."""


class AuthError(ProviderError):
    pass


class CacheMissError(ProviderError):
    def __init__(self, key: str):
        super().__init__(f"transcript cache miss in strict replay mode (key {key})")
        self.key = key


@dataclass(frozen=True)
class ProviderConfig:
    model_name: str = "mock"
    base_url: Optional[str] = None
    api_key_env: Optional[str] = None
    temperature: float = 1.0
    timeout: float = 60.0
    max_retries: int = 3
    rate_limit: Optional[float] = None
    backoff: float = 0.5

    @classmethod
    def from_dict(cls, d: dict) -> "ProviderConfig":
        allowed = set(cls.__dataclass_fields__)
        unknown = set(d) - allowed - {"kind"}
        if unknown:
            raise ValueError(f"unknown provider option(s): {sorted(unknown)}")
        return cls(**{k: v for k, v in d.items() if k in allowed})


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False,
                      allow_nan=False)


def cache_key(kind: str, model_name: str, payload: dict, salt=None) -> str:
    body = {"kind": kind, "model": model_name, "payload": payload}
    if salt is not None:
        body["salt"] = salt
    return hashlib.sha256(canonical_json(body).encode("utf-8")).hexdigest()


class Transcript:
    """Content-addressed store of request/response pairs.

    ``mode`` is ``"record"`` (serve hits, call and append on miss) or
    ``"replay-strict"`` (serve hits, raise :class:`CacheMissError` on miss).
    """

    MODES = ("record", "replay-strict")

    def __init__(self, directory, mode: str = "record"):
        if mode not in self.MODES:
            raise ValueError(f"transcript mode must be one of {self.MODES}")
        self.directory = Path(directory)
        self.mode = mode
        self._lock = threading.Lock()
        self._entries: dict[str, dict] = {}
        if self.directory.exists():
            for shard in sorted(self.directory.glob("*.jsonl")):
                with open(shard, encoding="utf-8") as fh:
                    for line in fh:
                        if line.strip():
                            entry = json.loads(line)
                            self._entries.setdefault(entry["key"], entry)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> Optional[dict]:
        return self._entries.get(key)

    def put(self, entry: dict) -> None:
        if self.mode != "record":
            raise ProviderError("transcript is read-only in replay mode")
        key = entry["key"]
        with self._lock:
            if key in self._entries:
                return
            self.directory.mkdir(parents=True, exist_ok=True)
            with open(self.directory / f"{key[:2]}.jsonl", "a", encoding="utf-8",
                      newline="\n") as fh:
                fh.write(canonical_json(entry) + "\n")
            self._entries[key] = entry


class RateLimiter:
    def __init__(self, rate: Optional[float], clock=time.monotonic, sleep=time.sleep):
        self.interval = 1.0 / rate if rate else 0.0
        self._clock, self._sleep = clock, sleep
        self._next = 0.0
        self._lock = threading.Lock()

    def wait(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = self._clock()
            if now < self._next:
                self._sleep(self._next - now)
                now = self._next
            self._next = now + self.interval


class HttpBackend:
    """JSON-over-HTTP backend using OpenAI-style payloads."""

    paths = {COMPLETE: "/chat/completions", EMBED: "/embeddings", CROSS: "/rerank"}

    def __init__(self, cfg: ProviderConfig):
        if not cfg.base_url:
            raise ValueError("HttpBackend needs base_url")
        self.cfg = cfg

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.cfg.api_key_env:
            key = os.environ.get(self.cfg.api_key_env)
            if not key:
                raise AuthError(f"environment variable {self.cfg.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def request(self, kind: str, payload: dict, salt=None) -> dict:
        url = self.cfg.base_url.rstrip("/") + self.paths[kind]
        data = json.dumps(payload).encode("utf-8")
        req = urllib.request.Request(url, data=data, headers=self._headers(), method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.cfg.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if exc.code in (401, 403):
                raise AuthError(f"{url}: HTTP {exc.code}") from None
            if exc.code == 429 or exc.code >= 500:
                raise TransientProviderError(f"{url}: HTTP {exc.code}") from None
            raise ProviderError(f"{url}: HTTP {exc.code}") from None
        except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
            raise TransientProviderError(f"{url}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ProviderError(f"{url}: response is not JSON ({exc.msg})") from None


def _last_user_message(payload: dict) -> str:
    return payload["messages"][-1]["content"]


class MockBackend:
    """Deterministic offline backend.

    ``complete_fn`` maps a prompt to text; ``table`` is consulted first for
    exact prompts.  With ``sampled=True`` the function also receives the
    call's salt, standing in for the randomness of repeated draws.  ``embed_fn`` and ``cross_fn`` default to the hashed
    bag-of-words embedder and token Jaccard overlap.
    """

    def __init__(self, complete_fn: Optional[Callable[[str], str]] = None,
                 table: Optional[dict[str, str]] = None,
                 embed_fn: Optional[Callable[[str], np.ndarray]] = None,
                 cross_fn: Optional[Callable[[str, str], float]] = None,
                 sampled: bool = False):
        self.complete_fn = complete_fn
        self.sampled = sampled
        self.table = dict(table or {})
        self.embed_fn = embed_fn or hashed_embedding
        self.cross_fn = cross_fn or jaccard_overlap

    def request(self, kind: str, payload: dict, salt=None) -> dict:
        if kind == COMPLETE:
            prompt = _last_user_message(payload)
            if prompt in self.table:
                text = self.table[prompt]
            elif self.complete_fn is not None:
                text = (self.complete_fn(prompt, salt) if self.sampled
                        else self.complete_fn(prompt))
            else:
                raise ProviderError("mock completion table has no entry for prompt")
            return {"choices": [{"message": {"role": "assistant", "content": text}}]}
        if kind == EMBED:
            vec = self.embed_fn(payload["input"])
            return {"data": [{"embedding": [float(x) for x in vec]}]}
        if kind == CROSS:
            score = self.cross_fn(payload["query"], payload["documents"][0])
            return {"results": [{"index": 0, "relevance_score": float(score)}]}
        raise ValueError(f"unknown request kind {kind!r}")


_TOKEN = re.compile(r"\w+", re.UNICODE)


def mock_tokens(text: str) -> list[str]:
    return _TOKEN.findall(text.casefold())


def _token_vector(token: str, dim: int) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "little")
    return np.random.default_rng(seed).standard_normal(dim)


def hashed_embedding(text: str, dim: int = 256) -> np.ndarray:
    """Unit-norm sum of hash-seeded token vectors (a mock bi-encoder)."""
    toks = mock_tokens(text)
    if not toks:
        # punctuation-only text still gets a deterministic direction
        toks = [text]
    vec = np.zeros(dim)
    for tok in toks:
        vec += _token_vector(tok, dim)
    return vec / np.linalg.norm(vec)


def jaccard_overlap(a: str, b: str) -> float:
    ta, tb = set(mock_tokens(a)), set(mock_tokens(b))
    if not ta and not tb:
        return 1.0
    return len(ta & tb) / len(ta | tb)


@dataclass
class CallStats:
    attempts: int = 0
    cache_hits: int = 0
    calls: int = 0


class Provider:
    """Retrying, rate-limited, transcript-cached front end to a backend."""

    def __init__(self, backend, cfg: ProviderConfig = ProviderConfig(),
                 transcript: Optional[Transcript] = None, sleep=time.sleep):
        self.backend = backend
        self.cfg = cfg
        self.transcript = transcript
        self._sleep = sleep
        self._limiter = RateLimiter(cfg.rate_limit, sleep=sleep)
        self.stats = CallStats()
        self.last_attempts = 0

    def _dispatch(self, kind: str, payload: dict, salt=None) -> tuple[dict, int]:
        delay = self.cfg.backoff
        attempt = 0
        while True:
            attempt += 1
            self._limiter.wait()
            try:
                return self.backend.request(kind, payload, salt), attempt
            except TransientProviderError as exc:
                if attempt > self.cfg.max_retries:
                    raise ProviderError(f"retries exhausted after {attempt} attempts: "
                                        f"{exc}") from exc
                log.warning("transient provider failure (attempt %d): %s", attempt, exc)
                self._sleep(delay)
                delay *= 2

    def call(self, kind: str, payload: dict, salt=None) -> dict:
        self.stats.calls += 1
        key = cache_key(kind, self.cfg.model_name, payload, salt)
        if self.transcript is not None:
            hit = self.transcript.get(key)
            if hit is not None:
                self.stats.cache_hits += 1
                self.last_attempts = hit.get("attempts", 1)
                return hit["response"]
            if self.transcript.mode == "replay-strict":
                raise CacheMissError(key)
        response, attempts = self._dispatch(kind, payload, salt)
        self.stats.attempts += attempts
        self.last_attempts = attempts
        if self.transcript is not None:
            self.transcript.put({
                "key": key, "kind": kind, "model": self.cfg.model_name,
                "temperature": self.cfg.temperature, "request": payload,
                "salt": salt, "response": response,
                "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                "attempts": attempts,
            })
        return response

    def complete(self, prompt: str, salt=None) -> str:
        """Text completion for a single user prompt.

        ``salt`` distinguishes repeated draws of the same prompt in the cache
        key (e.g. the i-th paraphrase sample) without being sent upstream.
        """
        payload = {"model": self.cfg.model_name,
                   "messages": [{"role": "user", "content": prompt}],
                   "temperature": self.cfg.temperature}
        resp = self.call(COMPLETE, payload, salt)
        try:
            return resp["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise ProviderError(f"malformed completion response: {resp!r}") from None

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ProviderError("cannot embed empty text")
        resp = self.call(EMBED, {"model": self.cfg.model_name, "input": text})
        try:
            vec = np.asarray(resp["data"][0]["embedding"], dtype=float)
        except (KeyError, IndexError, TypeError, ValueError):
            raise ProviderError(f"malformed embedding response for {text!r}") from None
        if vec.ndim != 1 or vec.size == 0 or not np.all(np.isfinite(vec)):
            raise ProviderError("embedding must be a finite, non-empty vector")
        return vec

    def cross_score(self, a: str, b: str) -> float:
        resp = self.call(CROSS, {"model": self.cfg.model_name, "query": a, "documents": [b]})
        try:
            score = float(resp["results"][0]["relevance_score"])
        except (KeyError, IndexError, TypeError, ValueError):
            raise ProviderError(f"malformed cross-score response: {resp!r}") from None
        if not math.isfinite(score):
            raise ProviderError("cross-scorer returned a non-finite score")
        if score < 0.0 or score > 1.0:
            log.warning("cross-score %.4g outside [0, 1]; clamping", score)
            score = min(1.0, max(0.0, score))
        return score


def mock_provider(complete_fn=None, table=None, embed_fn=None, cross_fn=None,
                  model_name: str = "mock", transcript: Optional[Transcript] = None,
                  sampled: bool = False, **cfg) -> Provider:
    backend = MockBackend(complete_fn, table, embed_fn, cross_fn, sampled)
    return Provider(backend, ProviderConfig(model_name=model_name, **cfg), transcript)


def http_provider(cfg: ProviderConfig, transcript: Optional[Transcript] = None) -> Provider:
    return Provider(HttpBackend(cfg), cfg, transcript)
