"""HTTP clients for OpenAI-compatible chat, completion and embedding endpoints."""

from __future__ import annotations

import logging
import os
import threading
import time

import httpx
import numpy as np

from .errors import CapabilityError, NetworkError

logger = logging.getLogger(__name__)

API_KEY_ENV = "REVBROWSE_API_KEY"


def api_key_present() -> bool:
    return bool(os.environ.get(API_KEY_ENV, "").strip())


class TokenBucket:
    """Allows ``rate`` acquisitions per second with bursts up to ``capacity``."""

    def __init__(self, rate: float, capacity: float | None = None, clock=time.monotonic, sleep=time.sleep):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.capacity = capacity if capacity is not None else max(1.0, rate)
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        """Take one token, blocking as needed. Returns the time waited."""
        waited = 0.0
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return waited
                deficit = (1.0 - self._tokens) / self.rate
            self._sleep(deficit)
            waited += deficit


class _HttpBase:
    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff: float = 1.0,
        rate_limit: float | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._http = httpx.Client(timeout=timeout, headers=headers, transport=transport)
        self.max_retries = max_retries
        self.backoff = backoff
        self._bucket = TokenBucket(rate_limit) if rate_limit else None
        self._sleep = sleep

    def _post(self, path: str, payload: dict) -> dict:
        schedule = []
        last_err = None
        for attempt in range(self.max_retries + 1):
            if self._bucket is not None:
                self._bucket.acquire()
            try:
                resp = self._http.post(self.base_url + path, json=payload)
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise httpx.HTTPStatusError(
                        f"server returned {resp.status_code}", request=resp.request, response=resp
                    )
                resp.raise_for_status()
                return resp.json()
            except httpx.HTTPStatusError as exc:
                if exc.response.status_code < 500 and exc.response.status_code != 429:
                    raise NetworkError(f"{path}: {exc}", attempts=attempt + 1, backoff_schedule=schedule) from exc
                last_err = exc
            except (httpx.TransportError, ValueError) as exc:
                last_err = exc
            if attempt < self.max_retries:
                delay = self.backoff * 2**attempt
                schedule.append(delay)
                logger.warning("%s attempt %d failed (%s); retrying in %.1fs", path, attempt + 1, last_err, delay)
                self._sleep(delay)
        raise NetworkError(
            f"{path} failed after {self.max_retries + 1} attempts: {last_err}",
            attempts=self.max_retries + 1,
            backoff_schedule=schedule,
        )

    def close(self):
        self._http.close()


class ChatClient(_HttpBase):
    """Chat-completions client. Temperature is pinned to 0."""

    def complete(self, messages) -> str:
        data = self._post("/chat/completions", {"model": self.model, "messages": list(messages), "temperature": 0})
        try:
            return data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise NetworkError(f"malformed chat response: {exc}") from exc


class CompletionScoringClient(_HttpBase):
    """Legacy completions endpoint with ``logprobs`` for verbalizer scoring."""

    supports_logprobs = True

    def __init__(self, *args, top_logprobs: int = 26, **kwargs):
        super().__init__(*args, **kwargs)
        self.top_logprobs = top_logprobs

    def next_token_logprobs(self, prompt: str) -> dict[str, float]:
        data = self._post(
            "/completions",
            {"model": self.model, "prompt": prompt, "max_tokens": 1, "temperature": 0, "logprobs": self.top_logprobs},
        )
        try:
            top = data["choices"][0]["logprobs"]["top_logprobs"][0]
        except (KeyError, IndexError, TypeError) as exc:
            raise CapabilityError(
                "endpoint returned no logprobs; use the mock scorer or generation fallback"
            ) from exc
        return {str(tok): float(lp) for tok, lp in top.items()}

    def generate(self, prompt: str) -> str:
        data = self._post("/completions", {"model": self.model, "prompt": prompt, "max_tokens": 4, "temperature": 0})
        return data["choices"][0]["text"]


class EmbeddingClient(_HttpBase):
    def __init__(self, *args, batch_size: int = 64, **kwargs):
        super().__init__(*args, **kwargs)
        self.batch_size = batch_size
        self.dim = None

    def embed(self, texts) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.zeros((0, self.dim or 0))
        rows = []
        for start in range(0, len(texts), self.batch_size):
            chunk = texts[start : start + self.batch_size]
            data = self._post("/embeddings", {"model": self.model, "input": chunk})
            items = sorted(data["data"], key=lambda d: d.get("index", 0))
            rows.extend(item["embedding"] for item in items)
        out = np.asarray(rows, dtype=np.float64).reshape(len(texts), -1)
        if self.dim is None and len(out):
            self.dim = out.shape[1]
        return out
