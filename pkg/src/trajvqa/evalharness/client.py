"""Minimal chat-style JSON client for model endpoints."""

from __future__ import annotations

import base64
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import httpx

ENDPOINT_ENV = "ROBO2VLM_ENDPOINT"
API_KEY_ENV = "ROBO2VLM_API_KEY"


class EndpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    backoff_s: float = 1.0
    retry_status: tuple[int, ...] = (408, 429, 500, 502, 503, 504)


def image_data_url(path) -> str:
    data = Path(path).read_bytes()
    return "data:image/png;base64," + base64.b64encode(data).decode("ascii")


def user_message(text: str, images: Sequence = ()) -> dict:
    if not images:
        return {"role": "user", "content": text}
    content = [{"type": "text", "text": text}]
    content += [{"type": "image_url", "image_url": {"url": image_data_url(p)}} for p in images]
    return {"role": "user", "content": content}


def response_text(body: dict) -> str:
    if "choices" in body and body["choices"]:
        ch = body["choices"][0]
        if isinstance(ch.get("message"), dict):
            return ch["message"].get("content") or ""
        return ch.get("text") or ""
    for key in ("content", "text", "output"):
        if isinstance(body.get(key), str):
            return body[key]
    raise EndpointError("response has no text")


class ChatClient:
    def __init__(
        self,
        endpoint_url: str | None = None,
        model: str = "",
        api_key_env: str = API_KEY_ENV,
        timeout_s: float = 120.0,
        retry: RetryPolicy = RetryPolicy(),
        extra_body: dict | None = None,
    ):
        self.url = endpoint_url or os.environ.get(ENDPOINT_ENV)
        if not self.url:
            raise EndpointError(f"no endpoint URL (set {ENDPOINT_ENV})")
        self.model = model
        key = os.environ.get(api_key_env)
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self.retry = retry
        self.extra_body = dict(extra_body or {})
        self._http = httpx.Client(timeout=timeout_s, headers=headers)

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def complete(self, messages: list[dict], temperature: float, max_tokens: int) -> tuple[str, float]:
        payload = {"model": self.model, "messages": messages, "temperature": temperature,
                   "max_tokens": max_tokens, **self.extra_body}
        last = None
        for attempt in range(self.retry.attempts):
            t0 = time.perf_counter()
            try:
                r = self._http.post(self.url, content=json.dumps(payload))
                if r.status_code in self.retry.retry_status:
                    last = EndpointError(f"HTTP {r.status_code}")
                elif r.status_code >= 400:
                    raise EndpointError(f"HTTP {r.status_code}: {r.text[:200]}")
                else:
                    return response_text(r.json()), time.perf_counter() - t0
            except (httpx.HTTPError, json.JSONDecodeError) as exc:
                last = EndpointError(str(exc))
            if attempt + 1 < self.retry.attempts:
                time.sleep(self.retry.backoff_s * (2 ** attempt))
        raise EndpointError(f"endpoint failed after {self.retry.attempts} attempts: {last}")

    def ask(self, text: str, images: Sequence = (), temperature: float = 0.0, max_tokens: int = 16) -> str:
        return self.complete([user_message(text, images)], temperature, max_tokens)[0]
