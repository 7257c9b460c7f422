"""Uniform LLM provider access: retries, disk cache, bounded concurrency.

Every stage that talks to a model goes through Gateway.complete so the
whole pipeline can run offline against the scripted mock, and so reruns of
large jobs hit the content-addressed cache instead of the network.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import httpx

from . import jsonl
from .errors import AuthMissing, PayloadTooLarge, ProviderFailure, TransientExhausted

MAX_PAYLOAD_CHARS = 1_000_000


@dataclass(frozen=True)
class ProviderRef:
    provider_id: str
    endpoint: str                      # "mock:" or an HTTP chat-completions URL
    model_name: str
    auth_env: Optional[str] = None     # env var holding the key; never the key itself
    vision: bool = False
    json_mode: bool = False
    max_concurrent: int = 4
    max_retries: int = 3
    backoff: float = 0.5
    script: Optional[str] = None       # mock rule file

    @property
    def is_mock(self) -> bool:
        return self.endpoint.startswith("mock:")


@dataclass(frozen=True)
class Request:
    system: str
    user: str
    attachments: tuple[str, ...] = ()
    expects: str = "text"  # text | structured


@dataclass
class Response:
    text: str
    latency: float = 0.0
    attempt_count: int = 0
    cached: bool = False


@dataclass
class Exchange:
    request: Request
    response: Response
    cache_key: str


def cache_key(request: Request, model_name: str) -> str:
    payload = json.dumps(
        {
            "system": request.system,
            "user": request.user,
            "attachments": list(request.attachments),
            "expects": request.expects,
            "model_name": model_name,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class TransientFailure(Exception):
    """Internal: the transport hit something a retry may fix."""


class MockProvider:
    """Deterministic scripted transport.

    Rules are tried in order; the first whose `contains` substring or
    `regex` matches the combined system+user text wins. A regex rule may
    carry a `response_template` where {0}, {1}, ... are replaced by the
    match groups. With no matching rule the `default` reply is used;
    a script without a default fails the call.
    """

    def __init__(self, rules: list[dict], default: Optional[str] = None, provider_id: str = "mock"):
        self.rules = rules
        self.default = default
        self.provider_id = provider_id

    @classmethod
    def from_script(cls, path: str | Path, provider_id: str = "mock") -> "MockProvider":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(rules=data.get("rules", []), default=data.get("default"), provider_id=provider_id)

    def send(self, request: Request) -> str:
        text = f"{request.system}\n{request.user}"
        for rule in self.rules:
            if "contains" in rule and rule["contains"] in text:
                return rule["response"]
            if "regex" in rule:
                m = re.search(rule["regex"], text, re.S)
                if m:
                    if "response_template" in rule:
                        out = rule["response_template"]
                        for i, g in enumerate((m.group(0),) + m.groups()):
                            out = out.replace("{%d}" % i, g if g is not None else "")
                        return out
                    return rule["response"]
        if self.default is not None:
            return self.default
        raise ProviderFailure(self.provider_id, "no mock rule matched and no default reply configured")


class HttpProvider:
    """Minimal chat-completions transport for OpenAI-style endpoints."""

    def __init__(self, ref: ProviderRef, timeout: float = 120.0):
        self.ref = ref
        self.timeout = timeout

    def send(self, request: Request) -> str:
        if self.ref.auth_env:
            key = os.environ.get(self.ref.auth_env)
            if not key:
                raise AuthMissing(self.ref.auth_env)
            headers = {"Authorization": f"Bearer {key}"}
        else:
            headers = {}
        messages = []
        if request.system:
            messages.append({"role": "system", "content": request.system})
        messages.append({"role": "user", "content": request.user})
        body = {"model": self.ref.model_name, "messages": messages}
        if self.ref.json_mode and request.expects == "structured":
            body["response_format"] = {"type": "json_object"}
        try:
            resp = httpx.post(self.ref.endpoint, json=body, headers=headers, timeout=self.timeout)
        except httpx.HTTPError as exc:
            raise TransientFailure(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientFailure(f"status {resp.status_code}")
        if resp.status_code >= 400:
            raise ProviderFailure(self.ref.provider_id, f"status {resp.status_code}")
        data = resp.json()
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderFailure(self.ref.provider_id, "unexpected response shape") from exc


@dataclass
class _ProbeCounter:
    """Test hook: watermark of simultaneous in-flight upstream calls."""

    lock: threading.Lock = field(default_factory=threading.Lock)
    in_flight: int = 0
    high_water: int = 0

    def enter(self):
        with self.lock:
            self.in_flight += 1
            self.high_water = max(self.high_water, self.in_flight)

    def exit(self):
        with self.lock:
            self.in_flight -= 1


class Gateway:
    """Caching, retrying front door for all provider calls."""

    def __init__(self, cache_dir: Optional[str | Path] = None, sleep: Callable[[float], None] = time.sleep):
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self._sleep = sleep
        self._transports: dict[str, object] = {}
        self._semaphores: dict[str, threading.Semaphore] = {}
        self._lock = threading.Lock()
        self.probe = _ProbeCounter()

    def register_transport(self, provider_id: str, transport) -> None:
        """Install a custom transport (tests use this to inject failures)."""
        self._transports[provider_id] = transport

    def _transport_for(self, provider: ProviderRef):
        with self._lock:
            if provider.provider_id not in self._transports:
                if provider.is_mock:
                    if not provider.script:
                        raise ProviderFailure(provider.provider_id, "mock provider needs a script file")
                    self._transports[provider.provider_id] = MockProvider.from_script(
                        provider.script, provider.provider_id
                    )
                else:
                    self._transports[provider.provider_id] = HttpProvider(provider)
            return self._transports[provider.provider_id]

    def _semaphore_for(self, provider: ProviderRef) -> threading.Semaphore:
        with self._lock:
            if provider.provider_id not in self._semaphores:
                self._semaphores[provider.provider_id] = threading.Semaphore(provider.max_concurrent)
            return self._semaphores[provider.provider_id]

    def _cache_path(self, key: str) -> Optional[Path]:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{key}.json"

    def _cache_load(self, key: str, request: Request) -> Optional[Exchange]:
        path = self._cache_path(key)
        if path is None or not path.exists():
            return None
        data = json.loads(path.read_text(encoding="utf-8"))
        return Exchange(
            request=request,
            response=Response(
                text=data["response"]["text"],
                latency=data["response"].get("latency", 0.0),
                attempt_count=0,
                cached=True,
            ),
            cache_key=key,
        )

    def _cache_store(self, exchange: Exchange) -> None:
        path = self._cache_path(exchange.cache_key)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        jsonl.write_text(
            path,
            json.dumps(
                {
                    "cache_key": exchange.cache_key,
                    "request": {
                        "system": exchange.request.system,
                        "user": exchange.request.user,
                        "attachments": list(exchange.request.attachments),
                        "expects": exchange.request.expects,
                    },
                    "response": {
                        "text": exchange.response.text,
                        "latency": exchange.response.latency,
                        "attempt_count": exchange.response.attempt_count,
                    },
                },
                ensure_ascii=False,
            ),
        )

    def complete(self, provider: ProviderRef, request: Request) -> Exchange:
        if not request.user.strip():
            raise ProviderFailure(provider.provider_id, "empty request")
        size = len(request.system) + len(request.user) + sum(len(a) for a in request.attachments)
        if size > MAX_PAYLOAD_CHARS:
            raise PayloadTooLarge(size, MAX_PAYLOAD_CHARS)

        key = cache_key(request, provider.model_name)
        cached = self._cache_load(key, request)
        if cached is not None:
            return cached

        transport = self._transport_for(provider)
        sem = self._semaphore_for(provider)
        attempts = 0
        start = time.monotonic()
        last_reason = ""
        while attempts < max(1, provider.max_retries):
            attempts += 1
            with sem:
                self.probe.enter()
                try:
                    text = transport.send(request)
                except TransientFailure as exc:
                    last_reason = str(exc)
                    self.probe.exit()
                    if attempts < max(1, provider.max_retries):
                        self._sleep(provider.backoff * (2 ** (attempts - 1)))
                    continue
                except BaseException:
                    self.probe.exit()
                    raise
                self.probe.exit()
            exchange = Exchange(
                request=request,
                response=Response(
                    text=text,
                    latency=time.monotonic() - start,
                    attempt_count=attempts,
                ),
                cache_key=key,
            )
            self._cache_store(exchange)
            return exchange
        raise TransientExhausted(provider.provider_id, attempts) from None


def load_providers(path: str | Path) -> dict[str, ProviderRef]:
    """Read a provider config file (a list, or an object with a `providers` list)."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = data["providers"] if isinstance(data, dict) else data
    refs = {}
    base = Path(path).parent
    for entry in entries:
        script = entry.get("script")
        if script and not os.path.isabs(script):
            script = str(base / script)
        ref = ProviderRef(
            provider_id=entry["provider_id"],
            endpoint=entry["endpoint"],
            model_name=entry.get("model_name", entry["provider_id"]),
            auth_env=entry.get("auth_env"),
            vision=bool(entry.get("vision", False)),
            json_mode=bool(entry.get("json_mode", False)),
            max_concurrent=int(entry.get("max_concurrent", 4)),
            max_retries=int(entry.get("max_retries", 3)),
            backoff=float(entry.get("backoff", 0.5)),
            script=script,
        )
        refs[ref.provider_id] = ref
    return refs
