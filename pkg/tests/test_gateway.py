import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import pytest

from cqabench.errors import AuthMissing, PayloadTooLarge, ProviderFailure, TransientExhausted
from cqabench.gateway import (
    Gateway,
    MockProvider,
    ProviderRef,
    Request,
    TransientFailure,
    cache_key,
    load_providers,
)


def test_mock_echo(mock_script):
    provider = mock_script(rules=[{"contains": "hello", "response": "scripted reply"}])
    gw = Gateway()
    ex = gw.complete(provider, Request(system="", user="hello there"))
    assert ex.response.text == "scripted reply"
    assert ex.response.attempt_count == 1
    assert not ex.response.cached


def test_mock_regex_template():
    mock = MockProvider(rules=[{"regex": r"chart (c\d+)", "response_template": "got {1}"}])
    assert mock.send(Request(system="", user="about chart c0042 please")) == "got c0042"


def test_mock_default_and_no_match():
    mock = MockProvider(rules=[], default="fallback")
    assert mock.send(Request(system="", user="anything")) == "fallback"
    strict = MockProvider(rules=[])
    with pytest.raises(ProviderFailure):
        strict.send(Request(system="", user="anything"))


class FlakyTransport:
    def __init__(self, failures):
        self.failures = failures
        self.calls = 0

    def send(self, request):
        self.calls += 1
        if self.calls <= self.failures:
            raise TransientFailure("boom")
        return "finally"


def test_retry_then_success(mock_script):
    provider = mock_script(max_retries=3)
    gw = Gateway()
    gw.register_transport(provider.provider_id, FlakyTransport(failures=2))
    ex = gw.complete(provider, Request(system="", user="x"))
    assert ex.response.text == "finally"
    assert ex.response.attempt_count == 3


def test_retry_exhausted(mock_script):
    provider = mock_script(max_retries=2)
    gw = Gateway()
    gw.register_transport(provider.provider_id, FlakyTransport(failures=5))
    with pytest.raises(TransientExhausted):
        gw.complete(provider, Request(system="", user="x"))


def test_cache_hit_skips_upstream(tmp_path, mock_script):
    provider = mock_script(default="expensive")
    gw = Gateway(cache_dir=tmp_path / "cache")

    class Counting:
        calls = 0

        def send(self, request):
            Counting.calls += 1
            return "expensive"

    gw.register_transport(provider.provider_id, Counting())
    req = Request(system="s", user="the same request")
    first = gw.complete(provider, req)
    second = gw.complete(provider, req)
    assert Counting.calls == 1
    assert not first.response.cached
    assert second.response.cached
    assert second.response.attempt_count == 0
    assert second.response.text == first.response.text


def test_cache_roundtrip_identical(tmp_path, mock_script):
    provider = mock_script(default="stable")
    gw = Gateway(cache_dir=tmp_path / "cache")
    req = Request(system="sys", user="u", expects="structured")
    a = gw.complete(provider, req)
    gw2 = Gateway(cache_dir=tmp_path / "cache")
    b = gw2.complete(provider, req)
    assert b.cache_key == a.cache_key
    assert b.response.text == a.response.text


def test_cache_key_depends_on_model_and_content():
    r = Request(system="s", user="u")
    assert cache_key(r, "m1") != cache_key(r, "m2")
    assert cache_key(Request(system="s", user="u2"), "m1") != cache_key(r, "m1")
    assert cache_key(Request(system="s", user="u"), "m1") == cache_key(r, "m1")


def test_payload_too_large(mock_script):
    provider = mock_script(default="x")
    gw = Gateway()
    with pytest.raises(PayloadTooLarge):
        gw.complete(provider, Request(system="", user="y" * 2_000_000))


def test_auth_missing(monkeypatch):
    provider = ProviderRef(
        provider_id="real", endpoint="https://example.invalid/v1/chat",
        model_name="m", auth_env="CQABENCH_TEST_KEY", max_retries=1, backoff=0.0,
    )
    monkeypatch.delenv("CQABENCH_TEST_KEY", raising=False)
    gw = Gateway()
    with pytest.raises(AuthMissing):
        gw.complete(provider, Request(system="", user="x"))


def test_concurrency_bounded(mock_script):
    provider = mock_script(max_concurrent=3)

    class Slow:
        def send(self, request):
            time.sleep(0.02)
            return "ok"

    gw = Gateway()
    gw.register_transport(provider.provider_id, Slow())
    with ThreadPoolExecutor(max_workers=12) as pool:
        futures = [
            pool.submit(gw.complete, provider, Request(system="", user=f"req {i}"))
            for i in range(24)
        ]
        for f in futures:
            f.result()
    assert gw.probe.high_water <= 3


def test_secrets_never_serialized(tmp_path, mock_script, monkeypatch):
    monkeypatch.setenv("SECRET_KEY_VAR", "hunter2")
    provider = mock_script(default="ok", auth_env="SECRET_KEY_VAR")
    gw = Gateway(cache_dir=tmp_path / "cache")
    gw.complete(provider, Request(system="", user="q"))
    for f in (tmp_path / "cache").glob("*.json"):
        assert "hunter2" not in f.read_text()


def test_load_providers(tmp_path):
    cfg = tmp_path / "providers.json"
    cfg.write_text(json.dumps({"providers": [
        {"provider_id": "gen", "endpoint": "mock:", "model_name": "gen-m", "script": "gen.json"},
        {"provider_id": "real", "endpoint": "https://api.example/v1", "auth_env": "KEY",
         "max_concurrent": 2, "max_retries": 5},
    ]}))
    (tmp_path / "gen.json").write_text(json.dumps({"rules": [], "default": "hi"}))
    refs = load_providers(cfg)
    assert refs["gen"].is_mock
    assert refs["gen"].script == str(tmp_path / "gen.json")
    assert refs["real"].max_retries == 5
    assert refs["real"].model_name == "real"
