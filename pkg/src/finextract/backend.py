"""Uniform extraction interface over local, remote and mock backends.

Every backend receives the rendered instruction prompt for an instance and
returns the raw completion text untouched; parsing belongs to structout.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import httpx

from .corpus.types import Dataset, Instance
from .errors import ConfigError, TransportError
from .prompting import build_prompt, detokenize, make_prompt_pair, serialize_target, tokenize


@dataclass
class RemoteConfig:
    base_url: str
    model: str
    path: str = "/v1/chat/completions"
    token_env: str = "FINEXTRACT_API_TOKEN"
    timeout: float = 30.0
    max_retries: int = 3
    max_in_flight: int = 4
    backoff_base: float = 0.5
    max_tokens: int = 300

    def validate(self) -> None:
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")


@dataclass
class RawOutput:
    """Raw completion for one instance, plus transport bookkeeping."""

    instance_id: str
    raw_text: str
    latency: float
    attempts: int
    backend: str
    error: Optional[str] = None

    def to_record(self) -> dict:
        return {
            "id": self.instance_id,
            "raw_text": self.raw_text,
            "latency": self.latency,
            "attempts": self.attempts,
            "backend": self.backend,
            "error": self.error,
        }


class MockBackend:
    """Deterministic backend for tests and oracle wiring.

    mode "echo" returns the canonical serialization of the instance's gold
    spans; "empty" returns ""; "fixed" returns a constant payload; "map"
    looks raw text up by instance id.
    """

    kind = "mock"

    def __init__(self, mode: str = "echo", payload: str = "",
                 table: Optional[dict[str, str]] = None):
        if mode not in ("echo", "empty", "fixed", "map"):
            raise ConfigError(f"unknown mock mode {mode!r}")
        self.mode = mode
        self.payload = payload
        self.table = table or {}
        self.max_in_flight = 4

    def extract(self, instance: Instance) -> RawOutput:
        build_prompt(instance)  # mirrors the real request path
        if self.mode == "echo":
            text = serialize_target(instance.gold, instance.text)
        elif self.mode == "empty":
            text = ""
        elif self.mode == "fixed":
            text = self.payload
        else:
            text = self.table.get(instance.id, "")
        return RawOutput(instance_id=instance.id, raw_text=text, latency=0.0,
                         attempts=1, backend=self.kind)


class LocalBackend:
    """Greedy decoding with a trained checkpoint; pure in (checkpoint, instance)."""

    kind = "local"

    def __init__(self, checkpoint_path, max_new_tokens: int = 300):
        from .model import load_checkpoint

        self.state = load_checkpoint(checkpoint_path)
        self.max_new_tokens = max_new_tokens
        self.max_in_flight = 1

    def extract(self, instance: Instance) -> RawOutput:
        from .model import generate

        t0 = time.perf_counter()
        prompt_ids = tokenize(build_prompt(instance)).ids
        # Clamp the budget to the context room; a truncated generation is a
        # normal outcome handled by the output parser.
        budget = min(self.max_new_tokens,
                     self.state.model_cfg.max_seq_len - len(prompt_ids) - 1)
        out_ids = generate(self.state, prompt_ids, max(budget, 0))
        return RawOutput(
            instance_id=instance.id, raw_text=detokenize(out_ids),
            latency=time.perf_counter() - t0, attempts=1, backend=self.kind,
        )


class RemoteBackend:
    """HTTP chat-completions client with retry and exponential backoff.

    Request: POST {base_url}{path} with JSON
        {"model": ..., "messages": [{"role": "user", "content": prompt}],
         "max_tokens": ..., "temperature": 0}
    Response: first choice's message.content, taken verbatim.
    The bearer token is read from the environment variable named in config.
    """

    kind = "remote"

    RETRYABLE_STATUS = frozenset({408, 429, 500, 502, 503, 504})

    def __init__(self, config: RemoteConfig, transport=None,
                 sleep: Callable[[float], None] = time.sleep):
        config.validate()
        self.config = config
        self.max_in_flight = config.max_in_flight
        self._sleep = sleep
        headers = {}
        token = os.environ.get(config.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(
            base_url=config.base_url, headers=headers,
            timeout=config.timeout, transport=transport,
        )

    def extract(self, instance: Instance) -> RawOutput:
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": build_prompt(instance)}],
            "max_tokens": self.config.max_tokens,
            "temperature": 0,
        }
        t0 = time.perf_counter()
        last_error = "no attempt made"
        last_status: Optional[int] = None
        for attempt in range(1, self.config.max_retries + 2):
            try:
                response = self._client.post(self.config.path, json=payload)
            except httpx.HTTPError as exc:
                last_error = f"transport failure: {exc}"
                last_status = None
            else:
                last_status = response.status_code
                if response.status_code == 200:
                    body = response.json()
                    text = body["choices"][0]["message"]["content"]
                    return RawOutput(
                        instance_id=instance.id, raw_text=text,
                        latency=time.perf_counter() - t0,
                        attempts=attempt, backend=self.kind,
                    )
                last_error = f"HTTP {response.status_code}"
                if response.status_code not in self.RETRYABLE_STATUS:
                    break
            if attempt <= self.config.max_retries:
                self._sleep(self.config.backoff_base * (2 ** (attempt - 1)))
        raise TransportError(
            f"extraction failed for {instance.id} after retries: {last_error}",
            last_status=last_status,
        )

    def close(self) -> None:
        self._client.close()


def run_batch(backend, dataset: Dataset | Sequence[Instance]) -> list[RawOutput]:
    """Extract every instance; results in dataset order.

    At most backend.max_in_flight requests are outstanding. Per-instance
    failures are embedded in the result list, never aborting the batch.
    """
    instances = list(dataset)
    if not instances:
        raise ConfigError("run_batch requires a nonempty dataset")
    max_workers = max(1, getattr(backend, "max_in_flight", 1))

    def one(instance: Instance) -> RawOutput:
        try:
            return backend.extract(instance)
        except TransportError as exc:
            return RawOutput(
                instance_id=instance.id, raw_text="", latency=0.0,
                attempts=getattr(backend, "config",
                                 RemoteConfig("", "")).max_retries + 1
                if backend.kind == "remote" else 1,
                backend=backend.kind, error=str(exc),
            )
        except Exception as exc:  # pragma: no cover - defensive
            return RawOutput(instance_id=instance.id, raw_text="", latency=0.0,
                             attempts=1, backend=backend.kind, error=str(exc))

    if max_workers == 1:
        return [one(inst) for inst in instances]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(one, instances))
