"""Chat-completion backends behind one contract: canonical request digests,
a live HTTP client (OpenAI-compatible wire shape) with retries and deadlines,
a deterministic scripted/replay backend, and append-only transcripts."""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping

from .errors import BackendHTTP, BackendTimeout, CredentialMissing, ReplayMiss

API_KEY_ENV = "MOSAIC_API_KEY"
DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_TOKENS = 2048
DEFAULT_MAX_RETRIES = 3
DEFAULT_DEADLINE_S = 120.0
RETRYABLE_STATUSES = (408, 429, 500, 502, 503, 504)

ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple((r, c) for r, c in self.messages))
        object.__setattr__(self, "temperature", float(self.temperature))
        object.__setattr__(self, "max_tokens", int(self.max_tokens))
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[0][0] not in ("system", "user"):
            raise ValueError("first message role must be system or user")
        for role, _ in self.messages:
            if role not in ROLES:
                raise ValueError(f"bad role {role!r}")


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: str = "stop"  # stop | length | error
    usage: Mapping[str, int] | None = None
    latency_ms: int = 0


def canonical_digest(request: ChatRequest) -> str:
    """sha256 over a canonical serialization of the request, excluding the
    tag (and anything else that does not shape the completion)."""
    canonical = json.dumps(
        {
            "max_tokens": request.max_tokens,
            "messages": [[r, c] for r, c in request.messages],
            "model_id": request.model_id,
            "temperature": float(request.temperature),
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=True,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# Transcript
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TranscriptEntry:
    digest: str
    request: ChatRequest
    response: ChatResponse
    ts: float
    meta: Mapping[str, Any] = field(default_factory=dict)


class Transcript:
    """Append-only exchange log; appends are serialized via a lock."""

    def __init__(self):
        self._entries: list[TranscriptEntry] = []
        self._lock = threading.Lock()

    def append(self, entry: TranscriptEntry) -> None:
        with self._lock:
            self._entries.append(entry)

    @property
    def entries(self) -> list[TranscriptEntry]:
        with self._lock:
            return list(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def count_tag(self, prefix: str) -> int:
        return sum(1 for e in self.entries if e.request.tag.startswith(prefix))

    def write_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for e in self.entries:
                fh.write(json.dumps(_entry_to_json(e), sort_keys=True) + "\n")


def _entry_to_json(e: TranscriptEntry) -> dict:
    return {
        "digest": e.digest,
        "request": {
            "model_id": e.request.model_id,
            "messages": [[r, c] for r, c in e.request.messages],
            "temperature": e.request.temperature,
            "max_tokens": e.request.max_tokens,
            "tag": e.request.tag,
        },
        "response": {
            "content": e.response.content,
            "finish_reason": e.response.finish_reason,
            "usage": dict(e.response.usage) if e.response.usage else None,
            "latency_ms": e.response.latency_ms,
        },
        "ts": e.ts,
        "meta": dict(e.meta),
    }


def load_replay_store(path: str | Path) -> dict[str, ChatResponse]:
    """Build a digest -> response map from a transcript JSONL file."""
    store: dict[str, ChatResponse] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            resp = obj["response"]
            store[obj["digest"]] = ChatResponse(
                content=resp["content"],
                finish_reason=resp.get("finish_reason", "stop"),
                usage=resp.get("usage"),
                latency_ms=int(resp.get("latency_ms", 0)),
            )
    return store


def scripted_complete(request: ChatRequest, store: Mapping[str, ChatResponse]) -> ChatResponse:
    digest = canonical_digest(request)
    try:
        return store[digest]
    except KeyError:
        raise ReplayMiss(
            f"no stored response for digest {digest} (tag={request.tag!r})"
        ) from None


# --------------------------------------------------------------------------
# Backends
# --------------------------------------------------------------------------

class Backend:
    """Base: owns the transcript and the default decoding parameters."""

    def __init__(
        self,
        model_id: str = "scripted-model",
        temperature: float = DEFAULT_TEMPERATURE,
        max_tokens: int = DEFAULT_MAX_TOKENS,
    ):
        self.model_id = model_id
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.transcript = Transcript()

    def build_request(self, system: str, user: str, tag: str) -> ChatRequest:
        return ChatRequest(
            model_id=self.model_id,
            messages=(("system", system), ("user", user)),
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            tag=tag,
        )

    def complete(self, request: ChatRequest) -> ChatResponse:
        digest = canonical_digest(request)
        response, meta = self._respond(request, digest)
        self.transcript.append(
            TranscriptEntry(digest=digest, request=request, response=response,
                            ts=time.time(), meta=meta)
        )
        return response

    def _respond(self, request: ChatRequest, digest: str) -> tuple[ChatResponse, dict]:
        raise NotImplementedError


class ScriptedBackend(Backend):
    """Deterministic replay backend keyed by canonical digests."""

    def __init__(self, store: Mapping[str, ChatResponse], **params):
        super().__init__(**params)
        self._store = dict(store)

    @classmethod
    def from_transcript(cls, path: str | Path, **params) -> "ScriptedBackend":
        return cls(load_replay_store(path), **params)

    def _respond(self, request: ChatRequest, digest: str) -> tuple[ChatResponse, dict]:
        return scripted_complete(request, self._store), {"mode": "scripted"}


def _requests_transport(url: str, headers: Mapping[str, str], body: Mapping,
                        timeout: float) -> tuple[int, dict]:
    import requests

    try:
        resp = requests.post(url, headers=dict(headers), json=dict(body), timeout=timeout)
    except requests.Timeout as exc:
        raise TimeoutError(str(exc)) from exc
    except requests.ConnectionError as exc:
        raise ConnectionError(str(exc)) from exc
    try:
        payload = resp.json()
    except ValueError:
        payload = {"error": resp.text[:2000]}
    return resp.status_code, payload


class LiveBackend(Backend):
    """One chat-completion HTTP exchange per call, with bounded retries on
    transient failures and a per-request deadline.

    `transport(url, headers, body, timeout) -> (status, payload)` is
    injectable for tests; transient failures are TimeoutError /
    ConnectionError or a retryable HTTP status.
    """

    def __init__(
        self,
        url: str,
        api_key: str,
        *,
        max_retries: int = DEFAULT_MAX_RETRIES,
        deadline_s: float = DEFAULT_DEADLINE_S,
        transport: Callable[..., tuple[int, dict]] | None = None,
        backoff_s: float = 1.0,
        **params,
    ):
        super().__init__(**params)
        self.url = url
        self._api_key = api_key
        self.max_retries = max_retries
        self.deadline_s = deadline_s
        self.backoff_s = backoff_s
        self._transport = transport or _requests_transport

    def _respond(self, request: ChatRequest, digest: str) -> tuple[ChatResponse, dict]:
        headers = {"Authorization": f"Bearer {self._api_key}",
                   "Content-Type": "application/json"}
        body = {
            "model": request.model_id,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        attempts = 0
        last_exc: Exception | None = None
        while attempts <= self.max_retries:
            started = time.monotonic()
            try:
                status, payload = self._transport(self.url, headers, body, self.deadline_s)
            except (TimeoutError, ConnectionError) as exc:
                last_exc = exc
                attempts += 1
                time.sleep(self.backoff_s * attempts if self.backoff_s else 0)
                continue
            latency_ms = int((time.monotonic() - started) * 1000)
            if status == 200:
                response = _parse_completion(payload, latency_ms)
                return response, {"mode": "live", "retries": attempts}
            if status in RETRYABLE_STATUSES:
                last_exc = BackendHTTP(status, str(payload)[:500])
                attempts += 1
                time.sleep(self.backoff_s * attempts if self.backoff_s else 0)
                continue
            raise BackendHTTP(status, str(payload)[:500])
        if isinstance(last_exc, TimeoutError):
            raise BackendTimeout(
                f"deadline {self.deadline_s}s exceeded after {attempts} attempts"
            ) from last_exc
        raise last_exc if last_exc else BackendHTTP(0, "no attempt made")


def _parse_completion(payload: Mapping, latency_ms: int) -> ChatResponse:
    try:
        choice = payload["choices"][0]
        content = choice["message"]["content"] or ""
        finish = choice.get("finish_reason", "stop")
    except (KeyError, IndexError, TypeError) as exc:
        raise BackendHTTP(200, f"malformed completion payload: {exc}") from exc
    if finish not in ("stop", "length"):
        finish = "stop"
    usage = payload.get("usage")
    return ChatResponse(content=content, finish_reason=finish,
                        usage=usage, latency_ms=latency_ms)


# --------------------------------------------------------------------------
# Config-driven construction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BackendConfig:
    mode: str = "scripted"  # live | scripted
    url: str | None = None
    model_id: str = "scripted-model"
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    max_retries: int = DEFAULT_MAX_RETRIES
    request_timeout_s: float = DEFAULT_DEADLINE_S
    replay_path: str | None = None

    def with_replay(self, path: str) -> "BackendConfig":
        return replace(self, mode="scripted", replay_path=path)


def make_backend(config: BackendConfig) -> Backend:
    params = {
        "model_id": config.model_id,
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    }
    if config.mode == "scripted":
        if not config.replay_path:
            raise ValueError("scripted mode requires replay_path")
        return ScriptedBackend.from_transcript(config.replay_path, **params)
    if config.mode == "live":
        if not config.url:
            raise ValueError("live mode requires an endpoint url")
        api_key = os.environ.get(API_KEY_ENV, "")
        if not api_key:
            raise CredentialMissing(f"set {API_KEY_ENV} for live mode")
        return LiveBackend(
            config.url,
            api_key,
            max_retries=config.max_retries,
            deadline_s=config.request_timeout_s,
            **params,
        )
    raise ValueError(f"unknown backend mode {config.mode!r}")


def complete(request: ChatRequest, config: BackendConfig | Backend) -> ChatResponse:
    """One-shot completion against a config (or an existing backend)."""
    backend = config if isinstance(config, Backend) else make_backend(config)
    return backend.complete(request)
