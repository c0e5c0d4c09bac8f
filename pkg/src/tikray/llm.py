"""Pluggable chat-completion backends with response caching.

Three backends cover the experiment lifecycle: a remote HTTP provider for
real runs, a replay backend that serves recorded outputs keyed by prompt
digest for deterministic offline runs, and an identity mock that echoes the
source sentence for plumbing tests. Every response is cached keyed by
(prompt digest, model, generation params), so re-running a matrix against a
warm cache issues zero requests.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import httpx

from .prompts import PromptBundle, prompt_digest

logger = logging.getLogger(__name__)

BACKEND_REMOTE = "REMOTE"
BACKEND_REPLAY = "REPLAY"
BACKEND_MOCK = "MOCK"

STATUS_OK = "ok"
STATUS_FAILED = "failed"


class BackendError(RuntimeError):
    """A backend could not produce an output for a prompt."""


class ConfigurationError(RuntimeError):
    """A backend is not usable as configured (e.g. missing credential)."""


@dataclass(frozen=True)
class ModelSpec:
    """One model endpoint plus its generation parameters.

    ``params`` is persisted verbatim into run manifests so any setting is
    reproducible; by default nothing is sent and the provider's defaults apply.
    """

    model_id: str
    endpoint: str = ""
    params: Mapping[str, object] = field(default_factory=dict)
    auth_env: str = ""

    def __post_init__(self):
        if not self.model_id:
            raise ValueError("model_id must be non-empty")
        json.dumps(dict(self.params))  # params must be serializable

    def canonical_params(self) -> str:
        return json.dumps(dict(self.params), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class TranslationRecord:
    """One model output for one (item, model, condition, mode) cell."""

    item_id: str
    model_id: str
    condition: str
    mode: str
    prompt_hash: str
    output_text: str
    latency_ms: float
    created_at: str
    backend: str
    status: str = STATUS_OK
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "model_id": self.model_id,
            "condition": self.condition,
            "mode": self.mode,
            "prompt_hash": self.prompt_hash,
            "output_text": self.output_text,
            "latency_ms": self.latency_ms,
            "created_at": self.created_at,
            "backend": self.backend,
            "status": self.status,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TranslationRecord":
        return cls(**data)


class Backend(Protocol):
    kind: str

    def complete(self, full_prompt: str, spec: ModelSpec) -> str: ...


class IdentityMockBackend:
    """Echoes the source sentence from the prompt's task block."""

    kind = BACKEND_MOCK

    def complete(self, full_prompt: str, spec: ModelSpec) -> str:
        marker = "quechua: "
        tail = full_prompt.rfind(marker)
        if tail == -1:
            raise BackendError("prompt has no task block to echo")
        source = full_prompt[tail + len(marker) :].split("\n", 1)[0]
        return source


class ReplayBackend:
    """Serves recorded outputs keyed by prompt digest.

    Fixture file format: ``prompt_hash<TAB>output_text`` per line, with
    newlines, tabs and backslashes escaped as ``\\n``, ``\\t`` and ``\\\\``.
    """

    kind = BACKEND_REPLAY

    def __init__(self, outputs: Mapping[str, str]):
        self._outputs = dict(outputs)

    @staticmethod
    def escape(text: str) -> str:
        return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")

    @staticmethod
    def unescape(text: str) -> str:
        out: list[str] = []
        i = 0
        while i < len(text):
            if text[i] == "\\" and i + 1 < len(text):
                nxt = text[i + 1]
                out.append({"n": "\n", "t": "\t", "\\": "\\"}.get(nxt, "\\" + nxt))
                i += 2
            else:
                out.append(text[i])
                i += 1
        return "".join(out)

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayBackend":
        outputs: dict[str, str] = {}
        for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            cells = line.split("\t", 1)
            if len(cells) != 2:
                raise ValueError(f"replay fixture line {lineno} needs hash<TAB>output")
            outputs[cells[0].strip()] = cls.unescape(cells[1])
        return cls(outputs)

    def complete(self, full_prompt: str, spec: ModelSpec) -> str:
        digest = prompt_digest(full_prompt)
        if digest not in self._outputs:
            raise BackendError(f"no replay fixture for prompt {digest[:12]}…")
        return self._outputs[digest]


class RemoteBackend:
    """HTTP chat-completion backend: one user message per request, the first
    choice's message text taken verbatim. Bounded retries with exponential
    backoff on transport errors and 5xx/429 responses."""

    kind = BACKEND_REMOTE

    def __init__(
        self,
        client: httpx.Client | None = None,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        env: Mapping[str, str] | None = None,
    ):
        import os

        self._client = client or httpx.Client(timeout=60.0)
        self._max_attempts = max_attempts
        self._backoff_base = backoff_base
        self._env = env if env is not None else os.environ

    def _auth_headers(self, spec: ModelSpec) -> dict[str, str]:
        if not spec.auth_env:
            return {}
        token = self._env.get(spec.auth_env)
        if not token:
            raise ConfigurationError(
                f"credential environment variable {spec.auth_env!r} is not set"
            )
        return {"Authorization": f"Bearer {token}"}

    def complete(self, full_prompt: str, spec: ModelSpec) -> str:
        if not spec.endpoint:
            raise ConfigurationError(f"model {spec.model_id!r} has no endpoint")
        headers = self._auth_headers(spec)
        payload = {
            "model": spec.model_id,
            "messages": [{"role": "user", "content": full_prompt}],
            **dict(spec.params),
        }
        last_error: Exception | None = None
        for attempt in range(self._max_attempts):
            if attempt:
                time.sleep(self._backoff_base * (2 ** (attempt - 1)))
            try:
                response = self._client.post(spec.endpoint, json=payload, headers=headers)
                if response.status_code == 429 or response.status_code >= 500:
                    last_error = BackendError(f"HTTP {response.status_code}")
                    continue
                response.raise_for_status()
                data = response.json()
                return data["choices"][0]["message"]["content"]
            except (httpx.TransportError, json.JSONDecodeError, KeyError, IndexError) as exc:
                last_error = exc
            except httpx.HTTPStatusError as exc:
                raise BackendError(f"request rejected: {exc}") from exc
        raise BackendError(f"request failed after {self._max_attempts} attempts: {last_error}")


class ResponseCache:
    """Append-only response cache; concurrent writers are safe and identical
    keys always carry identical values by construction (last write wins)."""

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path else None
        self._entries: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self._path and self._path.exists():
            for line in self._path.read_text("utf-8").splitlines():
                if line.strip():
                    entry = json.loads(line)
                    self._entries[entry["key"]] = entry

    @staticmethod
    def key_for(prompt_hash: str, spec: ModelSpec) -> str:
        blob = f"{prompt_hash}\x1f{spec.model_id}\x1f{spec.canonical_params()}"
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def get(self, key: str) -> dict | None:
        with self._lock:
            return self._entries.get(key)

    def commit(self, key: str, value: dict) -> dict:
        """Insert if absent and return the authoritative entry.

        First write wins: concurrent requests for the same key (identical
        prompts in different cells) all converge on one entry, which keeps
        records reproducible across warm-cache re-runs.
        """
        with self._lock:
            existing = self._entries.get(key)
            if existing is not None:
                return existing
            entry = {"key": key, **value}
            self._entries[key] = entry
            if self._path:
                self._path.parent.mkdir(parents=True, exist_ok=True)
                with self._path.open("a", encoding="utf-8") as f:
                    f.write(json.dumps(entry, ensure_ascii=False) + "\n")
            return entry

    def __len__(self) -> int:
        return len(self._entries)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def translate(
    prompt: PromptBundle,
    spec: ModelSpec,
    backend: Backend,
    cache: ResponseCache | None = None,
) -> TranslationRecord:
    """Resolve one prompt to a record, via cache when possible.

    Backend failures come back as FAILED records so a single outage never
    aborts a matrix; configuration errors raise before any request.
    """
    digest = prompt_digest(prompt.full_prompt)
    base = dict(
        item_id=prompt.item_id,
        condition=prompt.condition.code,
        mode=prompt.mode.value,
        model_id=spec.model_id,
        prompt_hash=digest,
    )
    key = ResponseCache.key_for(digest, spec)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return TranslationRecord(
                **base,
                output_text=hit["output_text"],
                latency_ms=hit["latency_ms"],
                created_at=hit["created_at"],
                backend=hit["backend"],
            )

    started = time.perf_counter()
    try:
        output = backend.complete(prompt.full_prompt, spec)
    except BackendError as exc:
        logger.warning("backend failed for %s/%s: %s", prompt.item_id, spec.model_id, exc)
        return TranslationRecord(
            **base,
            output_text="",
            latency_ms=(time.perf_counter() - started) * 1000.0,
            created_at=_now(),
            backend=backend.kind,
            status=STATUS_FAILED,
            error=str(exc),
        )
    latency_ms = (time.perf_counter() - started) * 1000.0
    value = {
        "output_text": output,
        "latency_ms": latency_ms,
        "created_at": _now(),
        "backend": backend.kind,
    }
    if cache is not None:
        value = cache.commit(key, value)
    return TranslationRecord(
        **base,
        output_text=value["output_text"],
        latency_ms=value["latency_ms"],
        created_at=value["created_at"],
        backend=value["backend"],
    )


def run_matrix(
    prompts: Sequence[PromptBundle],
    specs: Sequence[ModelSpec],
    backend: Backend,
    cache: ResponseCache | None = None,
    max_in_flight: int = 4,
) -> list[TranslationRecord]:
    """One record per (prompt x spec), in deterministic dispatch order, with
    at most ``max_in_flight`` concurrent requests per spec."""
    records: list[TranslationRecord] = []
    for spec in specs:
        if not prompts:
            continue
        with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
            futures = [pool.submit(translate, prompt, spec, backend, cache) for prompt in prompts]
            records.extend(f.result() for f in futures)
    failures = [r for r in records if r.status == STATUS_FAILED]
    if failures:
        logger.warning(
            "%d of %d requests failed: %s",
            len(failures),
            len(records),
            ", ".join(f"{r.item_id}/{r.model_id}/{r.condition}" for r in failures[:10]),
        )
    return records


def strip_timestamps(record: TranslationRecord) -> TranslationRecord:
    """Timestamp-free view used for determinism checks and stage checksums."""
    return replace(record, latency_ms=0.0, created_at="")


def save_records(records: Sequence[TranslationRecord], path: str | Path) -> None:
    lines = [json.dumps(r.to_dict(), ensure_ascii=False) for r in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")


def load_records(path: str | Path) -> list[TranslationRecord]:
    return [
        TranslationRecord.from_dict(json.loads(line))
        for line in Path(path).read_text("utf-8").splitlines()
        if line.strip()
    ]
