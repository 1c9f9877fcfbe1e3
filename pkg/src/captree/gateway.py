"""Single choke-point for chat-completion and embedding calls.

Every LM-facing step goes through ``LlmGateway``: it owns the response cache,
enforces the global parallelism bound, and hides whether the provider is a
remote OpenAI-compatible endpoint or the deterministic offline mock.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import requests

from .core import ConfigurationError, ProviderError, ValidationError, stable_hash_int
from .prompts import JUDGE_TEMPLATE, PROMPT_VERSION

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    max_new_tokens: int = 1024
    temperature: float = 0.0
    model: str = ""

    def __post_init__(self):
        if not self.system_prompt or not self.user_prompt:
            raise ValidationError("chat request prompts must be non-empty")
        if self.temperature < 0.0:
            raise ValidationError("temperature must be >= 0")


@dataclass
class ProviderConfig:
    base_url: str = "https://api.openai.com/v1"
    api_key_env_name: str = "OPENAI_API_KEY"
    chat_model: str = "gpt-4o-mini-2024-07-18"
    embed_model: str = "text-embedding-3-small"
    max_parallel_requests: int = 8
    max_attempts: int = 3
    backoff_seconds: float = 1.0
    request_timeout: float = 120.0
    cache_dir: str | Path | None = None
    prompt_version: str = PROMPT_VERSION
    embed_batch_size: int = 128

    def __post_init__(self):
        if self.max_parallel_requests < 1:
            raise ConfigurationError("max_parallel_requests must be >= 1")
        if self.max_attempts < 1:
            raise ConfigurationError("max_attempts must be >= 1")


class ResponseCache:
    """Content-addressed cache: in-memory always, mirrored to disk when configured.

    Disk writes are atomic (write temp file, then rename) so concurrent
    writers can never leave a torn entry behind.
    """

    def __init__(self, cache_dir: str | Path | None = None):
        self._dir = Path(cache_dir) if cache_dir is not None else None
        self._memory: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self._dir is not None:
            self._dir.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        assert self._dir is not None
        return self._dir / key[:2] / f"{key}.json"

    def get(self, key: str) -> dict | None:
        with self._lock:
            if key in self._memory:
                return self._memory[key]
        if self._dir is not None:
            path = self._path(key)
            if path.exists():
                value = json.loads(path.read_text(encoding="utf-8"))
                with self._lock:
                    self._memory[key] = value
                return value
        return None

    def put(self, key: str, value: dict) -> None:
        with self._lock:
            self._memory[key] = value
        if self._dir is not None:
            path = self._path(key)
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.parent / f".{key}.{os.getpid()}.{threading.get_ident()}.tmp"
            tmp.write_text(json.dumps(value, ensure_ascii=False), encoding="utf-8")
            os.replace(tmp, path)


def _digest(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, ensure_ascii=False).encode()).hexdigest()


_stable_int = stable_hash_int


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------


_GERUNDS = (
    "analyzing", "applying", "evaluating", "deriving", "synthesizing",
    "computing", "interpreting", "formulating", "decomposing", "verifying",
)
_QUALIFIERS = (
    "multi-step", "recursive", "symbolic", "structured", "numerical",
    "abstract", "contextual", "layered", "conditional", "compositional",
)
_SUBJECTS = (
    "relationships", "constraints", "patterns", "expressions", "procedures",
    "transformations", "dependencies", "representations", "quantities", "arguments",
)


def _mock_phrase(token: int) -> str:
    g = _GERUNDS[token % len(_GERUNDS)]
    q = _QUALIFIERS[(token // 10) % len(_QUALIFIERS)]
    s = _SUBJECTS[(token // 100) % len(_SUBJECTS)]
    return f"{g} {q} {s}"


def _count_listed_capabilities(user_prompt: str) -> int:
    m = re.search(r"## Capabilities\n(.*?)(?:\n## |\Z)", user_prompt, flags=re.S)
    if not m:
        return 0
    return sum(1 for line in m.group(1).splitlines() if line.strip())


class MockProvider:
    """Deterministic offline provider.

    Replies depend only on (seed, request content). The default responder
    recognizes the prompt shapes used by the pipeline (judge, yes/no
    association, capability listing, relevance scoring, ...) so that every
    command runs end-to-end without a network. Tests can substitute a
    ``responder`` callable to script specific behaviors.
    """

    def __init__(
        self,
        seed: int = 0,
        embed_dim: int = 64,
        responder: Callable[[ChatRequest], str] | None = None,
        latency: float = 0.0,
    ):
        self.seed = seed
        self.embed_dim = embed_dim
        self.responder = responder
        self.latency = latency
        self.chat_calls = 0
        self.embed_calls = 0
        self.max_in_flight = 0
        self._in_flight = 0
        self._lock = threading.Lock()

    @property
    def tag(self) -> str:
        return f"mock:seed={self.seed}:dim={self.embed_dim}"

    def _enter(self) -> None:
        with self._lock:
            self._in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self._in_flight)

    def _exit(self) -> None:
        with self._lock:
            self._in_flight -= 1

    def chat(self, request: ChatRequest) -> str:
        self._enter()
        try:
            with self._lock:
                self.chat_calls += 1
            if self.latency:
                time.sleep(self.latency)
            if self.responder is not None:
                return self.responder(request)
            return self._default_response(request)
        finally:
            self._exit()

    def _default_response(self, request: ChatRequest) -> str:
        token = _stable_int(str(self.seed), request.model, request.system_prompt, request.user_prompt)
        user = request.user_prompt
        system = request.system_prompt
        if "Select the Output (a) or Output (b)" in user:
            return "Output (a)" if token % 2 == 0 else "Output (b)"
        if "output YES. Otherwise, output NO" in user:
            return "YES" if token % 4 == 0 else "NO"
        if '"reasoning": "THE REASONING"' in user:
            count = _count_listed_capabilities(user)
            scores = {
                str(i + 1): {"reasoning": "mock", "score": 1 + (token >> (i % 48)) % 5}
                for i in range(count)
            }
            return json.dumps(scores)
        if "Output exactly 20 weaknesses" in user:
            return "\n".join(_mock_phrase(token + 37 * i) for i in range(20))
        if "no more than 20 capabilities" in user:
            return "\n".join(_mock_phrase(token + 101 * i) for i in range(20))
        if "summarizing any related capabilities under broader categories" in user:
            return "\n".join(_mock_phrase(token + 53 * i) for i in range(8))
        if "Generate one unique" in user:
            return f"Mock task {token % 100000}: determine the required value."
        if "groups in total" in user or "gerund phrase" in system or "generate a phrase" in system:
            return _mock_phrase(token)
        return _mock_phrase(token)

    def embed_batch(self, texts: Sequence[str], model: str) -> list[list[float]]:
        self._enter()
        try:
            with self._lock:
                self.embed_calls += 1
            if self.latency:
                time.sleep(self.latency)
            out = []
            for text in texts:
                rng = np.random.default_rng(_stable_int(str(self.seed), model, text))
                vec = rng.standard_normal(self.embed_dim)
                vec /= np.linalg.norm(vec)
                out.append(vec.astype(np.float32).tolist())
            return out
        finally:
            self._exit()


class RemoteProvider:
    """OpenAI-compatible HTTP provider with bounded retries."""

    _RETRIABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}

    def __init__(self, config: ProviderConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()

    @property
    def tag(self) -> str:
        return f"remote:{self.config.base_url}"

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env_name, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, endpoint: str, payload: dict) -> dict:
        url = self.config.base_url.rstrip("/") + endpoint
        last_error: str = ""
        for attempt in range(self.config.max_attempts):
            if attempt > 0 and self.config.backoff_seconds > 0:
                time.sleep(self.config.backoff_seconds * 2 ** (attempt - 1))
            try:
                resp = self.session.post(
                    url, json=payload, headers=self._headers(), timeout=self.config.request_timeout
                )
            except requests.RequestException as exc:
                last_error = f"request failed: {exc}"
                continue
            if resp.status_code == 200:
                try:
                    return resp.json()
                except ValueError as exc:
                    raise ProviderError(f"{url}: malformed JSON response ({exc})") from exc
            last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
            if resp.status_code not in self._RETRIABLE_STATUS:
                raise ProviderError(f"{url}: {last_error}")
        raise ProviderError(f"{url}: retries exhausted ({self.config.max_attempts} attempts): {last_error}")

    def chat(self, request: ChatRequest) -> str:
        data = self._post(
            "/chat/completions",
            {
                "model": request.model,
                "messages": [
                    {"role": "system", "content": request.system_prompt},
                    {"role": "user", "content": request.user_prompt},
                ],
                "max_tokens": request.max_new_tokens,
                "temperature": request.temperature,
            },
        )
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed chat payload: {data!r:.200}") from exc

    def embed_batch(self, texts: Sequence[str], model: str) -> list[list[float]]:
        data = self._post("/embeddings", {"model": model, "input": list(texts)})
        try:
            rows = sorted(data["data"], key=lambda d: d["index"])
            vectors = [row["embedding"] for row in rows]
        except (KeyError, TypeError) as exc:
            raise ProviderError(f"malformed embeddings payload: {data!r:.200}") from exc
        if len(vectors) != len(texts):
            raise ProviderError(f"embeddings payload has {len(vectors)} rows for {len(texts)} inputs")
        return vectors


# ---------------------------------------------------------------------------
# Gateway
# ---------------------------------------------------------------------------


@dataclass
class JudgeOutcome:
    wins_for_a: int
    parse_failures: int = 0


class LlmGateway:
    """Shared dispatcher enforcing the parallelism bound and the cache contract."""

    def __init__(self, provider, config: ProviderConfig | None = None):
        self.provider = provider
        self.config = config or ProviderConfig()
        self.cache = ResponseCache(self.config.cache_dir)
        self._slots = threading.BoundedSemaphore(self.config.max_parallel_requests)
        self.judge_parse_failures = 0
        self._stats_lock = threading.Lock()

    # -- chat -------------------------------------------------------------

    def _chat_key(self, request: ChatRequest) -> str:
        return _digest(
            {
                "kind": "chat",
                "provider": self.provider.tag,
                "prompt_version": self.config.prompt_version,
                "model": request.model,
                "system": request.system_prompt,
                "user": request.user_prompt,
                "max_new_tokens": request.max_new_tokens,
                "temperature": request.temperature,
            }
        )

    def chat(self, request: ChatRequest) -> str:
        if not request.model:
            request = ChatRequest(
                system_prompt=request.system_prompt,
                user_prompt=request.user_prompt,
                max_new_tokens=request.max_new_tokens,
                temperature=request.temperature,
                model=self.config.chat_model,
            )
        key = self._chat_key(request)
        cached = self.cache.get(key)
        if cached is not None:
            return cached["text"]
        with self._slots:
            text = self.provider.chat(request)
        self.cache.put(key, {"text": text})
        return text

    def chat_many(
        self, requests_: Sequence[ChatRequest], collect_errors: bool = False
    ) -> list[str | Exception]:
        """Run many chats with bounded parallelism, preserving input order."""
        results: list[str | Exception | None] = [None] * len(requests_)

        def run(i: int, req: ChatRequest) -> None:
            try:
                results[i] = self.chat(req)
            except Exception as exc:  # noqa: BLE001 - collected per item
                if not collect_errors:
                    raise
                results[i] = exc

        if not requests_:
            return []
        with ThreadPoolExecutor(max_workers=self.config.max_parallel_requests) as pool:
            futures = [pool.submit(run, i, r) for i, r in enumerate(requests_)]
            for fut in futures:
                fut.result()
        return results  # type: ignore[return-value]

    # -- embeddings --------------------------------------------------------

    def _embed_key(self, text: str) -> str:
        return _digest(
            {
                "kind": "embed",
                "provider": self.provider.tag,
                "model": self.config.embed_model,
                "text": text,
            }
        )

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """One vector per text (cached per text, batched, order-preserving)."""
        if not texts:
            raise ValidationError("embed requires at least one text")
        vectors: list[list[float] | None] = [None] * len(texts)
        pending: dict[str, list[int]] = {}
        for i, text in enumerate(texts):
            cached = self.cache.get(self._embed_key(text))
            if cached is not None:
                vectors[i] = cached["vector"]
            else:
                pending.setdefault(text, []).append(i)

        unique = list(pending)
        batches = [
            unique[i : i + self.config.embed_batch_size]
            for i in range(0, len(unique), self.config.embed_batch_size)
        ]

        def run(batch: list[str]) -> list[list[float]]:
            with self._slots:
                return self.provider.embed_batch(batch, self.config.embed_model)

        if batches:
            with ThreadPoolExecutor(max_workers=self.config.max_parallel_requests) as pool:
                for batch, out in zip(batches, pool.map(run, batches)):
                    for text, vec in zip(batch, out):
                        self.cache.put(self._embed_key(text), {"vector": vec})
                        for i in pending[text]:
                            vectors[i] = vec

        matrix = np.asarray(vectors, dtype=np.float32)
        if matrix.ndim != 2:
            raise ProviderError("provider returned embeddings of differing dimensions")
        return matrix

    # -- pairwise judging --------------------------------------------------

    @staticmethod
    def parse_judge_verdict(text: str) -> str | None:
        """Return 'a', 'b', or None when the verdict is not parsable."""
        lowered = text.strip().lower()
        has_a = "output (a)" in lowered
        has_b = "output (b)" in lowered
        if has_a and not has_b:
            return "a"
        if has_b and not has_a:
            return "b"
        return None

    def judge_pairwise(self, instruction: str, response_a: str, response_b: str) -> int:
        """Two judged orders; returns how many verdicts favored response_a (0..2).

        A verdict that cannot be parsed counts as no win for either side and
        is tallied in ``judge_parse_failures``.
        """
        wins_for_a = 0
        for first, second, a_is_first in (
            (response_a, response_b, True),
            (response_b, response_a, False),
        ):
            system, user = JUDGE_TEMPLATE.render(
                instruction=instruction, response_1=first, response_2=second
            )
            text = self.chat(
                ChatRequest(
                    system_prompt=system,
                    user_prompt=user,
                    max_new_tokens=JUDGE_TEMPLATE.max_new_tokens,
                    temperature=JUDGE_TEMPLATE.temperature,
                    model=self.config.chat_model,
                )
            )
            verdict = self.parse_judge_verdict(text)
            if verdict is None:
                with self._stats_lock:
                    self.judge_parse_failures += 1
                log.warning("unparsable judge verdict: %r", text[:80])
            elif (verdict == "a") == a_is_first:
                wins_for_a += 1
        return wins_for_a


def mock_gateway(
    seed: int = 0,
    embed_dim: int = 64,
    responder: Callable[[ChatRequest], str] | None = None,
    config: ProviderConfig | None = None,
) -> LlmGateway:
    """Convenience constructor used by tests, scripts, and --provider mock."""
    provider = MockProvider(seed=seed, embed_dim=embed_dim, responder=responder)
    return LlmGateway(provider, config or ProviderConfig())
