"""Completion backends: OpenAI-compatible HTTP, scripted replay, stochastic solver.

All three implementations answer the same ``complete(request)`` call and
report whitespace-word token counts (one word ~ one token), which is all the
budget machinery needs — ordinal consistency, not a real tokenizer.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from dataclasses import dataclass

import httpx

DEFAULT_TRIGGER_TEXT = "Wait! Maybe I made some mistakes! I need to rethink from scratch."

FINISH_STOP = "stop"
FINISH_LENGTH = "length"


def count_tokens(text: str) -> int:
    """Whitespace-word token count used by the simulators and cost proxies."""
    return len(text.split())


class BackendError(RuntimeError):
    """Base class for completion-backend failures."""


class TransportError(BackendError):
    """Network-level failure that survived the retry policy."""


class ProtocolError(BackendError):
    """The endpoint answered, but not in the expected shape."""


class ScriptGapError(BackendError):
    """A scripted backend was asked for a prompt its script does not cover."""


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int
    stop_sequences: tuple[str, ...] = ()
    temperature: float = 0.0
    top_p: float | None = None
    seed: int | None = None
    n: int = 1

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    finish_reason: str  # FINISH_STOP or FINISH_LENGTH
    tokens_used: int
    latency: float = 0.0


class CompletionBackend:
    """Interface shared by all backends; implementations are thread-safe."""

    def complete(self, request: CompletionRequest) -> list[CompletionResult]:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Scripted backend
# ---------------------------------------------------------------------------

_MATCH_KINDS = ("substring", "exact", "prefix", "suffix", "any")


@dataclass(frozen=True)
class ScriptEntry:
    """One scripted completion, matched against the incoming prompt."""

    text: str
    finish_reason: str = FINISH_STOP
    match: str = ""
    match_kind: str = "any"

    def __post_init__(self) -> None:
        if self.finish_reason not in (FINISH_STOP, FINISH_LENGTH):
            raise ValueError(f"bad finish_reason {self.finish_reason!r}")
        if self.match_kind not in _MATCH_KINDS:
            raise ValueError(f"bad match_kind {self.match_kind!r}")

    def matches(self, prompt: str) -> bool:
        if self.match_kind == "any":
            return True
        if self.match_kind == "substring":
            return self.match in prompt
        if self.match_kind == "exact":
            return prompt == self.match
        if self.match_kind == "prefix":
            return prompt.startswith(self.match)
        return prompt.endswith(self.match)


class ScriptedBackend(CompletionBackend):
    """Replays predefined completions; unmatched prompts fail loud.

    Entries are consumed in order: each call takes the first unconsumed
    entry whose matcher accepts the prompt. Never improvises.
    """

    def __init__(self, entries: list[ScriptEntry] | tuple[ScriptEntry, ...]):
        self._entries = list(entries)
        self._consumed = [False] * len(self._entries)
        self._lock = threading.Lock()
        self.calls: list[CompletionRequest] = []
        self.total_tokens_generated = 0

    @classmethod
    def from_json(cls, path: str) -> "ScriptedBackend":
        with open(path) as fh:
            raw = json.load(fh)
        entries = [
            ScriptEntry(
                text=item["text"],
                finish_reason=item.get("finish_reason", FINISH_STOP),
                match=item.get("match", ""),
                match_kind=item.get("match_kind", "any" if "match" not in item else "substring"),
            )
            for item in raw
        ]
        return cls(entries)

    def complete(self, request: CompletionRequest) -> list[CompletionResult]:
        results = []
        with self._lock:
            self.calls.append(request)
            for _ in range(request.n):
                entry = self._next_entry(request.prompt)
                tokens = count_tokens(entry.text)
                self.total_tokens_generated += tokens
                results.append(
                    CompletionResult(
                        text=entry.text,
                        finish_reason=entry.finish_reason,
                        tokens_used=tokens,
                    )
                )
        return results

    def _next_entry(self, prompt: str) -> ScriptEntry:
        for i, entry in enumerate(self._entries):
            if not self._consumed[i] and entry.matches(prompt):
                self._consumed[i] = True
                return entry
        raise ScriptGapError(
            f"no scripted completion for prompt ending {prompt[-80:]!r}"
        )


def script_define(entries: list[tuple[str, str, str]] | list[ScriptEntry]) -> ScriptedBackend:
    """Build a scripted backend from (matcher-substring, text, finish_reason)
    tuples or ready ScriptEntry objects. An empty matcher accepts any prompt."""
    built: list[ScriptEntry] = []
    for item in entries:
        if isinstance(item, ScriptEntry):
            built.append(item)
        else:
            match, text, finish = item
            kind = "substring" if match else "any"
            built.append(ScriptEntry(text=text, finish_reason=finish, match=match, match_kind=kind))
    return ScriptedBackend(built)


def length_round_text(n_tokens: int, line_width: int = 12) -> str:
    """Filler text of exactly ``n_tokens`` words arranged in step-like lines,
    ending at a paragraph boundary. Handy for building never-finishing scripts."""
    if n_tokens <= 0:
        return "\n\n"
    words = []
    for i in range(n_tokens):
        words.append(f"s{i}")
        if (i + 1) % line_width == 0:
            words[-1] += "\n"
    return " " + " ".join(words).rstrip() + "\n\n"


# ---------------------------------------------------------------------------
# Stochastic solver simulator
# ---------------------------------------------------------------------------

# Wrong-answer classes; variants within a class are equivalent surface forms,
# which keeps the grouping path honest work. None of these is ever equal to a
# synthetic gold answer (golds live in [100, 999]).
DEFAULT_WRONG_ANSWERS: tuple[tuple[str, ...], ...] = (
    ("0",), ("1",), ("2",), ("3",), ("5",), ("7",), ("9",),
    ("-1",), ("-2",),
    ("1/2", "2/4"), ("2/3",), ("3/4",), ("5/6",), ("7/12",),
    ("sqrt(2)", "\\sqrt{2}"), ("sqrt(3)/3", "1/sqrt(3)"),
)


def expected_answer(question: str) -> str:
    """Gold answer the stochastic simulator will produce for ``question``
    when an attempt lands correct. Shared with the synthetic dataset builder."""
    digest = hashlib.sha256(question.encode("utf-8")).hexdigest()
    return str(100 + int(digest[:8], 16) % 900)


@dataclass(frozen=True)
class StochasticModelParams:
    """Knobs of the simulated solver.

    ``p_solve`` is the chance a fresh attempt is on track to a correct final
    answer; the two trigger probabilities govern how a self-reflection
    insertion rewrites that state. Answer lengths are drawn uniformly from
    ``[length_lo, length_hi]`` tokens, re-drawn after every trigger because
    the solver restarts its reasoning.
    """

    p_solve: float = 0.3
    p_correct_on_trigger: float = 0.5
    p_derail_on_trigger: float = 0.0
    length_lo: int = 300
    length_hi: int = 2500
    answer_vocabulary: tuple[tuple[str, ...], ...] = DEFAULT_WRONG_ANSWERS
    trigger_text: str = DEFAULT_TRIGGER_TEXT

    def __post_init__(self) -> None:
        for name in ("p_solve", "p_correct_on_trigger", "p_derail_on_trigger"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if not 1 <= self.length_lo <= self.length_hi:
            raise ValueError("need 1 <= length_lo <= length_hi")
        if not self.answer_vocabulary:
            raise ValueError("answer_vocabulary must be nonempty")


_FILLER_WORDS = (
    "consider", "the", "partial", "sums,", "then", "rewrite", "both",
    "sides,", "compare", "coefficients,", "and", "check\n",
)


class _Filler:
    """Pre-joined filler text sliced by word count (cheap long completions)."""

    def __init__(self) -> None:
        self._words: list[str] = []
        self._offsets: list[int] = [0]
        self._lock = threading.Lock()
        self._grow(4096)

    def _grow(self, upto: int) -> None:
        while len(self._words) < upto:
            w = _FILLER_WORDS[len(self._words) % len(_FILLER_WORDS)]
            self._words.append(w)
            self._offsets.append(self._offsets[-1] + len(w) + 1)
        self._text = " ".join(self._words)

    def take(self, n_words: int) -> str:
        if n_words <= 0:
            return ""
        if n_words > len(self._words):
            with self._lock:
                self._grow(n_words)
        return self._text[: self._offsets[n_words] - 1]


class StochasticBackend(CompletionBackend):
    """Seeded solver simulator.

    Every byte of output is a pure function of (backend seed, request seed,
    sample index, prompt content), so replays and any parallel schedule
    reproduce identical results. The current attempt's round index is
    recovered from the number of trigger sentences present in the prompt,
    and the question is the prompt's first line.
    """

    def __init__(self, params: StochasticModelParams | None = None, seed: int = 0):
        self.params = params or StochasticModelParams()
        self.seed = seed
        self._filler = _Filler()
        self._lock = threading.Lock()
        self.total_tokens_generated = 0
        self.total_calls = 0

    # -- deterministic randomness -------------------------------------------------

    def _unit(self, request: CompletionRequest, idx: int, tag: str) -> float:
        req_seed = request.seed
        if req_seed is None:
            req_seed = int(hashlib.sha256(request.prompt.encode("utf-8")).hexdigest()[:12], 16)
        question = request.prompt.split("\n", 1)[0]
        key = f"{self.seed}|{req_seed}|{idx}|{question}|{tag}"
        digest = hashlib.sha256(key.encode("utf-8")).hexdigest()
        return int(digest[:13], 16) / 16**13

    # -- state machine ------------------------------------------------------------

    def _correct_at_round(self, request: CompletionRequest, idx: int, k: int) -> bool:
        p = self.params
        correct = self._unit(request, idx, "solve") < p.p_solve
        for j in range(1, k + 1):
            u = self._unit(request, idx, f"flip|{j}")
            if correct:
                if u < p.p_derail_on_trigger:
                    correct = False
            else:
                if u < p.p_correct_on_trigger:
                    correct = True
        return correct

    def _final_answer(self, request: CompletionRequest, idx: int, k: int) -> str:
        question = request.prompt.split("\n", 1)[0]
        if self._correct_at_round(request, idx, k):
            return expected_answer(question)
        vocab = self.params.answer_vocabulary
        cls = vocab[int(self._unit(request, idx, f"ans|{k}") * len(vocab)) % len(vocab)]
        return cls[int(self._unit(request, idx, f"var|{k}") * len(cls)) % len(cls)]

    # -- completion ---------------------------------------------------------------

    def complete(self, request: CompletionRequest) -> list[CompletionResult]:
        results = []
        for idx in range(request.n):
            start = time.perf_counter()
            result = self._one(request, idx)
            results.append(
                CompletionResult(
                    text=result.text,
                    finish_reason=result.finish_reason,
                    tokens_used=result.tokens_used,
                    latency=time.perf_counter() - start,
                )
            )
        with self._lock:
            self.total_calls += 1
            self.total_tokens_generated += sum(r.tokens_used for r in results)
        return results

    def _one(self, request: CompletionRequest, idx: int) -> CompletionResult:
        p = self.params
        k = request.prompt.count(p.trigger_text)

        if request.stop_sequences:
            # Boundary-snap continuation: finish the current line shortly.
            want = 1 + int(self._unit(request, idx, f"snap|{k}") * 3)
            if want > request.max_tokens:
                text = " " + self._filler.take(request.max_tokens)
                return CompletionResult(text, FINISH_LENGTH, request.max_tokens)
            text = " " + self._filler.take(want) + "\n\n"
            return CompletionResult(text, FINISH_STOP, want)

        # Round texts open with a newline so the prompt's first line stays the
        # question itself; the question keys both the gold answer and the
        # deterministic random stream.
        span = p.length_hi - p.length_lo + 1
        length = p.length_lo + int(self._unit(request, idx, f"len|{k}") * span)
        if length > request.max_tokens:
            text = "\n" + self._filler.take(request.max_tokens)
            return CompletionResult(text, FINISH_LENGTH, request.max_tokens)

        answer = self._final_answer(request, idx, k)
        suffix = f"The final answer is \\boxed{{{answer}}}"  # 5 words
        filler = self._filler.take(max(0, length - 5))
        text = "\n" + (filler + "\n" + suffix if filler else suffix)
        tokens = count_tokens(text)
        if tokens > request.max_tokens:
            # Budgets under the suffix size: emit a bare boxed answer.
            text = "\n\\boxed{" + answer + "}"
            tokens = count_tokens(text)
        return CompletionResult(text, FINISH_STOP, tokens)


# ---------------------------------------------------------------------------
# OpenAI-compatible HTTP backend
# ---------------------------------------------------------------------------


@dataclass
class RetryPolicy:
    attempts: int = 3
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    jitter: float = 0.25

    def sleep_for(self, attempt: int, rng: random.Random) -> float:
        base = self.backoff_base * self.backoff_factor**attempt
        return base * (1.0 + self.jitter * rng.random())


class HttpCompletionBackend(CompletionBackend):
    """Client for legacy ``/v1/completions`` prompt-continuation endpoints.

    The chat shape is deliberately not used: budget-limited continuation
    needs raw assistant-side prefix extension. Prompts are forwarded
    byte-for-byte. Transient transport failures and 5xx/429 responses are
    retried with exponential backoff; malformed bodies raise
    :class:`ProtocolError` immediately.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = "IDSAMPLING_API_KEY",
        timeout: float = 120.0,
        max_connections: int = 16,
        retry: RetryPolicy | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.retry = retry or RetryPolicy()
        self._rng = random.Random(0xC0FFEE)
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        limits = httpx.Limits(max_connections=max_connections)
        self._client = httpx.Client(
            timeout=timeout, limits=limits, headers=headers, transport=transport
        )

    def close(self) -> None:
        self._client.close()

    def complete(self, request: CompletionRequest) -> list[CompletionResult]:
        body: dict = {
            "model": self.model,
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "n": request.n,
        }
        if request.stop_sequences:
            body["stop"] = list(request.stop_sequences)
        if request.seed is not None:
            body["seed"] = request.seed
        if request.top_p is not None:
            body["top_p"] = request.top_p

        payload, latency = self._post_with_retries(body)
        return self._parse_choices(payload, request, latency)

    def _post_with_retries(self, body: dict) -> tuple[dict, float]:
        url = f"{self.base_url}/v1/completions"
        last_error: Exception | None = None
        for attempt in range(self.retry.attempts):
            start = time.perf_counter()
            try:
                response = self._client.post(url, json=body)
            except httpx.HTTPError as exc:
                last_error = exc
            else:
                if response.status_code < 400:
                    try:
                        return response.json(), time.perf_counter() - start
                    except ValueError as exc:
                        raise ProtocolError(f"non-JSON completion response: {exc}") from exc
                if response.status_code in (429,) or response.status_code >= 500:
                    last_error = TransportError(f"HTTP {response.status_code}")
                else:
                    raise ProtocolError(
                        f"HTTP {response.status_code}: {response.text[:200]}"
                    )
            if attempt + 1 < self.retry.attempts:
                time.sleep(self.retry.sleep_for(attempt, self._rng))
        raise TransportError(f"completion request failed after {self.retry.attempts} attempts: {last_error}")

    def _parse_choices(
        self, payload: dict, request: CompletionRequest, latency: float
    ) -> list[CompletionResult]:
        choices = payload.get("choices")
        if not isinstance(choices, list) or len(choices) < request.n:
            raise ProtocolError(f"expected {request.n} choices, got {choices!r}")
        usage = payload.get("usage") or {}
        results = []
        for choice in choices[: request.n]:
            try:
                text = choice["text"]
                finish = choice["finish_reason"]
            except (TypeError, KeyError) as exc:
                raise ProtocolError(f"malformed choice {choice!r}") from exc
            if finish not in (FINISH_STOP, FINISH_LENGTH):
                raise ProtocolError(f"unknown finish_reason {finish!r}")
            if finish == FINISH_LENGTH:
                tokens = request.max_tokens
            elif request.n == 1 and isinstance(usage.get("completion_tokens"), int):
                tokens = usage["completion_tokens"]
            else:
                tokens = count_tokens(text)
            results.append(
                CompletionResult(
                    text=text, finish_reason=finish, tokens_used=tokens, latency=latency
                )
            )
        return results
