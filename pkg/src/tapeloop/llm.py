"""Completion backends and prompt rendering.

Two interchangeable backends ship in-tree: an OpenAI-compatible HTTP client
for live use and a scripted mock that replays canned responses keyed by
(role, design, phase, task, iteration, temperature bucket).  The engine only
ever sees the :class:`Backend` protocol, so swapping one for the other
changes no workflow-visible behavior and, by construction, not the workflow
definition hash.
"""

from __future__ import annotations

import logging
import os
import string
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Any, Mapping, Protocol

from .domain import DomainError, canonical_hash

logger = logging.getLogger(__name__)

#: Environment variable holding the API key for HTTP backends.
BACKEND_KEY_ENV = "TAPELOOP_BACKEND_KEY"


class TemperatureBucket(str, Enum):
    LOW = "low"
    MID = "mid"
    HIGH = "high"


def temperature_bucket(temperature: float) -> TemperatureBucket:
    """Bucket a sampling temperature: [0,0.35) low, [0.35,0.65) mid, [0.65,2] high."""
    if not (0.0 <= temperature <= 2.0):
        raise ValueError(f"temperature must be within [0,2], got {temperature}")
    if temperature < 0.35:
        return TemperatureBucket.LOW
    if temperature < 0.65:
        return TemperatureBucket.MID
    return TemperatureBucket.HIGH


@dataclass(frozen=True)
class CompletionRequest:
    role_id: str
    design_id: str
    phase: str
    task_id: str
    iteration: int
    temperature: float
    prompt: str

    def script_key(self) -> tuple[str, str, str, str, int, str]:
        return (
            self.role_id,
            self.design_id,
            self.phase,
            self.task_id,
            self.iteration,
            temperature_bucket(self.temperature).value,
        )


@dataclass(frozen=True)
class UsageRecord:
    prompt_tokens: int
    completion_tokens: int

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass(frozen=True)
class CompletionResult:
    text: str
    usage: UsageRecord
    backend_id: str


class Backend(Protocol):
    backend_id: str

    def complete(self, request: CompletionRequest) -> CompletionResult: ...


class ScriptMiss(DomainError):
    """The scripted backend has no response for a request key."""

    def __init__(self, key: tuple[str, str, str, str, int, str]):
        self.key = key
        role, design, phase, task, iteration, bucket = key
        super().__init__(
            "no scripted response for "
            f"role={role} design={design} phase={phase} task={task} "
            f"iteration={iteration} bucket={bucket}"
        )


def _approx_tokens(text: str) -> int:
    return max(1, len(text) // 4)


class ScriptedMockBackend:
    """Deterministic replay backend.

    Responses are keyed by (role_id, design_id, phase, task_id, iteration,
    bucket).  A response may use bucket ``"*"`` to answer any temperature;
    an exact bucket entry always wins over the wildcard.  Requests with no
    matching entry raise :class:`ScriptMiss` rather than improvising.
    """

    backend_id = "scripted-mock"

    def __init__(self, responses: Mapping[tuple[str, str, str, str, int, str], str]):
        self._responses = dict(responses)

    @classmethod
    def from_entries(cls, entries: list[dict[str, Any]]) -> "ScriptedMockBackend":
        table: dict[tuple[str, str, str, str, int, str], str] = {}
        for e in entries:
            key = (e["role_id"], e["design_id"], e["phase"], e["task_id"],
                   int(e["iteration"]), e.get("bucket", "*"))
            table[key] = e["text"]
        return cls(table)

    def lookup(self, request: CompletionRequest) -> str:
        key = request.script_key()
        if key in self._responses:
            return self._responses[key]
        wild = key[:5] + ("*",)
        if wild in self._responses:
            return self._responses[wild]
        raise ScriptMiss(key)

    def has_response(self, key: tuple[str, str, str, str, int, str]) -> bool:
        return key in self._responses or key[:5] + ("*",) in self._responses

    def complete(self, request: CompletionRequest) -> CompletionResult:
        text = self.lookup(request)
        usage = UsageRecord(_approx_tokens(request.prompt), _approx_tokens(text))
        return CompletionResult(text=text, usage=usage, backend_id=self.backend_id)


class HttpOpenAiCompatibleBackend:
    """Chat-completions client for any OpenAI-compatible endpoint.

    The API key is read from ``TAPELOOP_BACKEND_KEY``; requests carry a
    single user message and the caller's temperature.
    """

    backend_id = "http-openai-compatible"

    def __init__(self, base_url: str, model: str, timeout: float = 120.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.timeout = timeout

    def complete(self, request: CompletionRequest) -> CompletionResult:
        import httpx

        headers = {}
        key = os.environ.get(BACKEND_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        response = httpx.post(
            f"{self.base_url}/chat/completions",
            json={
                "model": self.model,
                "messages": [{"role": "user", "content": request.prompt}],
                "temperature": request.temperature,
            },
            headers=headers,
            timeout=self.timeout,
        )
        response.raise_for_status()
        data = response.json()
        text = data["choices"][0]["message"]["content"]
        usage = data.get("usage", {})
        return CompletionResult(
            text=text,
            usage=UsageRecord(
                prompt_tokens=int(usage.get("prompt_tokens", _approx_tokens(request.prompt))),
                completion_tokens=int(usage.get("completion_tokens", _approx_tokens(text))),
            ),
            backend_id=self.backend_id,
        )


class UnknownBackend(DomainError):
    def __init__(self, backend_id: str, known: list[str]):
        super().__init__(f"unknown backend {backend_id!r}; registered: {sorted(known)}")


class BackendRegistry:
    """Hot-swap point: run configs name a backend, the registry builds it."""

    def __init__(self) -> None:
        self._factories: dict[str, Any] = {}

    def register(self, backend_id: str, factory: Any) -> None:
        self._factories[backend_id] = factory

    def known(self) -> list[str]:
        return sorted(self._factories)

    def create(self, backend_id: str, **kwargs: Any) -> Backend:
        if backend_id not in self._factories:
            raise UnknownBackend(backend_id, list(self._factories))
        return self._factories[backend_id](**kwargs)


def default_registry() -> BackendRegistry:
    registry = BackendRegistry()
    registry.register("scripted-mock", lambda responses=None, entries=None: (
        ScriptedMockBackend.from_entries(entries) if entries is not None
        else ScriptedMockBackend(responses or {})
    ))
    registry.register(
        "http-openai-compatible",
        lambda base_url, model, timeout=120.0: HttpOpenAiCompatibleBackend(base_url, model, timeout),
    )
    return registry


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------

class MissingPlaceholder(DomainError):
    def __init__(self, template_name: str, placeholder: str):
        self.template_name, self.placeholder = template_name, placeholder
        super().__init__(f"template {template_name!r} needs a value for {{{placeholder}}}")


def template_text(name: str) -> str:
    ref = resources.files("tapeloop").joinpath("templates").joinpath(f"{name}.txt")
    return ref.read_text(encoding="utf-8")


def template_names() -> list[str]:
    folder = resources.files("tapeloop").joinpath("templates")
    return sorted(p.name[:-4] for p in folder.iterdir() if p.name.endswith(".txt"))


def render_prompt(name: str, values: Mapping[str, Any]) -> str:
    """Fill a packaged template; unknown placeholders raise, extras are ignored."""
    text = template_text(name)
    out: list[str] = []
    for literal, placeholder, _spec, _conv in string.Formatter().parse(text):
        out.append(literal)
        if placeholder is None:
            continue
        if placeholder not in values:
            raise MissingPlaceholder(name, placeholder)
        out.append(str(values[placeholder]))
    return "".join(out)


# ---------------------------------------------------------------------------
# Workflow definition hash
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WorkflowDefinition:
    """What a run *is*, independent of who answers the prompts.

    Deliberately carries no backend identifier: swapping the completion
    backend must leave :meth:`definition_hash` unchanged.
    """

    roles: tuple[str, ...]
    phases: tuple[str, ...]
    iteration_threshold: int
    template_digests: tuple[tuple[str, str], ...]

    def definition_hash(self) -> str:
        return canonical_hash(
            {
                "roles": list(self.roles),
                "phases": list(self.phases),
                "iteration_threshold": self.iteration_threshold,
                "templates": {name: digest for name, digest in self.template_digests},
            }
        )


def build_workflow_definition(
    roles: tuple[str, ...],
    phases: tuple[str, ...],
    iteration_threshold: int,
) -> WorkflowDefinition:
    digests = tuple(
        (name, canonical_hash(template_text(name))) for name in template_names()
    )
    return WorkflowDefinition(
        roles=roles,
        phases=phases,
        iteration_threshold=iteration_threshold,
        template_digests=digests,
    )
