"""Provider-agnostic chat-completion gateway with a deterministic scripted mock.

Transport retries here are network-level only; regeneration of malformed
LLM output is budgeted by the pipeline, not the gateway.
"""

import json
import os
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import requests

DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_TOKENS = 4096
TRANSPORT_RETRIES = 2
TRANSPORT_BACKOFF_S = 0.5

WILDCARD = "*"


class GatewayError(Exception):
    """Base class for gateway failures."""


class TransportError(GatewayError):
    """Network-level failure; safe to retry."""


class ProviderError(GatewayError):
    """Non-2xx reply from the provider."""

    def __init__(self, status: int, body_excerpt: str):
        super().__init__(f"provider returned {status}: {body_excerpt}")
        self.status = status
        self.body_excerpt = body_excerpt


class TranscriptExhausted(GatewayError):
    """Scripted transcript has no entries left."""


class TranscriptMismatch(GatewayError):
    """Request text does not contain the next entry's match hint."""

    def __init__(self, expected_hint: str, received_excerpt: str):
        super().__init__(
            f"transcript expected hint {expected_hint!r}, "
            f"request text was {received_excerpt!r}"
        )
        self.expected_hint = expected_hint
        self.received_excerpt = received_excerpt


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str

    def __post_init__(self):
        if not isinstance(self.role, Role):
            object.__setattr__(self, "role", Role(self.role))
        if not self.content:
            raise ValueError("message content must be non-empty")


@dataclass(frozen=True)
class ChatRequest:
    messages: Tuple[ChatMessage, ...]
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    model: str = "default"

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValueError("request must contain at least one message")
        system_positions = [
            i for i, m in enumerate(self.messages) if m.role is Role.SYSTEM
        ]
        if len(system_positions) > 1:
            raise ValueError("at most one system message allowed")
        if system_positions and system_positions[0] != 0:
            raise ValueError("system message must come first")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def flattened_text(self) -> str:
        return "\n".join(m.content for m in self.messages)


class FinishReason(str, Enum):
    STOP = "stop"
    LENGTH = "length"
    ERROR = "error"


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: FinishReason = FinishReason.STOP
    provider_meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.finish_reason is FinishReason.STOP and self.content is None:
            raise ValueError("content required when finish_reason=stop")


@dataclass(frozen=True)
class ProviderConfig:
    endpoint_url: str = ""
    api_key_env_var: str = "PROMPTFORGE_API_KEY"
    model: str = "default"
    provider: str = "openai"
    default_temperature: float = DEFAULT_TEMPERATURE
    default_max_tokens: int = DEFAULT_MAX_TOKENS
    transport_timeout_s: int = 60

    def __post_init__(self):
        if self.default_temperature < 0:
            raise ValueError("default_temperature must be >= 0")
        if self.default_max_tokens <= 0:
            raise ValueError("default_max_tokens must be positive")


@dataclass
class ScriptedTranscript:
    """Ordered (match_hint, response) pairs consumed strictly in order.

    Single-consumer: the cursor is not safe to share across threads.
    """

    entries: List[Tuple[str, str]]
    cursor: int = 0

    def __post_init__(self):
        self.entries = [(h, r) for h, r in self.entries]
        if not 0 <= self.cursor <= len(self.entries):
            raise ValueError("cursor out of range")

    @property
    def exhausted(self) -> bool:
        return self.cursor >= len(self.entries)

    @classmethod
    def from_file(cls, path: str, cursor: int = 0) -> "ScriptedTranscript":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        entries = []
        for item in raw:
            if isinstance(item, dict):
                entries.append((item.get("hint", WILDCARD), item["response"]))
            else:
                hint, response = item
                entries.append((hint, response))
        return cls(entries=entries, cursor=cursor)


def replay(transcript: ScriptedTranscript, request: ChatRequest) -> ChatResponse:
    """Return the next scripted response, advancing the cursor by one."""
    if transcript.exhausted:
        raise TranscriptExhausted(
            f"transcript exhausted after {len(transcript.entries)} entries"
        )
    hint, response = transcript.entries[transcript.cursor]
    text = request.flattened_text()
    if hint != WILDCARD and hint not in text:
        raise TranscriptMismatch(hint, text[:200])
    transcript.cursor += 1
    return ChatResponse(
        content=response,
        finish_reason=FinishReason.STOP,
        provider_meta={"mock": True, "temperature": request.temperature},
    )


class MockProvider:
    """Deterministic test double backed by a ScriptedTranscript."""

    def __init__(self, transcript: ScriptedTranscript):
        self.transcript = transcript

    def complete(self, request: ChatRequest) -> ChatResponse:
        return replay(self.transcript, request)


def _openai_body(config: ProviderConfig, request: ChatRequest) -> Dict[str, Any]:
    return {
        "model": request.model if request.model != "default" else config.model,
        "messages": [
            {"role": m.role.value, "content": m.content} for m in request.messages
        ],
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    }


# Provider differences are request-body shaping only; all tested dialects
# speak the same chat-completion shape.
_ADAPTERS: Dict[str, Callable[[ProviderConfig, ChatRequest], Dict[str, Any]]] = {
    "openai": _openai_body,
    "qwen": _openai_body,
    "generic": _openai_body,
}


class HttpProvider:
    def __init__(self, config: ProviderConfig):
        if config.provider not in _ADAPTERS:
            raise ValueError(f"unknown provider {config.provider!r}")
        self.config = config

    def complete(self, request: ChatRequest) -> ChatResponse:
        return complete(self.config, request)


def complete(config: ProviderConfig, request: ChatRequest) -> ChatResponse:
    """One chat completion over HTTP, with bounded transport retries."""
    body = _ADAPTERS[config.provider](config, request)
    api_key = os.environ.get(config.api_key_env_var, "")
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    last_err: Optional[Exception] = None
    for attempt in range(TRANSPORT_RETRIES + 1):
        try:
            resp = requests.post(
                config.endpoint_url,
                json=body,
                headers=headers,
                timeout=config.transport_timeout_s,
            )
        except requests.RequestException as exc:
            last_err = exc
            if attempt < TRANSPORT_RETRIES:
                time.sleep(TRANSPORT_BACKOFF_S)
            continue
        if resp.status_code // 100 != 2:
            raise ProviderError(resp.status_code, resp.text[:500])
        payload = resp.json()
        choice = payload["choices"][0]
        return ChatResponse(
            content=choice["message"]["content"],
            finish_reason=FinishReason(choice.get("finish_reason", "stop")),
            provider_meta={
                "temperature": request.temperature,
                "model": payload.get("model", config.model),
            },
        )
    raise TransportError(f"transport failed after {TRANSPORT_RETRIES + 1} tries: {last_err}")


# --- structured-output extraction -------------------------------------------

@dataclass(frozen=True)
class ParseFailure:
    rule: str
    span: str

    def __str__(self):
        return f"ParseFailure({self.rule}): {self.span[:120]!r}"


class SchemaViolation(Exception):
    def __init__(self, rule: str):
        super().__init__(rule)
        self.rule = rule


# Registered by the modules that own each payload type.
_SCHEMA_VALIDATORS: Dict[str, Callable[[Any], Any]] = {}
_TEXT_FALLBACKS: Dict[str, Callable[[str], Any]] = {}


def register_schema(
    name: str,
    validator: Callable[[Any], Any],
    text_fallback: Optional[Callable[[str], Any]] = None,
) -> None:
    _SCHEMA_VALIDATORS[name] = validator
    if text_fallback is not None:
        _TEXT_FALLBACKS[name] = text_fallback


_FENCE_RE = re.compile(r"```(?:[a-zA-Z0-9_-]*)\n(.*?)```", re.DOTALL)


def _candidate_blocks(text: str) -> List[str]:
    blocks = [m.group(1) for m in _FENCE_RE.finditer(text)]
    blocks.append(text)
    return blocks


def extract_structured(
    response: ChatResponse, schema: str
) -> Union[Any, ParseFailure]:
    """Scan fenced blocks in order and return the first schema-valid payload.

    Total: never raises on arbitrary text.
    """
    if schema not in _SCHEMA_VALIDATORS:
        raise KeyError(f"unknown schema {schema!r}")
    if response.finish_reason is not FinishReason.STOP:
        return ParseFailure("response-not-complete", response.finish_reason.value)
    validator = _SCHEMA_VALIDATORS[schema]
    first_failure: Optional[ParseFailure] = None
    saw_json = False
    for block in _candidate_blocks(response.content):
        try:
            obj = json.loads(block)
        except (json.JSONDecodeError, TypeError):
            continue
        saw_json = True
        try:
            return validator(obj)
        except SchemaViolation as exc:
            if first_failure is None:
                first_failure = ParseFailure(exc.rule, block.strip()[:200])
    fallback = _TEXT_FALLBACKS.get(schema)
    if fallback is not None:
        try:
            return fallback(response.content)
        except SchemaViolation as exc:
            if first_failure is None:
                first_failure = ParseFailure(exc.rule, response.content[:200])
    if first_failure is not None:
        return first_failure
    if saw_json:
        return ParseFailure("schema-mismatch", response.content[:200])
    return ParseFailure("no parseable block", response.content[:200])
