"""Chat-completion backends: an HTTP wire client and a deterministic scripted mock.

Every generation and judge call in the system goes through :func:`chat`, so a
scripted backend makes whole pipeline and evaluation runs reproducible offline.
"""

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import (
    EmptyCompletionError,
    JsonlParseError,
    LlmTransportError,
    NoMatchingScriptError,
)
from .retry import RetryPolicy, request_with_retries

logger = logging.getLogger(__name__)

API_KEY_ENV = "UQRAG_API_KEY"

TAGS = (
    "generate",
    "route",
    "extract_statements",
    "verify_support",
    "gen_questions",
    "judge_context",
)
# Everything except free generation is a judge/router call and must be
# deterministic, hence temperature 0.
JUDGE_TAGS = frozenset(TAGS) - {"generate"}

ROLES = ("system", "user", "assistant")


@dataclass
class ChatRequest:
    messages: list
    temperature: float = 0.0
    max_tokens: int = 512
    tag: str = "generate"

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown request tag '{self.tag}'")
        if not any(m.get("role") == "user" for m in self.messages):
            raise ValueError("a chat request needs at least one user message")
        for m in self.messages:
            if m.get("role") not in ROLES:
                raise ValueError(f"unknown message role '{m.get('role')}'")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.tag in JUDGE_TAGS and self.temperature != 0:
            raise ValueError(f"tag '{self.tag}' requires temperature 0")

    def joined_content(self):
        return "\n".join(m["content"] for m in self.messages)


@dataclass(frozen=True)
class ScriptEntry:
    tag: str
    pattern: str  # "*" or a substring of the joined message contents
    response: str
    latency_ms: int = 0


def load_script(path):
    """Read a JSONL script file of {tag, pattern, response} entries."""
    entries = []
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise JsonlParseError(path, line_no, f"invalid JSON: {exc.msg}")
            try:
                entries.append(
                    ScriptEntry(
                        tag=raw["tag"],
                        pattern=raw["pattern"],
                        response=raw["response"],
                        latency_ms=int(raw.get("latency_ms", 0)),
                    )
                )
            except KeyError as exc:
                raise JsonlParseError(path, line_no, f"missing script field {exc}")
    return entries


class ScriptedLlmBackend:
    """Returns the first canned response whose (tag, pattern) matches.

    The script must cover every tag a test exercises; an unmatched request is
    a loud error rather than a silent default.
    """

    kind = "scripted"

    def __init__(self, entries, model_id="scripted"):
        self.entries = list(entries)
        self.model_id = model_id
        self.calls = []
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path, model_id="scripted"):
        return cls(load_script(path), model_id=model_id)

    def complete(self, request):
        text = request.joined_content()
        with self._lock:
            self.calls.append((request.tag, text))
        for entry in self.entries:
            if entry.tag != request.tag:
                continue
            if entry.pattern == "*" or entry.pattern in text:
                if entry.latency_ms:
                    time.sleep(entry.latency_ms / 1000.0)
                return entry.response
        raise NoMatchingScriptError(
            f"no script entry for tag '{request.tag}' matching: {text[:120]!r}"
        )


class HttpLlmBackend:
    """Client for the de-facto standard chat-completions JSON protocol."""

    kind = "http"

    def __init__(
        self,
        endpoint,
        model_id,
        timeout=30.0,
        retry=RetryPolicy(),
        max_concurrency=4,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model_id = model_id
        self.timeout = timeout
        self.retry = retry
        self._semaphore = threading.Semaphore(max_concurrency)
        self._client = httpx.Client(timeout=timeout)

    def _headers(self):
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(API_KEY_ENV)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, request):
        payload = {
            "model": self.model_id,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        with self._semaphore:
            response = request_with_retries(
                lambda: self._client.post(
                    f"{self.endpoint}/chat/completions",
                    json=payload,
                    headers=self._headers(),
                ),
                self.retry,
                LlmTransportError,
            )
        body = response.json()
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise LlmTransportError(f"malformed completion response: {str(body)[:200]}")
        usage = body.get("usage")
        if usage:
            logger.debug("tag=%s usage=%s", request.tag, usage)
        return content or ""


def chat(backend, request):
    """Send one chat request and return the assistant text verbatim."""
    started = time.perf_counter()
    text = backend.complete(request)
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    logger.debug("tag=%s latency_ms=%.1f chars=%d", request.tag, elapsed_ms, len(text))
    if not text.strip():
        raise EmptyCompletionError(f"backend returned an empty completion (tag={request.tag})")
    return text


_NUMBERED_LINE = re.compile(r"^\s*\d+[.)]\s*(\S.*?)\s*$")


def parse_numbered_list(text):
    """Extract the items of a '1. ...' / '2) ...' numbered list, in order."""
    items = []
    for line in text.splitlines():
        match = _NUMBERED_LINE.match(line)
        if match:
            items.append(match.group(1))
    return items


_YES_TOKENS = {"yes", "بله", "آری"}
_NO_TOKENS = {"no", "خیر", "نه"}
_FIRST_WORD = re.compile(r"\w+", re.UNICODE)


def parse_yes_no(text):
    """Map a verdict response to True/False, or None when unparseable."""
    match = _FIRST_WORD.search(text)
    if not match:
        return None
    token = match.group(0).lower()
    if token in _YES_TOKENS:
        return True
    if token in _NO_TOKENS:
        return False
    return None
