"""Question-answering pipeline: route, retrieve, render, generate."""

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from importlib import resources

from .embed import embed_texts
from .errors import (
    ConfigError,
    EmptyRetrievalError,
    PipelineStageError,
    TemplateError,
    UqragError,
)
from .index import top_k
from .llm import ChatRequest, chat

logger = logging.getLogger(__name__)

QUESTION_PLACEHOLDER = "{question}"
CONTEXTS_PLACEHOLDER = "{contexts}"

NO_CONTEXT_DISCLAIMER = "(متنی بازیابی نشد؛ پاسخ بدون سند پشتیبان است.)"


@dataclass(frozen=True)
class DepartmentTaxonomy:
    labels: tuple
    fallback: str = "general"

    def __post_init__(self):
        if not self.labels:
            raise ConfigError("taxonomy needs at least one department label")
        if len(set(self.labels)) != len(self.labels):
            raise ConfigError("taxonomy labels must be unique")
        if self.fallback not in self.labels:
            raise ConfigError(f"fallback label '{self.fallback}' missing from taxonomy")

    @classmethod
    def from_labels(cls, labels, fallback="general"):
        labels = list(labels)
        if fallback not in labels:
            labels.append(fallback)
        return cls(tuple(labels), fallback)


@dataclass(frozen=True)
class PromptTemplate:
    system_text: str
    user_template: str
    context_separator: str = "\n---\n"
    language: str = "fa"

    def __post_init__(self):
        for placeholder in (QUESTION_PLACEHOLDER, CONTEXTS_PLACEHOLDER):
            n = self.user_template.count(placeholder)
            if n != 1:
                raise TemplateError(
                    f"user_template must contain {placeholder} exactly once (found {n})"
                )


def load_template(path):
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return _template_from_dict(raw)


def _template_from_dict(raw):
    try:
        return PromptTemplate(
            system_text=raw["system_text"],
            user_template=raw["user_template"],
            context_separator=raw.get("context_separator", "\n---\n"),
            language=raw.get("language", "fa"),
        )
    except KeyError as exc:
        raise TemplateError(f"template file missing field {exc}")


def default_template():
    raw = tomllib.loads(
        resources.files("uqrag.templates").joinpath("default_fa.toml").read_text("utf-8")
    )
    return _template_from_dict(raw)


@dataclass
class AnswerRecord:
    question: str
    department: str
    retrieval: object
    prompt: str
    answer: str
    timings: dict = field(default_factory=dict)
    backends: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "question": self.question,
            "department": self.department,
            "retrieval": {
                "query_text": self.retrieval.query_text,
                "k_requested": self.retrieval.k_requested,
                "items": [
                    {"chunk_id": i.chunk_id, "score": i.score, "text": i.text}
                    for i in self.retrieval.items
                ],
            },
            "prompt": self.prompt,
            "answer": self.answer,
            "timings": self.timings,
            "backends": self.backends,
        }


_ROUTE_SYSTEM = "پرسش دانشجو را به یکی از دانشکده‌های فهرست نگاشت کن و فقط نام همان دانشکده را بنویس."
_ROUTE_USER = "دانشکده‌ها:\n{labels}\n\nپرسش: {question}\n\nفقط نام یک دانشکده از فهرست را بنویس."


def match_label(response, taxonomy):
    """Resolve a routing response to a taxonomy label, else the fallback.

    Exact (case-insensitive) match wins; otherwise the longest label found as
    a substring of the response wins, ties broken by taxonomy order.
    """
    cleaned = response.strip().lower()
    for label in taxonomy.labels:
        if label.lower() == cleaned:
            return label
    best = None
    for pos, label in enumerate(taxonomy.labels):
        if label.lower() in cleaned:
            key = (len(label), -pos)
            if best is None or key > best[0]:
                best = (key, label)
    if best:
        return best[1]
    return taxonomy.fallback


def route_department(question, taxonomy, backend):
    """Classify a question to a department via the LLM, fallback on no match."""
    request = ChatRequest(
        messages=[
            {"role": "system", "content": _ROUTE_SYSTEM},
            {
                "role": "user",
                "content": _ROUTE_USER.format(labels="\n".join(taxonomy.labels), question=question),
            },
        ],
        temperature=0.0,
        max_tokens=32,
        tag="route",
    )
    response = chat(backend, request)
    return match_label(response, taxonomy)


def render_prompt(template, question, retrieval):
    """Substitute question and score-ordered contexts into the user template."""
    text = template.user_template
    q_pos = text.find(QUESTION_PLACEHOLDER)
    c_pos = text.find(CONTEXTS_PLACEHOLDER)
    if q_pos < 0 or c_pos < 0:
        raise TemplateError("user_template lost a required placeholder")
    contexts = template.context_separator.join(item.text for item in retrieval.items)
    if not retrieval.items:
        contexts = NO_CONTEXT_DISCLAIMER
    q_len, c_len = len(QUESTION_PLACEHOLDER), len(CONTEXTS_PLACEHOLDER)
    if q_pos < c_pos:
        rendered = (
            text[:q_pos] + question + text[q_pos + q_len : c_pos] + contexts + text[c_pos + c_len :]
        )
    else:
        rendered = (
            text[:c_pos] + contexts + text[c_pos + c_len : q_pos] + question + text[q_pos + q_len :]
        )
    logger.debug("rendered prompt: %d chars, %d contexts", len(rendered), len(retrieval.items))
    return rendered


@contextmanager
def _timed(timings, stage):
    started = time.perf_counter()
    try:
        yield
    finally:
        timings[stage] = time.perf_counter() - started


class Pipeline:
    """Shareable orchestrator over an index plus LLM and embedding backends."""

    def __init__(
        self,
        index,
        llm_backend,
        embed_backend,
        taxonomy,
        template=None,
        k=3,
        cache=None,
        allow_empty_context=False,
        generate_temperature=0.2,
        generate_max_tokens=1024,
    ):
        if k < 1:
            raise ConfigError("k must be >= 1")
        self.index = index
        self.llm_backend = llm_backend
        self.embed_backend = embed_backend
        self.taxonomy = taxonomy
        self.template = template or default_template()
        self.k = k
        self.cache = cache
        self.allow_empty_context = allow_empty_context
        self.generate_temperature = generate_temperature
        self.generate_max_tokens = generate_max_tokens

        unknown = [d for d in index.departments if d not in taxonomy.labels]
        if unknown:
            raise ConfigError(
                f"index departments missing from taxonomy: {', '.join(sorted(unknown))}"
            )
        if index.count and embed_backend.model_id != index.model_id:
            raise ConfigError(
                f"embedding backend model '{embed_backend.model_id}' does not match "
                f"index model '{index.model_id}'"
            )

    def answer(self, question, department_hint=None):
        """Run route -> embed -> retrieve -> render -> generate for one question."""
        if not question or not question.strip():
            raise ValueError("question must be nonempty")
        timings = {}

        with _timed(timings, "route"):
            try:
                if department_hint is not None and department_hint in self.taxonomy.labels:
                    department = department_hint
                else:
                    department = route_department(question, self.taxonomy, self.llm_backend)
            except UqragError as exc:
                raise PipelineStageError("route", exc) from exc

        with _timed(timings, "embed"):
            try:
                query_vec = embed_texts(self.embed_backend, [question], self.cache)[0]
            except UqragError as exc:
                raise PipelineStageError("embed", exc) from exc

        with _timed(timings, "retrieve"):
            try:
                retrieval = top_k(
                    self.index, query_vec, self.k, department=department, query_text=question
                )
                if not retrieval.items:
                    # routed department has no chunks: fall back to the whole index
                    retrieval = top_k(self.index, query_vec, self.k, query_text=question)
                if not retrieval.items and not self.allow_empty_context:
                    raise EmptyRetrievalError("no chunks retrieved, even without department filter")
            except UqragError as exc:
                raise PipelineStageError("retrieve", exc) from exc

        with _timed(timings, "render"):
            try:
                prompt = render_prompt(self.template, question, retrieval)
            except UqragError as exc:
                raise PipelineStageError("render", exc) from exc

        with _timed(timings, "generate"):
            try:
                request = ChatRequest(
                    messages=[
                        {"role": "system", "content": self.template.system_text},
                        {"role": "user", "content": prompt},
                    ],
                    temperature=self.generate_temperature,
                    max_tokens=self.generate_max_tokens,
                    tag="generate",
                )
                answer_text = chat(self.llm_backend, request)
            except UqragError as exc:
                raise PipelineStageError("generate", exc) from exc

        return AnswerRecord(
            question=question,
            department=department,
            retrieval=retrieval,
            prompt=prompt,
            answer=answer_text,
            timings=timings,
            backends={
                "llm": self.llm_backend.model_id,
                "embedding": self.embed_backend.model_id,
            },
        )
