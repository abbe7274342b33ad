"""Reference-free evaluation of (question, answer, contexts) triples.

Three metrics per sample, each judged by LLM sub-calls plus embeddings:

- faithfulness: fraction of the answer's atomic statements supported by the
  retrieved contexts;
- answer relevancy: mean cosine similarity between the original question and
  questions regenerated from the answer alone;
- context relevancy: fraction of retrieved chunks judged useful for the
  question.

Dataset aggregates are plain arithmetic means over successful records.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .embed import cosine, embed_texts
from .errors import (
    EmptyAnswerError,
    MalformedJudgeOutputError,
    UqragError,
    ZeroStatementsError,
)
from .llm import ChatRequest, chat, parse_numbered_list, parse_yes_no

logger = logging.getLogger(__name__)

DEFAULT_REGENERATED_QUESTIONS = 3


@dataclass(frozen=True)
class StatementSet:
    answer_id: str
    statements: tuple

    def __post_init__(self):
        if any(not s for s in self.statements):
            raise ValueError("statements must be nonempty strings")


@dataclass(frozen=True)
class SupportVerdicts:
    supported: tuple

    def __len__(self):
        return len(self.supported)


@dataclass
class EvalSample:
    id: str
    question: str
    answer: str
    contexts: list


@dataclass
class EvalRecord:
    qa_id: str
    faithfulness: float = None
    answer_relevancy: float = None
    context_relevancy: float = None
    diagnostics: dict = field(default_factory=dict)
    failed: bool = False
    stage: str = None
    error: str = None

    def to_dict(self):
        return {
            "qa_id": self.qa_id,
            "faithfulness": self.faithfulness,
            "answer_relevancy": self.answer_relevancy,
            "context_relevancy": self.context_relevancy,
            "diagnostics": self.diagnostics,
            "failed": self.failed,
            "stage": self.stage,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, raw):
        return cls(
            qa_id=raw["qa_id"],
            faithfulness=raw.get("faithfulness"),
            answer_relevancy=raw.get("answer_relevancy"),
            context_relevancy=raw.get("context_relevancy"),
            diagnostics=raw.get("diagnostics", {}),
            failed=bool(raw.get("failed", False)),
            stage=raw.get("stage"),
            error=raw.get("error"),
        )


@dataclass
class EvalConfig:
    llm_backend: object
    embed_backend: object
    cache: object = None
    regenerated_questions: int = DEFAULT_REGENERATED_QUESTIONS
    parallelism: int = 4


_EXTRACT_PROMPT = (
    "پاسخ زیر را به گزاره‌های مستقل و اتمی تجزیه کن و هر گزاره را در یک سطر از "
    "فهرست شماره‌دار (1. ، 2. ، ...) بنویس.\n\nپاسخ:\n{answer}"
)
_VERIFY_PROMPT = (
    "متن‌های بازیابی‌شده:\n{contexts}\n\nگزاره: {statement}\n\n"
    "آیا این گزاره با متن‌های بالا پشتیبانی می‌شود؟ فقط yes یا no بنویس."
)
_GEN_QUESTIONS_PROMPT = (
    "بر اساس پاسخ زیر دقیقا {m} پرسش بنویس که پاسخشان مستقیما از همین متن به دست بیاید. "
    "فقط فهرست شماره‌دار بنویس.\n\nپاسخ:\n{answer}"
)
_JUDGE_CONTEXT_PROMPT = (
    "پرسش: {question}\n\nمتن بازیابی‌شده:\n{context}\n\n"
    "آیا این متن برای پاسخ دادن به پرسش مفید است؟ فقط yes یا no بنویس."
)
_REPROMPT = "\n\nخروجی قبلی قابل استفاده نبود. دقیقا طبق دستور خروجی بده."


def _judge(backend, tag, content, max_tokens=1024):
    request = ChatRequest(
        messages=[{"role": "user", "content": content}],
        temperature=0.0,
        max_tokens=max_tokens,
        tag=tag,
    )
    return chat(backend, request)


def _judge_with_retry(backend, tag, content, parse, max_tokens=1024):
    """Parse a judge response, reprompting once before giving up."""
    parsed = parse(_judge(backend, tag, content, max_tokens))
    if parsed is not None:
        return parsed
    parsed = parse(_judge(backend, tag, content + _REPROMPT, max_tokens))
    if parsed is not None:
        return parsed
    raise MalformedJudgeOutputError(f"unparseable judge output for tag '{tag}'")


def extract_statements(answer, backend, answer_id="answer"):
    """Decompose an answer into atomic statements via the judge."""
    if not answer or not answer.strip():
        raise EmptyAnswerError("cannot extract statements from an empty answer")

    def parse(text):
        items = parse_numbered_list(text)
        return tuple(items) if items else None

    statements = _judge_with_retry(
        backend, "extract_statements", _EXTRACT_PROMPT.format(answer=answer), parse
    )
    return StatementSet(answer_id=answer_id, statements=statements)


def verify_support(statement, contexts, backend):
    """Binary judge verdict: is the statement supported by the contexts?"""
    content = _VERIFY_PROMPT.format(contexts="\n".join(contexts), statement=statement)
    return _judge_with_retry(backend, "verify_support", content, parse_yes_no, max_tokens=8)


def faithfulness(answer, contexts, backend, answer_id="answer"):
    """Supported-statement fraction: statements backed by contexts / total."""
    if not contexts:
        raise ValueError("faithfulness needs at least one context")
    statement_set = extract_statements(answer, backend, answer_id=answer_id)
    if not statement_set.statements:
        raise ZeroStatementsError(f"answer '{answer_id}' decomposed into zero statements")
    verdicts = SupportVerdicts(
        tuple(verify_support(s, contexts, backend) for s in statement_set.statements)
    )
    score = sum(verdicts.supported) / len(verdicts)
    return score, statement_set, verdicts


def answer_relevancy(question, answer, backend, embed_backend, m=DEFAULT_REGENERATED_QUESTIONS, cache=None):
    """Mean cosine between the question and m questions regenerated from the answer."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if not answer or not answer.strip():
        raise EmptyAnswerError("cannot regenerate questions from an empty answer")

    def parse(text):
        items = parse_numbered_list(text)
        return items if len(items) == m else None

    generated = _judge_with_retry(
        backend, "gen_questions", _GEN_QUESTIONS_PROMPT.format(m=m, answer=answer), parse
    )
    vectors = embed_texts(embed_backend, [question] + list(generated), cache)
    query_vec, generated_vecs = vectors[0], vectors[1:]
    sims = [cosine(query_vec, v) for v in generated_vecs]
    score = sum(sims) / m
    return score, list(zip(generated, sims))


def context_relevancy(question, contexts, backend):
    """Fraction of retrieved chunks the judge marks useful for the question."""
    if not contexts:
        raise ValueError("context relevancy needs at least one context")
    verdicts = [
        _judge_with_retry(
            backend,
            "judge_context",
            _JUDGE_CONTEXT_PROMPT.format(question=question, context=c),
            parse_yes_no,
            max_tokens=8,
        )
        for c in contexts
    ]
    score = sum(verdicts) / len(contexts)
    return score, verdicts


def evaluate_sample(sample, config):
    """Compute all three metrics for one triple; failures mark the record."""
    record = EvalRecord(qa_id=sample.id)
    stage = "faithfulness"
    try:
        faith, statements, verdicts = faithfulness(
            sample.answer, sample.contexts, config.llm_backend, answer_id=sample.id
        )
        record.faithfulness = faith
        record.diagnostics["statements"] = list(statements.statements)
        record.diagnostics["support_verdicts"] = list(verdicts.supported)

        stage = "answer_relevancy"
        relevancy, generated = answer_relevancy(
            sample.question,
            sample.answer,
            config.llm_backend,
            config.embed_backend,
            m=config.regenerated_questions,
            cache=config.cache,
        )
        record.answer_relevancy = relevancy
        record.diagnostics["generated_questions"] = [
            {"question": q, "similarity": s} for q, s in generated
        ]

        stage = "context_relevancy"
        ctx_score, ctx_verdicts = context_relevancy(
            sample.question, sample.contexts, config.llm_backend
        )
        record.context_relevancy = ctx_score
        record.diagnostics["context_verdicts"] = ctx_verdicts
    except UqragError as exc:
        record.failed = True
        record.stage = stage
        record.error = str(exc)
        record.faithfulness = None
        record.answer_relevancy = None
        record.context_relevancy = None
        logger.warning("sample '%s' failed at %s: %s", sample.id, stage, exc)
    return record


@dataclass
class Aggregates:
    sample_count: int
    failure_count: int
    faithfulness: float
    answer_relevancy: float
    answer_relevancy_raw: float
    context_relevancy: float
    negative_answer_relevancy_count: int
    answer_relevancy_clamped: bool

    def to_dict(self):
        return {
            "sample_count": self.sample_count,
            "failure_count": self.failure_count,
            "faithfulness": self.faithfulness,
            "answer_relevancy": self.answer_relevancy,
            "answer_relevancy_raw": self.answer_relevancy_raw,
            "context_relevancy": self.context_relevancy,
            "negative_answer_relevancy_count": self.negative_answer_relevancy_count,
            "answer_relevancy_clamped": self.answer_relevancy_clamped,
        }


def aggregate(records):
    """Arithmetic means over successful records; per-sample relevancy stays raw,
    the aggregate is clamped at 0 with a diagnostic counter."""
    ok = [r for r in records if not r.failed]
    failures = len(records) - len(ok)
    if not ok:
        return Aggregates(0, failures, None, None, None, None, 0, False)
    n = len(ok)
    faith = sum(r.faithfulness for r in ok) / n
    relevancy_raw = sum(r.answer_relevancy for r in ok) / n
    ctx = sum(r.context_relevancy for r in ok) / n
    clamped = relevancy_raw < 0.0
    return Aggregates(
        sample_count=n,
        failure_count=failures,
        faithfulness=faith,
        answer_relevancy=max(0.0, relevancy_raw),
        answer_relevancy_raw=relevancy_raw,
        context_relevancy=ctx,
        negative_answer_relevancy_count=sum(1 for r in ok if r.answer_relevancy < 0.0),
        answer_relevancy_clamped=clamped,
    )


def evaluate_dataset(samples, config):
    """Evaluate every triple; returns (records in input order, aggregates)."""
    samples = list(samples)
    if not samples:
        raise ValueError("evaluate_dataset needs at least one sample")
    if config.parallelism <= 1 or len(samples) == 1:
        records = [evaluate_sample(s, config) for s in samples]
    else:
        with ThreadPoolExecutor(max_workers=min(config.parallelism, len(samples))) as pool:
            records = list(pool.map(lambda s: evaluate_sample(s, config), samples))
    return records, aggregate(records)
