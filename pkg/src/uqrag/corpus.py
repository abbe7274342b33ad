"""Corpus and QA dataset tooling: loading, validation, chunking, augmentation.

Interchange format is JSON Lines throughout: one record per line, UTF-8,
unknown fields preserved on round-trip.
"""

import json
import re
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DatasetInvariantError,
    DuplicateIdError,
    EmptyCorpusError,
    JsonlParseError,
    MalformedJudgeOutputError,
    QuestionGenerationError,
    UqragError,
)
from .llm import ChatRequest, chat, parse_numbered_list

DOCUMENT_FIELDS = ("id", "department", "title", "text", "source_url", "lang")
QA_FIELDS = ("id", "question", "reference_answer", "department", "origin", "validated")

ORIGINS = ("student", "generated")


@dataclass(frozen=True)
class Document:
    id: str
    department: str
    title: str
    text: str
    source_url: str = None
    lang: str = "fa"
    extra: dict = field(default_factory=dict, repr=False, compare=True)

    def __post_init__(self):
        if not self.id:
            raise DatasetInvariantError("document id must be nonempty")
        if not self.text or not self.text.strip():
            raise DatasetInvariantError(f"document '{self.id}' has empty text")

    @classmethod
    def from_dict(cls, raw):
        missing = [k for k in ("id", "department", "title", "text") if k not in raw]
        if missing:
            raise DatasetInvariantError(f"document record missing fields: {', '.join(missing)}")
        extra = {k: v for k, v in raw.items() if k not in DOCUMENT_FIELDS}
        return cls(
            id=raw["id"],
            department=raw["department"],
            title=raw["title"],
            text=raw["text"],
            source_url=raw.get("source_url"),
            lang=raw.get("lang", "fa"),
            extra=extra,
        )

    def to_dict(self):
        record = {
            "id": self.id,
            "department": self.department,
            "title": self.title,
            "text": self.text,
            "lang": self.lang,
        }
        if self.source_url is not None:
            record["source_url"] = self.source_url
        record.update(self.extra)
        return record


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    department: str
    ordinal: int
    text: str

    def __post_init__(self):
        if self.ordinal < 0:
            raise DatasetInvariantError("chunk ordinal must be >= 0")
        if not self.text:
            raise DatasetInvariantError("chunk text must be nonempty")


@dataclass(frozen=True)
class QaPair:
    id: str
    question: str
    reference_answer: str = None
    department: str = None
    origin: str = "student"
    validated: bool = False
    extra: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.id:
            raise DatasetInvariantError("qa pair id must be nonempty")
        if not self.question or not self.question.strip():
            raise DatasetInvariantError(f"qa pair '{self.id}' has an empty question")
        if self.origin not in ORIGINS:
            raise DatasetInvariantError(f"qa pair '{self.id}' has unknown origin '{self.origin}'")
        if self.validated and not (self.reference_answer and self.reference_answer.strip()):
            raise DatasetInvariantError(
                f"qa pair '{self.id}' is validated but has no reference answer"
            )

    @classmethod
    def from_dict(cls, raw):
        missing = [k for k in ("id", "question") if k not in raw]
        if missing:
            raise DatasetInvariantError(f"qa record missing fields: {', '.join(missing)}")
        extra = {k: v for k, v in raw.items() if k not in QA_FIELDS}
        return cls(
            id=raw["id"],
            question=raw["question"],
            reference_answer=raw.get("reference_answer"),
            department=raw.get("department"),
            origin=raw.get("origin", "student"),
            validated=bool(raw.get("validated", False)),
            extra=extra,
        )

    def to_dict(self):
        record = {
            "id": self.id,
            "question": self.question,
            "reference_answer": self.reference_answer,
            "department": self.department,
            "origin": self.origin,
            "validated": self.validated,
        }
        record.update(self.extra)
        return record


DELIMITERS = {"blank_line": "\n\n", "single_newline": "\n"}
OVERFLOW_MODES = ("hard_split", "keep")


@dataclass(frozen=True)
class SplitPolicy:
    delimiter: str = "blank_line"
    min_chars: int = 50
    max_chars: int = 2000
    overflow: str = "hard_split"

    def __post_init__(self):
        if self.delimiter not in DELIMITERS:
            raise DatasetInvariantError(f"unknown split delimiter '{self.delimiter}'")
        if self.overflow not in OVERFLOW_MODES:
            raise DatasetInvariantError(f"unknown overflow mode '{self.overflow}'")
        if self.min_chars < 1:
            raise DatasetInvariantError("min_chars must be >= 1")
        if self.min_chars > self.max_chars:
            raise DatasetInvariantError("min_chars must be <= max_chars")

    @property
    def delimiter_text(self):
        return DELIMITERS[self.delimiter]


DEFAULT_SPLIT_POLICY = SplitPolicy()

_BLANK_LINE_SPLIT = re.compile(r"\n\s*\n")


def normalize_text(text, policy=DEFAULT_SPLIT_POLICY):
    """Canonical form: paragraphs trimmed, joined by the policy delimiter."""
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    if policy.delimiter == "blank_line":
        parts = _BLANK_LINE_SPLIT.split(text)
    else:
        parts = text.split("\n")
    parts = [p.strip() for p in parts]
    return policy.delimiter_text.join(p for p in parts if p)


def split_paragraphs(doc, policy=DEFAULT_SPLIT_POLICY):
    """Split a document into paragraph chunks under the given policy.

    Paragraphs shorter than ``min_chars`` are merged into the following
    paragraph (or the preceding one when they end the document); paragraphs
    longer than ``max_chars`` are hard-split or kept per the overflow mode.
    Joining the resulting chunk texts with the delimiter reconstructs the
    normalized document text whenever overflow is "keep".
    """
    normalized = normalize_text(doc.text, policy)
    if not normalized:
        return []
    delim = policy.delimiter_text

    merged = []
    pending = ""
    for para in normalized.split(delim):
        candidate = pending + delim + para if pending else para
        if len(candidate) < policy.min_chars:
            pending = candidate
        else:
            merged.append(candidate)
            pending = ""
    if pending:
        if merged:
            merged[-1] = merged[-1] + delim + pending
        else:
            merged.append(pending)

    pieces = []
    for text in merged:
        if policy.overflow == "hard_split" and len(text) > policy.max_chars:
            pieces.extend(
                text[i : i + policy.max_chars] for i in range(0, len(text), policy.max_chars)
            )
        else:
            pieces.append(text)

    return [
        Chunk(
            chunk_id=f"{doc.id}#{ordinal}",
            doc_id=doc.id,
            department=doc.department,
            ordinal=ordinal,
            text=text,
        )
        for ordinal, text in enumerate(pieces)
    ]


def _load_jsonl(path, parse_record, what):
    path = Path(path)
    records = []
    seen = {}
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise JsonlParseError(path, line_no, f"invalid JSON: {exc.msg}")
            if not isinstance(raw, dict):
                raise JsonlParseError(path, line_no, f"expected a JSON object, got {type(raw).__name__}")
            try:
                record = parse_record(raw)
            except DatasetInvariantError as exc:
                raise JsonlParseError(path, line_no, str(exc))
            if record.id in seen:
                raise DuplicateIdError(record.id, line_no, seen[record.id])
            seen[record.id] = line_no
            records.append(record)
    if not records:
        raise EmptyCorpusError(f"{path} contains no {what}")
    return records


def load_corpus(path):
    """Load a JSONL corpus file into Documents, in file order."""
    return _load_jsonl(path, Document.from_dict, "documents")


def load_qa_dataset(path):
    """Load a JSONL QA dataset file into QaPairs, in file order."""
    return _load_jsonl(path, QaPair.from_dict, "qa pairs")


def save_jsonl(records, path):
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")


def canonical_question(text):
    """Key used for duplicate detection: NFC + whitespace collapse."""
    return re.sub(r"\s+", " ", unicodedata.normalize("NFC", text)).strip()


def merge_datasets(student, generated):
    """Union of the two QA sets with exact-duplicate questions removed.

    Student pairs come first and win collisions; order is otherwise stable.
    """
    merged = []
    seen = set()
    for pair in list(student) + list(generated):
        key = canonical_question(pair.question)
        if key in seen:
            continue
        seen.add(key)
        merged.append(pair)
    return merged


_QUESTION_PROMPT = (
    "متن زیر از اسناد دانشگاه است. بر اساس آن دقیقا {n} پرسش بنویس که پاسخشان در متن باشد.\n"
    "پرسش‌ها را فقط به صورت فهرست شماره‌دار (1. ، 2. ، ...) بنویس.\n\n"
    "عنوان: {title}\n\nمتن:\n{text}"
)
_REPROMPT_SUFFIX = "\n\nخروجی قبلی قابل استفاده نبود. فقط فهرست شماره‌دار با دقیقا {n} پرسش بنویس."


def _questions_for_doc(doc, backend, per_doc, max_tokens):
    prompt = _QUESTION_PROMPT.format(n=per_doc, title=doc.title, text=doc.text)
    request = ChatRequest(
        messages=[{"role": "user", "content": prompt}],
        temperature=0.0,
        max_tokens=max_tokens,
        tag="gen_questions",
    )
    try:
        response = chat(backend, request)
        questions = parse_numbered_list(response)
        if len(questions) != per_doc:
            retry = ChatRequest(
                messages=[{"role": "user", "content": prompt + _REPROMPT_SUFFIX.format(n=per_doc)}],
                temperature=0.0,
                max_tokens=max_tokens,
                tag="gen_questions",
            )
            response = chat(backend, retry)
            questions = parse_numbered_list(response)
    except MalformedJudgeOutputError:
        raise
    except UqragError as exc:
        raise QuestionGenerationError(doc.id, str(exc)) from exc
    if len(questions) != per_doc:
        raise MalformedJudgeOutputError(
            f"document '{doc.id}': expected {per_doc} questions, judge produced {len(questions)}"
        )
    return [
        QaPair(
            id=f"{doc.id}-g{i}",
            question=question,
            department=doc.department,
            origin="generated",
            validated=False,
        )
        for i, question in enumerate(questions, start=1)
    ]


def generate_questions(docs, backend, per_doc, parallelism=4, max_tokens=1024):
    """Generate ``per_doc`` questions per document through the LLM backend.

    Judge calls may fan out across threads, but output order always follows
    document order.
    """
    if per_doc < 1:
        raise ValueError("per_doc must be >= 1")
    docs = list(docs)
    if not docs:
        return []
    if parallelism <= 1 or len(docs) == 1:
        batches = [_questions_for_doc(d, backend, per_doc, max_tokens) for d in docs]
    else:
        with ThreadPoolExecutor(max_workers=min(parallelism, len(docs))) as pool:
            batches = list(pool.map(lambda d: _questions_for_doc(d, backend, per_doc, max_tokens), docs))
    return [pair for batch in batches for pair in batch]
