"""Exception types shared across the package."""


class UqragError(Exception):
    """Base class for every error raised by uqrag."""


# --- corpus / dataset files ---


class JsonlParseError(UqragError):
    """A JSONL record could not be parsed or violates the record schema."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class DuplicateIdError(UqragError):
    def __init__(self, record_id, line_no, first_line_no=None):
        where = f" (first seen at line {first_line_no})" if first_line_no else ""
        super().__init__(f"duplicate id '{record_id}' at line {line_no}{where}")
        self.record_id = record_id
        self.line_no = line_no


class EmptyCorpusError(UqragError):
    pass


class DatasetInvariantError(UqragError):
    """A Document/QaPair field combination violates a dataset invariant."""


class QuestionGenerationError(UqragError):
    """Backend failure while generating questions for one document."""

    def __init__(self, doc_id, message):
        super().__init__(f"document '{doc_id}': {message}")
        self.doc_id = doc_id


# --- embeddings ---


class EmbeddingBackendError(UqragError):
    """Transport or protocol failure talking to an embedding backend."""


class DimensionMismatchError(UqragError):
    pass


class ZeroVectorError(UqragError):
    pass


class ModelMismatchError(UqragError):
    pass


# --- vector index ---


class IndexBuildError(UqragError):
    pass


class IndexFormatError(UqragError):
    """Index file is corrupt or has an unsupported version."""


# --- llm ---


class LlmTransportError(UqragError):
    """HTTP chat backend failed after exhausting the retry policy."""


class NoMatchingScriptError(UqragError):
    pass


class EmptyCompletionError(UqragError):
    pass


class MalformedJudgeOutputError(UqragError):
    """Judge response stayed unparseable after the single reprompt retry."""


# --- pipeline ---


class TemplateError(UqragError):
    pass


class ConfigError(UqragError):
    pass


class EmptyRetrievalError(UqragError):
    pass


class PipelineStageError(UqragError):
    """Wraps a failure so callers can see which pipeline stage raised it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage


# --- evaluation ---


class EmptyAnswerError(UqragError):
    pass


class ZeroStatementsError(UqragError):
    pass


# --- reporting ---


class UnknownFormatError(UqragError):
    pass
