"""TOML configuration loading for the CLI, bench runner, and service."""

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .corpus import SplitPolicy
from .embed import EmbeddingCache, HttpEmbeddingBackend, MockEmbeddingBackend
from .errors import ConfigError
from .llm import HttpLlmBackend, ScriptedLlmBackend
from .pipeline import DepartmentTaxonomy, PromptTemplate, default_template, load_template
from .retry import RetryPolicy

SUPPORTED_CONFIG_VERSION = 1


def load_toml(path):
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}")


def _resolve(base_dir, value):
    p = Path(value)
    return p if p.is_absolute() else (base_dir / p)


def build_llm_backend(raw, base_dir):
    kind = raw.get("kind")
    if kind == "scripted":
        if "script" not in raw:
            raise ConfigError("scripted llm backend needs a 'script' path")
        return ScriptedLlmBackend.from_file(
            _resolve(base_dir, raw["script"]), model_id=raw.get("model_id", "scripted")
        )
    if kind == "http":
        for key in ("endpoint", "model_id"):
            if key not in raw:
                raise ConfigError(f"http llm backend needs '{key}'")
        return HttpLlmBackend(
            endpoint=raw["endpoint"],
            model_id=raw["model_id"],
            timeout=float(raw.get("timeout", 30.0)),
            retry=RetryPolicy(
                attempts=int(raw.get("retry_attempts", 3)),
                base_delay=float(raw.get("retry_base_delay", 0.25)),
            ),
            max_concurrency=int(raw.get("parallelism", 4)),
        )
    raise ConfigError(f"unknown llm backend kind '{kind}'")


def build_embedding_backend(raw):
    kind = raw.get("kind")
    if kind == "mock":
        return MockEmbeddingBackend(
            model_id=raw.get("model_id", "mock-embedder"),
            dimension=int(raw.get("dimension", 64)),
            seed=int(raw.get("seed", 0)),
            max_batch=int(raw.get("max_batch", 16)),
        )
    if kind == "http":
        for key in ("endpoint", "model_id", "dimension"):
            if key not in raw:
                raise ConfigError(f"http embedding backend needs '{key}'")
        return HttpEmbeddingBackend(
            endpoint=raw["endpoint"],
            model_id=raw["model_id"],
            dimension=int(raw["dimension"]),
            timeout=float(raw.get("timeout", 30.0)),
            max_batch=int(raw.get("max_batch", 16)),
            retry=RetryPolicy(
                attempts=int(raw.get("retry_attempts", 3)),
                base_delay=float(raw.get("retry_base_delay", 0.25)),
            ),
        )
    raise ConfigError(f"unknown embedding backend kind '{kind}'")


def build_taxonomy(raw):
    if not raw or "labels" not in raw:
        raise ConfigError("config needs a [taxonomy] table with 'labels'")
    return DepartmentTaxonomy.from_labels(raw["labels"], raw.get("fallback", "general"))


def build_split_policy(raw):
    if not raw:
        return SplitPolicy()
    return SplitPolicy(
        delimiter=raw.get("delimiter", "blank_line"),
        min_chars=int(raw.get("min_chars", 50)),
        max_chars=int(raw.get("max_chars", 2000)),
        overflow=raw.get("overflow", "hard_split"),
    )


def build_template(raw, base_dir):
    if not raw:
        return default_template()
    if "path" in raw:
        return load_template(_resolve(base_dir, raw["path"]))
    return PromptTemplate(
        system_text=raw.get("system_text", default_template().system_text),
        user_template=raw["user_template"],
        context_separator=raw.get("context_separator", "\n---\n"),
        language=raw.get("language", "fa"),
    )


@dataclass
class PipelineConfig:
    taxonomy: DepartmentTaxonomy
    template: PromptTemplate
    split_policy: SplitPolicy
    llm_raw: dict
    embedding_raw: dict
    base_dir: Path
    k: int = 3
    allow_empty_context: bool = False
    generate_temperature: float = 0.2
    generate_max_tokens: int = 1024
    regenerated_questions: int = 3
    cache_path: Path = None
    index_path: Path = None
    cors_origins: list = field(default_factory=list)
    gen_parallelism: int = 4

    def make_llm_backend(self):
        return build_llm_backend(self.llm_raw, self.base_dir)

    def make_embedding_backend(self):
        return build_embedding_backend(self.embedding_raw)

    def make_cache(self):
        return EmbeddingCache(self.cache_path) if self.cache_path else None


def load_pipeline_config(path):
    path = Path(path)
    raw = load_toml(path)
    version = raw.get("version", 1)
    if version != SUPPORTED_CONFIG_VERSION:
        raise ConfigError(f"{path}: unsupported config version {version}")
    base_dir = path.parent

    if "llm" not in raw:
        raise ConfigError(f"{path}: missing [llm] table")
    if "embedding" not in raw:
        raise ConfigError(f"{path}: missing [embedding] table")

    pipeline_raw = raw.get("pipeline", {})
    embedding_raw = raw["embedding"]
    cache_path = (
        _resolve(base_dir, embedding_raw["cache"]) if "cache" in embedding_raw else None
    )
    index_path = _resolve(base_dir, raw["index_path"]) if "index_path" in raw else None

    return PipelineConfig(
        taxonomy=build_taxonomy(raw.get("taxonomy")),
        template=build_template(raw.get("template"), base_dir),
        split_policy=build_split_policy(raw.get("split")),
        llm_raw=raw["llm"],
        embedding_raw=embedding_raw,
        base_dir=base_dir,
        k=int(pipeline_raw.get("k", 3)),
        allow_empty_context=pipeline_raw.get("empty_context", "error") == "allow",
        generate_temperature=float(raw["llm"].get("temperature", 0.2)),
        generate_max_tokens=int(raw["llm"].get("max_tokens", 1024)),
        regenerated_questions=int(raw.get("eval", {}).get("m", 3)),
        cache_path=cache_path,
        index_path=index_path,
        cors_origins=list(raw.get("service", {}).get("cors_origins", [])),
        gen_parallelism=int(raw["llm"].get("parallelism", 4)),
    )


def build_pipeline(config, index):
    """Assemble a Pipeline from a loaded config and a ready index."""
    from .pipeline import Pipeline

    return Pipeline(
        index=index,
        llm_backend=config.make_llm_backend(),
        embed_backend=config.make_embedding_backend(),
        taxonomy=config.taxonomy,
        template=config.template,
        k=config.k,
        cache=config.make_cache(),
        allow_empty_context=config.allow_empty_context,
        generate_temperature=config.generate_temperature,
        generate_max_tokens=config.generate_max_tokens,
    )
