"""Benchmark runner: answer a QA dataset under named configurations and
aggregate the three metrics into a report.

Per-sample results are cached as one JSON file per (configuration, qa id) so
an interrupted run can resume without repeating completed work.
"""

import csv
import hashlib
import io
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import (
    build_embedding_backend,
    build_llm_backend,
    build_split_policy,
    build_taxonomy,
    build_template,
    load_toml,
)
from .corpus import load_corpus, load_qa_dataset, split_paragraphs
from .embed import embed_texts
from .errors import ConfigError, UnknownFormatError, UqragError
from .index import build as build_index
from .pipeline import Pipeline
from .ragas import EvalConfig, EvalRecord, EvalSample, aggregate, evaluate_sample

logger = logging.getLogger(__name__)

FORMATS = ("markdown", "csv", "json")


@dataclass
class BenchRunConfig:
    name: str
    model_label: str
    embedding_label: str
    llm_raw: dict
    embedding_raw: dict
    template_raw: dict
    k: int = 3


@dataclass
class BenchConfig:
    dataset: Path
    corpus: Path
    configs: list
    formats: list
    cache_dir: Path
    resume: bool = False
    taxonomy_raw: dict = field(default_factory=dict)
    split_raw: dict = field(default_factory=dict)
    regenerated_questions: int = 3
    parallelism: int = 1
    base_dir: Path = Path(".")


def load_bench_config(path):
    path = Path(path)
    raw = load_toml(path)
    base_dir = path.parent
    for key in ("dataset", "corpus", "configs"):
        if key not in raw:
            raise ConfigError(f"{path}: bench config needs '{key}'")
    formats = raw.get("formats", ["markdown"])
    unknown = [f for f in formats if f not in FORMATS]
    if unknown:
        raise ConfigError(f"{path}: unknown output formats {unknown}")

    configs = []
    names = set()
    for entry in raw["configs"]:
        if "name" not in entry:
            raise ConfigError(f"{path}: every [[configs]] entry needs a 'name'")
        if entry["name"] in names:
            raise ConfigError(f"{path}: duplicate configuration name '{entry['name']}'")
        names.add(entry["name"])
        if "llm" not in entry or "embedding" not in entry:
            raise ConfigError(
                f"{path}: configuration '{entry['name']}' needs [configs.llm] and [configs.embedding]"
            )
        configs.append(
            BenchRunConfig(
                name=entry["name"],
                model_label=entry.get("model_label", entry["llm"].get("model_id", entry["name"])),
                embedding_label=entry.get(
                    "embedding_label", entry["embedding"].get("model_id", "embedding")
                ),
                llm_raw=entry["llm"],
                embedding_raw=entry["embedding"],
                template_raw=entry.get("template", {}),
                k=int(entry.get("k", 3)),
            )
        )

    def resolve(value):
        p = Path(value)
        return p if p.is_absolute() else base_dir / p

    return BenchConfig(
        dataset=resolve(raw["dataset"]),
        corpus=resolve(raw["corpus"]),
        configs=configs,
        formats=list(formats),
        cache_dir=resolve(raw.get("cache_dir", ".uqrag-bench-cache")),
        resume=bool(raw.get("resume", False)),
        taxonomy_raw=raw.get("taxonomy", {}),
        split_raw=raw.get("split", {}),
        regenerated_questions=int(raw.get("eval", {}).get("m", 3)),
        parallelism=int(raw.get("parallelism", 1)),
        base_dir=base_dir,
    )


@dataclass
class ReportRow:
    config_name: str
    model_label: str
    embedding_label: str
    faithfulness: float = None
    answer_relevancy: float = None
    context_relevancy: float = None
    sample_count: int = 0
    failure_count: int = 0
    error: str = None

    def to_dict(self):
        return {
            "config_name": self.config_name,
            "model_label": self.model_label,
            "embedding_label": self.embedding_label,
            "faithfulness": self.faithfulness,
            "answer_relevancy": self.answer_relevancy,
            "context_relevancy": self.context_relevancy,
            "sample_count": self.sample_count,
            "failure_count": self.failure_count,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, raw):
        return cls(
            config_name=raw.get("config_name", ""),
            model_label=raw["model_label"],
            embedding_label=raw["embedding_label"],
            faithfulness=raw.get("faithfulness"),
            answer_relevancy=raw.get("answer_relevancy"),
            context_relevancy=raw.get("context_relevancy"),
            sample_count=int(raw.get("sample_count", 0)),
            failure_count=int(raw.get("failure_count", 0)),
            error=raw.get("error"),
        )


@dataclass
class RunStats:
    cache_hits: int = 0
    computed: int = 0
    started_at: str = ""
    finished_at: str = ""


@dataclass
class Report:
    rows: list
    metadata: dict = field(default_factory=dict)
    # wall-clock details live here, off the rendered artifact, so reports
    # stay byte-identical across runs and resume boundaries
    stats: RunStats = field(default_factory=RunStats, compare=False)

    def to_dict(self):
        return {"rows": [r.to_dict() for r in self.rows], "metadata": self.metadata}

    @classmethod
    def from_dict(cls, raw):
        return cls(
            rows=[ReportRow.from_dict(r) for r in raw.get("rows", [])],
            metadata=raw.get("metadata", {}),
        )


def load_report_fixture(path):
    with Path(path).open("r", encoding="utf-8") as fh:
        return Report.from_dict(json.load(fh))


def _file_sha256(path):
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _config_hash(run_config, bench_config, dataset_hash, corpus_hash):
    payload = {
        "name": run_config.name,
        "llm": run_config.llm_raw,
        "embedding": run_config.embedding_raw,
        "template": run_config.template_raw,
        "k": run_config.k,
        "taxonomy": bench_config.taxonomy_raw,
        "split": bench_config.split_raw,
        "m": bench_config.regenerated_questions,
        "dataset": dataset_hash,
        "corpus": corpus_hash,
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _atomic_write_json(path, payload):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _evaluate_one(pipeline, eval_config, qa):
    """Answer one question and evaluate the resulting triple."""
    try:
        answered = pipeline.answer(qa.question, department_hint=None)
    except UqragError as exc:
        record = EvalRecord(
            qa_id=qa.id, failed=True, stage=getattr(exc, "stage", "pipeline"), error=str(exc)
        )
        return {
            "qa_id": qa.id,
            "question": qa.question,
            "failed": True,
            "answer": None,
            "department": None,
            "context_ids": [],
            "contexts": [],
            "eval": record.to_dict(),
        }
    sample = EvalSample(
        id=qa.id,
        question=qa.question,
        answer=answered.answer,
        contexts=[item.text for item in answered.retrieval.items],
    )
    record = evaluate_sample(sample, eval_config)
    return {
        "qa_id": qa.id,
        "question": qa.question,
        "failed": record.failed,
        "answer": answered.answer,
        "department": answered.department,
        "context_ids": [item.chunk_id for item in answered.retrieval.items],
        "contexts": sample.contexts,
        "eval": record.to_dict(),
    }


def _run_configuration(bench_config, run_config, docs, dataset, dataset_hash, corpus_hash, stats):
    taxonomy = build_taxonomy(bench_config.taxonomy_raw)
    policy = build_split_policy(bench_config.split_raw)
    template = build_template(run_config.template_raw, bench_config.base_dir)
    embed_backend = build_embedding_backend(run_config.embedding_raw)
    llm_backend = build_llm_backend(run_config.llm_raw, bench_config.base_dir)

    chunks = [chunk for doc in docs for chunk in split_paragraphs(doc, policy)]
    vectors = embed_texts(embed_backend, [c.text for c in chunks])
    index = build_index(chunks, vectors)
    pipeline = Pipeline(
        index=index,
        llm_backend=llm_backend,
        embed_backend=embed_backend,
        taxonomy=taxonomy,
        template=template,
        k=run_config.k,
    )
    eval_config = EvalConfig(
        llm_backend=llm_backend,
        embed_backend=embed_backend,
        regenerated_questions=bench_config.regenerated_questions,
        parallelism=1,
    )

    cache_dir = bench_config.cache_dir / _config_hash(
        run_config, bench_config, dataset_hash, corpus_hash
    )
    cache_dir.mkdir(parents=True, exist_ok=True)

    def run_sample(qa):
        entry_path = cache_dir / f"{qa.id}.json"
        if bench_config.resume and entry_path.exists():
            with entry_path.open("r", encoding="utf-8") as fh:
                return json.load(fh), True
        entry = _evaluate_one(pipeline, eval_config, qa)
        _atomic_write_json(entry_path, entry)
        return entry, False

    # samples may fan out, but results are collected in dataset order so the
    # aggregation fold (and therefore the report) is order-independent
    if bench_config.parallelism <= 1 or len(dataset) <= 1:
        outcomes = [run_sample(qa) for qa in dataset]
    else:
        with ThreadPoolExecutor(max_workers=bench_config.parallelism) as pool:
            outcomes = list(pool.map(run_sample, dataset))

    records = []
    for entry, from_cache in outcomes:
        if from_cache:
            stats.cache_hits += 1
        else:
            stats.computed += 1
        records.append(EvalRecord.from_dict(entry["eval"]))

    agg = aggregate(records)
    return ReportRow(
        config_name=run_config.name,
        model_label=run_config.model_label,
        embedding_label=run_config.embedding_label,
        faithfulness=agg.faithfulness,
        answer_relevancy=agg.answer_relevancy,
        context_relevancy=agg.context_relevancy,
        sample_count=agg.sample_count,
        failure_count=agg.failure_count,
    )


def run_bench(bench_config):
    """Run every configuration over the dataset and build the report."""
    stats = RunStats(started_at=datetime.now(timezone.utc).isoformat())
    dataset = load_qa_dataset(bench_config.dataset)
    docs = load_corpus(bench_config.corpus)
    dataset_hash = _file_sha256(bench_config.dataset)
    corpus_hash = _file_sha256(bench_config.corpus)

    rows = []
    for run_config in bench_config.configs:
        started = time.perf_counter()
        try:
            row = _run_configuration(
                bench_config, run_config, docs, dataset, dataset_hash, corpus_hash, stats
            )
        except UqragError as exc:
            logger.error("configuration '%s' aborted: %s", run_config.name, exc)
            row = ReportRow(
                config_name=run_config.name,
                model_label=run_config.model_label,
                embedding_label=run_config.embedding_label,
                sample_count=0,
                failure_count=len(dataset),
                error=str(exc),
            )
        logger.info(
            "configuration '%s' finished in %.2fs", run_config.name, time.perf_counter() - started
        )
        rows.append(row)

    stats.finished_at = datetime.now(timezone.utc).isoformat()
    report = Report(
        rows=rows,
        metadata={
            "dataset_sha256": dataset_hash,
            "corpus_sha256": corpus_hash,
            "artifact_version": __version__,
        },
        stats=stats,
    )
    return report


def format_metric(value):
    """Metric cell: rounded to 4 decimal places, trailing zeros trimmed."""
    if value is None:
        return ""
    text = f"{value:.4f}".rstrip("0")
    if text.endswith("."):
        text += "0"
    return text


MARKDOWN_COLUMNS = ("Model", "Embedding", "Faithfulness", "Answer Relevancy", "Context Relevancy")


def _render_markdown(report):
    lines = [
        "| " + " | ".join(MARKDOWN_COLUMNS) + " |",
        "|" + "|".join([" --- "] * len(MARKDOWN_COLUMNS)) + "|",
    ]
    for row in report.rows:
        cells = (
            row.model_label,
            row.embedding_label,
            format_metric(row.faithfulness),
            format_metric(row.answer_relevancy),
            format_metric(row.context_relevancy),
        )
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def _render_csv(report):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        [
            "config_name",
            "model",
            "embedding",
            "faithfulness",
            "answer_relevancy",
            "context_relevancy",
            "sample_count",
            "failure_count",
        ]
    )
    for row in report.rows:
        writer.writerow(
            [
                row.config_name,
                row.model_label,
                row.embedding_label,
                format_metric(row.faithfulness),
                format_metric(row.answer_relevancy),
                format_metric(row.context_relevancy),
                row.sample_count,
                row.failure_count,
            ]
        )
    return buffer.getvalue()


def _render_json(report):
    return json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n"


def render_report(report, fmt):
    """Render a report deterministically as markdown, csv, or json."""
    if fmt == "markdown":
        return _render_markdown(report)
    if fmt == "csv":
        return _render_csv(report)
    if fmt == "json":
        return _render_json(report)
    raise UnknownFormatError(f"unknown report format '{fmt}'")


_EXTENSIONS = {"markdown": "md", "csv": "csv", "json": "json"}


def write_reports(report, formats, out_dir):
    """Write report.<ext> per requested format; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        target = out_dir / f"report.{_EXTENSIONS[fmt]}"
        target.write_text(render_report(report, fmt), encoding="utf-8")
        written.append(target)
    return written
