"""uqrag command line."""

import json
from pathlib import Path

import click

from . import __version__
from .bench import load_bench_config, run_bench, write_reports
from .config import build_pipeline, load_pipeline_config, load_toml
from .corpus import (
    DEFAULT_SPLIT_POLICY,
    generate_questions,
    load_corpus,
    save_jsonl,
    split_paragraphs,
)
from .embed import embed_texts
from .errors import UqragError
from .index import build as build_index
from .index import load as load_index
from .index import save as save_index
from .ragas import EvalConfig, EvalSample, evaluate_dataset


def _fail(exc):
    raise click.ClickException(str(exc))


@click.group()
@click.version_option(__version__, prog_name="uqrag")
def main():
    """Persian university RAG: ingest, index, ask, evaluate, benchmark, serve."""


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--validate-only", is_flag=True, help="Only validate, skip chunking stats.")
def ingest(corpus_path, validate_only):
    """Load and validate a JSONL corpus file."""
    try:
        docs = load_corpus(corpus_path)
    except UqragError as exc:
        _fail(exc)
    departments = sorted({d.department for d in docs})
    click.echo(f"OK: {len(docs)} documents, {len(departments)} departments")
    if validate_only:
        return
    chunks = [c for d in docs for c in split_paragraphs(d, DEFAULT_SPLIT_POLICY)]
    click.echo(f"chunks under default split policy: {len(chunks)}")
    for dept in departments:
        count = sum(1 for c in chunks if c.department == dept)
        click.echo(f"  {dept}: {count} chunks")


@main.command("gen-questions")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--per-doc", "per_doc", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def gen_questions(corpus_path, per_doc, out_path, config_path):
    """Generate questions for every corpus document through the LLM backend."""
    try:
        docs = load_corpus(corpus_path)
        config = load_pipeline_config(config_path)
        backend = config.make_llm_backend()
        pairs = generate_questions(
            docs, backend, per_doc, parallelism=config.gen_parallelism
        )
        save_jsonl(pairs, out_path)
    except UqragError as exc:
        _fail(exc)
    click.echo(f"wrote {len(pairs)} generated questions to {out_path}")


@main.command("index")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--policy", "policy_path", type=click.Path(exists=True), default=None,
              help="TOML file overriding the [split] policy.")
def index_cmd(corpus_path, out_path, config_path, policy_path):
    """Chunk a corpus, embed the chunks, and write the vector index."""
    from .config import build_split_policy

    try:
        docs = load_corpus(corpus_path)
        config = load_pipeline_config(config_path)
        policy = config.split_policy
        if policy_path:
            raw = load_toml(policy_path)
            policy = build_split_policy(raw.get("split", raw))
        chunks = [c for d in docs for c in split_paragraphs(d, policy)]
        backend = config.make_embedding_backend()
        vectors = embed_texts(backend, [c.text for c in chunks], config.make_cache())
        idx = build_index(chunks, vectors)
        save_index(idx, out_path)
    except UqragError as exc:
        _fail(exc)
    click.echo(f"indexed {idx.count} chunks from {len(docs)} documents -> {out_path}")


@main.command()
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True, help="Print the full answer record as JSON.")
@click.argument("question")
def ask(index_path, config_path, as_json, question):
    """Answer one question against a built index."""
    try:
        config = load_pipeline_config(config_path)
        idx = load_index(index_path)
        pipeline = build_pipeline(config, idx)
        record = pipeline.answer(question)
    except UqragError as exc:
        _fail(exc)
    if as_json:
        click.echo(json.dumps(record.to_dict(), ensure_ascii=False, indent=2))
    else:
        click.echo(record.answer)


@main.command("eval")
@click.option("--triples", "triples_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def eval_cmd(triples_path, config_path, out_path):
    """Evaluate (question, answer, contexts) triples; write EvalRecord JSONL."""
    try:
        samples = []
        with open(triples_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                raw = json.loads(line)
                samples.append(
                    EvalSample(
                        id=raw["id"],
                        question=raw["question"],
                        answer=raw["answer"],
                        contexts=list(raw["contexts"]),
                    )
                )
        config = load_pipeline_config(config_path)
        eval_config = EvalConfig(
            llm_backend=config.make_llm_backend(),
            embed_backend=config.make_embedding_backend(),
            cache=config.make_cache(),
            regenerated_questions=config.regenerated_questions,
        )
        records, aggregates = evaluate_dataset(samples, eval_config)
    except (UqragError, KeyError, json.JSONDecodeError) as exc:
        _fail(exc)
    with open(out_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
    click.echo(json.dumps(aggregates.to_dict(), ensure_ascii=False, indent=2))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", "out_dir", required=True, type=click.Path())
@click.option("--resume", is_flag=True, help="Reuse cached per-sample results.")
@click.option("--cache-dir", "cache_dir", type=click.Path(), default=None,
              help="Override the cache directory from the config.")
def bench(config_path, out_dir, resume, cache_dir):
    """Run the benchmark configurations and write the report files."""
    try:
        config = load_bench_config(config_path)
        if resume:
            config.resume = True
        if cache_dir:
            config.cache_dir = Path(cache_dir)
        report = run_bench(config)
        written = write_reports(report, config.formats, out_dir)
    except UqragError as exc:
        _fail(exc)
    click.echo(
        f"bench finished: {len(report.rows)} configurations, "
        f"{report.stats.computed} computed, {report.stats.cache_hits} from cache"
    )
    for path in written:
        click.echo(f"  wrote {path}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--bind", default="127.0.0.1:8000", show_default=True)
@click.option("--index", "index_path", type=click.Path(exists=True), default=None,
              help="Override the index path from the config.")
def serve(config_path, bind, index_path):
    """Serve /ask, /healthz and /version over HTTP."""
    from .service import serve as run_service

    try:
        run_service(config_path, bind=bind, index_path=index_path)
    except UqragError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
