"""Acceptance suite: one test per release criterion, offline via mocks.

Each test prints a PASS line once its assertions hold, so `pytest -s`
gives a one-line verdict per criterion.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from uqrag.bench import load_report_fixture, render_report
from uqrag.cli import main as cli_main
from uqrag.corpus import Chunk, load_corpus, load_qa_dataset, split_paragraphs
from uqrag.embed import EmbeddingCache, MockEmbeddingBackend, Vector, cosine, embed_texts
from uqrag.index import build as build_index
from uqrag.index import top_k
from uqrag.llm import ScriptEntry, ScriptedLlmBackend
from uqrag.ragas import EvalConfig, EvalSample, aggregate, evaluate_dataset, evaluate_sample
from uqrag.service import build_app_from_config

from conftest import FIXTURES, TableEmbeddingBackend, load_json, load_jsonl


def _unit_rows(rng, size, dim):
    rows = rng.standard_normal((size, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


# ----------------------------------------------------------------------
# Criterion 1: retrieval oracle equivalence
# ----------------------------------------------------------------------


def test_acceptance_retrieval_oracle():
    """top_k == brute-force full sort on 1,000 random cases, dims 8-256,
    sizes 1-500, exact scores and tie order, in under 10 s."""
    rng = np.random.default_rng(20250810)
    started = time.perf_counter()
    for case in range(1000):
        size = int(rng.integers(1, 501))
        dim = int(rng.integers(8, 257))
        rows = _unit_rows(rng, size, dim)
        if size >= 4 and case % 10 == 0:
            rows[1] = rows[0]  # force exact ties to exercise tie order
            rows[3] = rows[2]
        departments = ["a" if int(b) else "b" for b in rng.integers(0, 2, size)]
        chunks = [
            Chunk(chunk_id=f"c{i:04d}", doc_id=f"c{i:04d}", department=departments[i], ordinal=0, text="t")
            for i in range(size)
        ]
        vectors = [Vector(tuple(row.tolist()), "m") for row in rows]
        index = build_index(chunks, vectors)

        query = Vector(tuple(_unit_rows(rng, 1, dim)[0].tolist()), "m")
        k = int(rng.integers(1, 11))
        department = "a" if case % 3 == 0 else None

        result = top_k(index, query, k, department=department)

        # independent oracle: raw python full sort over per-entry dots
        qarr = np.asarray(query.values)
        scored = []
        for i in range(size):
            if department is not None and departments[i] != department:
                continue
            score = float(np.dot(rows[i], qarr))
            score = min(1.0, max(-1.0, score))
            scored.append((chunks[i].chunk_id, score))
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        expected = scored[:k]

        assert [(item.chunk_id, item.score) for item in result.items] == expected
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0, f"retrieval oracle sweep took {elapsed:.1f}s"
    print(f"\nACCEPTANCE PASS: retrieval oracle (1000 cases, {elapsed:.1f}s)")


# ----------------------------------------------------------------------
# Criterion 2: metric arithmetic on the committed 30-sample scenario
# ----------------------------------------------------------------------


def test_acceptance_metric_arithmetic():
    """The committed scripted scenario reproduces hand-computed per-sample
    metrics and aggregates to within 1e-12."""
    scenario = FIXTURES / "eval30"
    expected = load_json(scenario / "expected.json")
    samples = [
        EvalSample(id=r["id"], question=r["question"], answer=r["answer"], contexts=r["contexts"])
        for r in load_jsonl(scenario / "triples.jsonl")
    ]
    config = EvalConfig(
        llm_backend=ScriptedLlmBackend.from_file(scenario / "script.jsonl"),
        embed_backend=TableEmbeddingBackend(load_json(scenario / "vectors.json")),
        parallelism=1,
    )
    records, aggregates = evaluate_dataset(samples, config)
    for record, want in zip(records, expected["samples"]):
        assert abs(record.faithfulness - want["faithfulness"]) <= 1e-12
        assert abs(record.answer_relevancy - want["answer_relevancy"]) <= 1e-12
        assert abs(record.context_relevancy - want["context_relevancy"]) <= 1e-12
    want = expected["aggregates"]
    assert abs(aggregates.faithfulness - want["faithfulness"]) <= 1e-12
    assert abs(aggregates.answer_relevancy - want["answer_relevancy"]) <= 1e-12
    assert abs(aggregates.context_relevancy - want["context_relevancy"]) <= 1e-12
    print("\nACCEPTANCE PASS: metric arithmetic (30-sample oracle, ±1e-12)")


# ----------------------------------------------------------------------
# Criterion 3: cosine and embedding-cache checks
# ----------------------------------------------------------------------


def test_acceptance_cosine_and_cache(tmp_path):
    """cosine(v,v)=1±1e-9, exact symmetry, |cos|<=1 on 10,000 random unit
    pairs; warm and cold caches give identical vectors for 200 texts."""
    rng = np.random.default_rng(99)
    for _ in range(10_000):
        dim = int(rng.integers(2, 65))
        u = Vector(tuple(_unit_rows(rng, 1, dim)[0].tolist()), "m")
        v = Vector(tuple(_unit_rows(rng, 1, dim)[0].tolist()), "m")
        assert abs(cosine(u, u) - 1.0) <= 1e-9
        assert cosine(u, v) == cosine(v, u)
        assert abs(cosine(u, v)) <= 1.0

    texts = [f"متن آزمایشی شماره {i}" for i in range(200)]
    cold = embed_texts(MockEmbeddingBackend(dimension=24, seed=4), texts, EmbeddingCache())
    cache_path = tmp_path / "cache.jsonl"
    warm_backend = MockEmbeddingBackend(dimension=24, seed=4)
    embed_texts(warm_backend, texts, EmbeddingCache(cache_path))
    calls_before = len(warm_backend.batch_sizes)
    warm = embed_texts(warm_backend, texts, EmbeddingCache(cache_path))
    assert len(warm_backend.batch_sizes) == calls_before  # pure cache hits
    assert warm == cold
    print("\nACCEPTANCE PASS: cosine/embedding checks (10,000 pairs, 200-text cache)")


# ----------------------------------------------------------------------
# Criterion 4: end-to-end bench determinism incl. kill-and-resume
# ----------------------------------------------------------------------


def _run_bench_cli(out_dir, cache_dir, resume=False):
    cmd = [
        sys.executable,
        "-m",
        "uqrag",
        "bench",
        "--config",
        str(FIXTURES / "bench.toml"),
        "--out-dir",
        str(out_dir),
        "--cache-dir",
        str(cache_dir),
    ]
    if resume:
        cmd.append("--resume")
    return subprocess.run(cmd, capture_output=True, text=True, timeout=120)


def _report_bytes(out_dir):
    return {
        name: (out_dir / name).read_bytes()
        for name in ("report.md", "report.csv", "report.json")
    }


def test_acceptance_bench_determinism(tmp_path):
    """3 CLI runs and a kill-and-resume run all produce byte-identical
    reports over the bundled corpus and 30-QA fixture, in under 60 s."""
    started = time.perf_counter()

    reports = []
    for i in range(3):
        out_dir = tmp_path / f"run{i}"
        result = _run_bench_cli(out_dir, tmp_path / f"cache{i}")
        assert result.returncode == 0, result.stderr
        reports.append(_report_bytes(out_dir))
    assert reports[0] == reports[1] == reports[2]

    # kill a run around its midpoint, then resume into the same cache
    kill_cache = tmp_path / "cache-kill"
    process = subprocess.Popen(
        [
            sys.executable,
            "-m",
            "uqrag",
            "bench",
            "--config",
            str(FIXTURES / "bench.toml"),
            "--out-dir",
            str(tmp_path / "killed"),
            "--cache-dir",
            str(kill_cache),
        ],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    deadline = time.time() + 60
    while time.time() < deadline:
        entries = list(kill_cache.glob("*/*.json"))
        if len(entries) >= 15:  # half of the first configuration's samples
            break
        if process.poll() is not None:
            break
        time.sleep(0.01)
    process.kill()
    process.wait()
    completed_before_resume = len(list(kill_cache.glob("*/*.json")))
    assert completed_before_resume >= 15

    resume_out = tmp_path / "resumed"
    result = _run_bench_cli(resume_out, kill_cache, resume=True)
    assert result.returncode == 0, result.stderr
    assert _report_bytes(resume_out) == reports[0]
    served_from_cache = int(result.stdout.split("from cache")[0].rsplit(",", 1)[1].strip())
    assert served_from_cache >= 15  # at least the pre-kill half
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"bench determinism took {elapsed:.1f}s"
    print(
        f"\nACCEPTANCE PASS: bench determinism (3 runs + kill/resume, "
        f"{served_from_cache} cached, {elapsed:.1f}s)"
    )


# ----------------------------------------------------------------------
# Criterion 5: pipeline shape fidelity on every fixture question
# ----------------------------------------------------------------------


def test_acceptance_pipeline_shape():
    """Every fixture question yields a routed department from the taxonomy,
    at most 3 contexts in non-increasing score order, and a prompt carrying
    the question and every context verbatim."""
    from uqrag.config import build_pipeline, load_pipeline_config

    config = load_pipeline_config(FIXTURES / "pipeline.toml")
    docs = load_corpus(FIXTURES / "toy_corpus.jsonl")
    chunks = [c for d in docs for c in split_paragraphs(d, config.split_policy)]
    backend = config.make_embedding_backend()
    vectors = embed_texts(backend, [c.text for c in chunks])
    pipeline = build_pipeline(config, build_index(chunks, vectors))

    for qa in load_qa_dataset(FIXTURES / "qa30.jsonl"):
        record = pipeline.answer(qa.question)
        assert record.department in pipeline.taxonomy.labels
        assert record.retrieval.k_requested == 3
        assert 1 <= len(record.retrieval.items) <= 3
        scores = [item.score for item in record.retrieval.items]
        assert scores == sorted(scores, reverse=True)
        assert record.question in record.prompt
        for item in record.retrieval.items:
            assert item.text in record.prompt
    print("\nACCEPTANCE PASS: pipeline shape fidelity (30 questions, k=3)")


# ----------------------------------------------------------------------
# Criterion 6: score bounds under randomized scripted judges
# ----------------------------------------------------------------------


def test_acceptance_score_bounds_fuzz():
    """1,000 randomized scripted-judge evaluations keep faithfulness and
    context relevancy in [0,1] and the clamped aggregate answer relevancy
    in [0,1], with zero crashes."""
    rng = np.random.default_rng(7777)
    sim_choices = [1.0, 0.8, 0.6, 0.28, 0.0, -0.6, -1.0]
    batch = []
    aggregates_checked = 0
    for case in range(1000):
        sid = f"f{case:04d}"
        n_statements = int(rng.integers(1, 6))
        statements = [f"گزاره {sid}-{j}:" for j in range(1, n_statements + 1)]
        n_contexts = int(rng.integers(1, 5))
        contexts = [f"زمینه {sid}-{j}: متن." for j in range(1, n_contexts + 1)]
        entries = [
            ScriptEntry(
                tag="extract_statements",
                pattern=sid,
                response="\n".join(f"{j}. {s} متن" for j, s in enumerate(statements, start=1)),
            ),
            ScriptEntry(
                tag="gen_questions",
                pattern=sid,
                response="\n".join(f"{j}. بازپرسش {sid}-{j}" for j in range(1, 4)),
            ),
        ]
        for statement in statements:
            entries.append(
                ScriptEntry(
                    tag="verify_support",
                    pattern=statement,
                    response="yes" if rng.random() < 0.6 else "no",
                )
            )
        for context in contexts:
            entries.append(
                ScriptEntry(
                    tag="judge_context",
                    pattern=context.split(":")[0],
                    response="yes" if rng.random() < 0.5 else "no",
                )
            )
        mapping = {f"پرسش {sid}؟": [1.0, 0.0]}
        for j in range(1, 4):
            sim = float(sim_choices[int(rng.integers(len(sim_choices)))])
            mapping[f"بازپرسش {sid}-{j}"] = [sim, float(np.sqrt(1.0 - sim * sim))]
        config = EvalConfig(
            llm_backend=ScriptedLlmBackend(entries),
            embed_backend=TableEmbeddingBackend(mapping),
            parallelism=1,
        )
        sample = EvalSample(
            id=sid, question=f"پرسش {sid}؟", answer=f"پاسخ {sid}", contexts=contexts
        )
        record = evaluate_sample(sample, config)
        assert not record.failed, record.error
        assert 0.0 <= record.faithfulness <= 1.0
        assert 0.0 <= record.context_relevancy <= 1.0
        assert -1.0 <= record.answer_relevancy <= 1.0
        batch.append(record)
        if len(batch) == 50:
            agg = aggregate(batch)
            assert 0.0 <= agg.answer_relevancy <= 1.0
            assert 0.0 <= agg.faithfulness <= 1.0
            assert 0.0 <= agg.context_relevancy <= 1.0
            aggregates_checked += 1
            batch = []
    assert aggregates_checked == 20
    print("\nACCEPTANCE PASS: score bounds fuzz (1000 evaluations, 20 aggregates)")


# ----------------------------------------------------------------------
# Criterion 7: Table-I-shaped rendering fixture
# ----------------------------------------------------------------------


def test_acceptance_table1_rendering():
    """Rendering the published-results fixture reproduces its cells exactly;
    this checks formatting, it does not reproduce those results."""
    report = load_report_fixture(FIXTURES / "table1.json")
    rendered = render_report(report, "markdown")
    lines = rendered.splitlines()
    assert lines[0] == "| Model | Embedding | Faithfulness | Answer Relevancy | Context Relevancy |"
    expected_rows = [
        "| GPT 4o | OpenAI Embeddings | 0.6333 | 0.6395 | 0.1154 |",
        "| GPT 3.5-turbo | OpenAI Embeddings | 0.8497 | 0.5604 | 0.1849 |",
        "| GPT 3.5-turbo | Persin-Sentence-Embedding-V3 | 0.8113 | 0.493 | 0.223 |",
        "| GPT 4o | Persin-Sentence-Embedding-V3 | 0.6578 | 0.6564 | 0.1848 |",
        "| Dorna (Persian version of Llama3) | Dorna Embeddings | 0.839 | 0.823 | 0.216 |",
    ]
    assert lines[2:] == expected_rows
    print("\nACCEPTANCE PASS: Table-I rendering fixture (5 rows, exact cells)")


# ----------------------------------------------------------------------
# Criterion 8: CLI / service equivalence
# ----------------------------------------------------------------------


def test_acceptance_cli_service_equivalence(tmp_path):
    """`uqrag ask` and POST /ask agree on answer text, department, and
    context ids for 10 fixture questions."""
    runner = CliRunner()
    index_path = tmp_path / "toy.uqix"
    result = runner.invoke(
        cli_main,
        [
            "index",
            "--corpus", str(FIXTURES / "toy_corpus.jsonl"),
            "--out", str(index_path),
            "--config", str(FIXTURES / "pipeline.toml"),
        ],
        catch_exceptions=False,
    )
    assert result.exit_code == 0, result.output

    app = build_app_from_config(FIXTURES / "pipeline.toml", index_path=index_path)
    questions = [qa.question for qa in load_qa_dataset(FIXTURES / "qa30.jsonl")[:10]]
    with TestClient(app) as client:
        for question in questions:
            cli_result = runner.invoke(
                cli_main,
                [
                    "ask",
                    "--index", str(index_path),
                    "--config", str(FIXTURES / "pipeline.toml"),
                    "--json", question,
                ],
                catch_exceptions=False,
            )
            assert cli_result.exit_code == 0, cli_result.output
            cli_record = json.loads(cli_result.output)
            service_record = client.post("/ask", json={"question": question}).json()
            assert service_record["answer"] == cli_record["answer"]
            assert service_record["department"] == cli_record["department"]
            assert [c["chunk_id"] for c in service_record["contexts"]] == [
                i["chunk_id"] for i in cli_record["retrieval"]["items"]
            ]
    print("\nACCEPTANCE PASS: CLI/service equivalence (10 questions)")
