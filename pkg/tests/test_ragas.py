"""Metric arithmetic, judge plumbing, and the committed 30-sample scenario."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uqrag.embed import MockEmbeddingBackend
from uqrag.errors import EmptyAnswerError, MalformedJudgeOutputError
from uqrag.llm import ScriptEntry, ScriptedLlmBackend
from uqrag.ragas import (
    EvalConfig,
    EvalRecord,
    EvalSample,
    aggregate,
    answer_relevancy,
    context_relevancy,
    evaluate_dataset,
    evaluate_sample,
    extract_statements,
    faithfulness,
)

from conftest import FIXTURES, TableEmbeddingBackend, load_json, load_jsonl


def scripted(*entries):
    return ScriptedLlmBackend(list(entries))


# --- extract_statements ---


def test_extract_statements_direct_parse():
    backend = scripted(ScriptEntry(tag="extract_statements", pattern="*", response="1. X\n2. Y"))
    statements = extract_statements("پاسخی با دو واقعیت", backend)
    assert statements.statements == ("X", "Y")


def test_extract_statements_empty_answer():
    backend = scripted()
    with pytest.raises(EmptyAnswerError):
        extract_statements("  ", backend)


def test_extract_statements_retries_once_then_fails():
    backend = scripted(ScriptEntry(tag="extract_statements", pattern="*", response="no list"))
    with pytest.raises(MalformedJudgeOutputError):
        extract_statements("پاسخ", backend)
    assert len(backend.calls) == 2


def test_extract_statements_persian_two_fact_fixture():
    answer = "دانشگاه اصفهان در سال ۱۳۲۵ تاسیس شد و دانشکده فیزیک دو آزمایشگاه دارد."
    decomposition = "1. دانشگاه اصفهان در سال ۱۳۲۵ تاسیس شد.\n2. دانشکده فیزیک دو آزمایشگاه دارد."
    backend = scripted(
        ScriptEntry(tag="extract_statements", pattern="تاسیس", response=decomposition)
    )
    statements = extract_statements(answer, backend)
    assert statements.statements == (
        "دانشگاه اصفهان در سال ۱۳۲۵ تاسیس شد.",
        "دانشکده فیزیک دو آزمایشگاه دارد.",
    )


# --- faithfulness ---


def faith_backend(verdicts):
    # the trailing colon keeps patterns prefix-free ("گزاره 1:" vs "گزاره 12:")
    entries = [
        ScriptEntry(
            tag="extract_statements",
            pattern="*",
            response="\n".join(f"{i}. گزاره {i}: متن" for i in range(1, len(verdicts) + 1)),
        )
    ]
    for i, verdict in enumerate(verdicts, start=1):
        entries.append(
            ScriptEntry(
                tag="verify_support", pattern=f"گزاره {i}:", response="yes" if verdict else "no"
            )
        )
    return scripted(*entries)


def test_faithfulness_three_quarters():
    backend = faith_backend([True, True, True, False])
    score, statements, verdicts = faithfulness("پاسخ", ["زمینه"], backend)
    assert score == 0.75
    assert len(statements.statements) == 4
    assert verdicts.supported == (True, True, True, False)


def test_faithfulness_all_supported():
    score, _, _ = faithfulness("پاسخ", ["زمینه"], faith_backend([True, True]))
    assert score == 1.0


def test_faithfulness_requires_contexts():
    with pytest.raises(ValueError):
        faithfulness("پاسخ", [], faith_backend([True]))


@settings(max_examples=80, deadline=None)
@given(verdicts=st.lists(st.booleans(), min_size=1, max_size=12))
def test_faithfulness_is_exact_ratio(verdicts):
    score, _, _ = faithfulness("پاسخ", ["زمینه"], faith_backend(verdicts))
    assert score == sum(verdicts) / len(verdicts)
    assert 0.0 <= score <= 1.0


# --- answer_relevancy ---


def relevancy_backend_and_embedder(sims):
    """Generated question i embeds to a vector whose cosine against the
    question's embedding is sims[i]."""
    regenerated = [f"بازپرسش {i}" for i in range(1, len(sims) + 1)]
    backend = scripted(
        ScriptEntry(
            tag="gen_questions",
            pattern="*",
            response="\n".join(f"{i}. {q}" for i, q in enumerate(regenerated, start=1)),
        )
    )
    mapping = {"پرسش اصلی؟": [1.0, 0.0]}
    for q, sim in zip(regenerated, sims):
        y = (1.0 - sim * sim) ** 0.5
        mapping[q] = [sim, y]
    return backend, TableEmbeddingBackend(mapping)


def test_answer_relevancy_mean_of_sims():
    backend, embedder = relevancy_backend_and_embedder([1.0, 0.5, 0.0])
    score, generated = answer_relevancy("پرسش اصلی؟", "پاسخ", backend, embedder, m=3)
    assert score == pytest.approx(0.5, abs=1e-12)
    assert [s for _, s in generated] == pytest.approx([1.0, 0.5, 0.0], abs=1e-12)


def test_answer_relevancy_identical_questions_score_one():
    backend = scripted(
        ScriptEntry(tag="gen_questions", pattern="*", response="1. پرسش اصلی؟\n2. پرسش اصلی؟\n3. پرسش اصلی؟")
    )
    embedder = MockEmbeddingBackend(dimension=16, seed=3)
    score, _ = answer_relevancy("پرسش اصلی؟", "پاسخ", backend, embedder, m=3)
    assert score == pytest.approx(1.0, abs=1e-9)


def test_answer_relevancy_wrong_count_retries_then_fails():
    backend = scripted(ScriptEntry(tag="gen_questions", pattern="*", response="1. تنها یکی"))
    embedder = MockEmbeddingBackend(dimension=8, seed=1)
    with pytest.raises(MalformedJudgeOutputError):
        answer_relevancy("پرسش؟", "پاسخ", backend, embedder, m=3)
    assert len(backend.calls) == 2


def test_answer_relevancy_matches_logged_sims_recomputation():
    backend, embedder = relevancy_backend_and_embedder([0.8, -0.6, 0.28])
    score, generated = answer_relevancy("پرسش اصلی؟", "پاسخ", backend, embedder, m=3)
    assert score == pytest.approx(sum(s for _, s in generated) / 3, abs=1e-15)


# --- context_relevancy ---


def context_backend(verdicts):
    entries = [
        ScriptEntry(tag="judge_context", pattern=f"زمینه {i}:", response="yes" if verdict else "no")
        for i, verdict in enumerate(verdicts, start=1)
    ]
    return scripted(*entries)


def test_context_relevancy_two_thirds():
    contexts = [f"زمینه {i}: متن" for i in (1, 2, 3)]
    score, verdicts = context_relevancy("پرسش", contexts, context_backend([True, False, True]))
    assert score == pytest.approx(2 / 3, abs=1e-12)
    assert verdicts == [True, False, True]


def test_context_relevancy_all_useful():
    contexts = [f"زمینه {i}: متن" for i in (1, 2)]
    score, _ = context_relevancy("پرسش", contexts, context_backend([True, True]))
    assert score == 1.0


@settings(max_examples=80, deadline=None)
@given(verdicts=st.lists(st.booleans(), min_size=1, max_size=8))
def test_context_relevancy_is_exact_ratio(verdicts):
    contexts = [f"زمینه {i}: متن" for i in range(1, len(verdicts) + 1)]
    score, _ = context_relevancy("پرسش", contexts, context_backend(verdicts))
    assert score == sum(verdicts) / len(verdicts)
    assert 0.0 <= score <= 1.0


# --- evaluate_dataset ---


def full_backend():
    return scripted(
        ScriptEntry(tag="extract_statements", pattern="*", response="1. گزاره 1\n2. گزاره 2"),
        ScriptEntry(tag="verify_support", pattern="گزاره 1", response="yes"),
        ScriptEntry(tag="verify_support", pattern="گزاره 2", response="no"),
        ScriptEntry(tag="gen_questions", pattern="*", response="1. ب1\n2. ب2\n3. ب3"),
        ScriptEntry(tag="judge_context", pattern="*", response="yes"),
    )


def full_embedder():
    return TableEmbeddingBackend(
        {
            "پرسش 1؟": [1.0, 0.0],
            "پرسش 2؟": [1.0, 0.0],
            "ب1": [1.0, 0.0],
            "ب2": [0.6, 0.8],
            "ب3": [0.0, 1.0],
        }
    )


def sample(i):
    return EvalSample(id=f"t{i}", question=f"پرسش {i}؟", answer=f"پاسخ {i}", contexts=["زمینه"])


def test_evaluate_dataset_mean_and_failures():
    config = EvalConfig(llm_backend=full_backend(), embed_backend=full_embedder(), parallelism=1)
    records, aggregates = evaluate_dataset([sample(1), sample(2)], config)
    assert aggregates.sample_count == 2
    assert aggregates.failure_count == 0
    assert aggregates.faithfulness == 0.5
    expected_ar = (1.0 + 0.6 + 0.0) / 3
    assert aggregates.answer_relevancy == pytest.approx(expected_ar, abs=1e-12)
    assert aggregates.context_relevancy == 1.0


def test_evaluate_dataset_failed_record_excluded():
    backend = full_backend()
    embedder = full_embedder()
    config = EvalConfig(llm_backend=backend, embed_backend=embedder, parallelism=1)
    bad = EvalSample(id="bad", question="پرسش 1؟", answer="", contexts=["زمینه"])
    records, aggregates = evaluate_dataset([sample(1), bad, sample(2)], config)
    assert aggregates.sample_count == 2
    assert aggregates.failure_count == 1
    failed = records[1]
    assert failed.failed and failed.stage == "faithfulness"
    assert failed.faithfulness is None


def test_failed_record_marks_stage_and_clears_scores():
    backend = scripted(
        ScriptEntry(tag="extract_statements", pattern="*", response="1. گ"),
        ScriptEntry(tag="verify_support", pattern="*", response="yes"),
        ScriptEntry(tag="gen_questions", pattern="*", response="فهرست نیست"),
    )
    config = EvalConfig(
        llm_backend=backend, embed_backend=MockEmbeddingBackend(dimension=8), parallelism=1
    )
    record = evaluate_sample(sample(1), config)
    assert record.failed
    assert record.stage == "answer_relevancy"
    assert record.faithfulness is None and record.context_relevancy is None


def test_aggregate_two_records_mean():
    records = [
        EvalRecord(qa_id="a", faithfulness=1.0, answer_relevancy=0.5, context_relevancy=1.0),
        EvalRecord(qa_id="b", faithfulness=0.5, answer_relevancy=0.5, context_relevancy=0.0),
    ]
    aggregates = aggregate(records)
    assert aggregates.faithfulness == 0.75
    assert aggregates.context_relevancy == 0.5


def test_aggregate_clamps_negative_mean_with_counter():
    records = [
        EvalRecord(qa_id="a", faithfulness=1.0, answer_relevancy=-0.9, context_relevancy=1.0),
        EvalRecord(qa_id="b", faithfulness=1.0, answer_relevancy=0.1, context_relevancy=1.0),
    ]
    aggregates = aggregate(records)
    assert aggregates.answer_relevancy_raw == pytest.approx(-0.4)
    assert aggregates.answer_relevancy == 0.0
    assert aggregates.answer_relevancy_clamped
    assert aggregates.negative_answer_relevancy_count == 1


def test_permuting_records_changes_no_per_sample_score():
    config = EvalConfig(llm_backend=full_backend(), embed_backend=full_embedder(), parallelism=1)
    forward, _ = evaluate_dataset([sample(1), sample(2)], config)
    backward, _ = evaluate_dataset([sample(2), sample(1)], config)
    by_id_f = {r.qa_id: r.to_dict() for r in forward}
    by_id_b = {r.qa_id: r.to_dict() for r in backward}
    assert by_id_f == by_id_b


# --- the committed 30-sample scenario ---


def eval30_config(parallelism=1):
    scenario = FIXTURES / "eval30"
    backend = ScriptedLlmBackend.from_file(scenario / "script.jsonl")
    embedder = TableEmbeddingBackend(load_json(scenario / "vectors.json"))
    return EvalConfig(llm_backend=backend, embed_backend=embedder, parallelism=parallelism)


def eval30_samples():
    return [
        EvalSample(id=r["id"], question=r["question"], answer=r["answer"], contexts=r["contexts"])
        for r in load_jsonl(FIXTURES / "eval30" / "triples.jsonl")
    ]


def test_eval30_matches_committed_oracle():
    expected = load_json(FIXTURES / "eval30" / "expected.json")
    records, aggregates = evaluate_dataset(eval30_samples(), eval30_config())
    assert len(records) == 30
    for record, want in zip(records, expected["samples"]):
        assert record.qa_id == want["id"]
        assert not record.failed
        assert record.faithfulness == pytest.approx(want["faithfulness"], abs=1e-12)
        assert record.answer_relevancy == pytest.approx(want["answer_relevancy"], abs=1e-12)
        assert record.context_relevancy == pytest.approx(want["context_relevancy"], abs=1e-12)
    want_agg = expected["aggregates"]
    assert aggregates.sample_count == want_agg["sample_count"]
    assert aggregates.failure_count == want_agg["failure_count"]
    assert aggregates.faithfulness == pytest.approx(want_agg["faithfulness"], abs=1e-12)
    assert aggregates.answer_relevancy == pytest.approx(want_agg["answer_relevancy"], abs=1e-12)
    assert aggregates.answer_relevancy_raw == pytest.approx(
        want_agg["answer_relevancy_raw"], abs=1e-12
    )
    assert aggregates.context_relevancy == pytest.approx(want_agg["context_relevancy"], abs=1e-12)
    assert (
        aggregates.negative_answer_relevancy_count
        == want_agg["negative_answer_relevancy_count"]
    )
    assert aggregates.answer_relevancy_clamped == want_agg["answer_relevancy_clamped"]


def test_eval30_deterministic_and_parallel_equivalent():
    sequential, agg_seq = evaluate_dataset(eval30_samples(), eval30_config(parallelism=1))
    parallel, agg_par = evaluate_dataset(eval30_samples(), eval30_config(parallelism=4))
    assert [r.to_dict() for r in sequential] == [r.to_dict() for r in parallel]
    assert agg_seq.to_dict() == agg_par.to_dict()
