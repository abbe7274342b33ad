#!/usr/bin/env python3
"""Regenerate the committed fixtures deterministically.

Intentionally does not import the uqrag package: expected metric values are
computed here with plain arithmetic so they stay independent of the code they
later verify.  Run from the repository root:

    python3 scripts/make_fixtures.py
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

COMPUTER = "computer-engineering"
PHYSICS = "physics"

COMPUTER_TOPICS = [
    "ثبت‌نام دروس",
    "آزمایشگاه شبکه",
    "پروژه پایانی",
    "کارآموزی تابستانی",
    "سرویس ایمیل دانشجویی",
    "انتخاب واحد ترم جدید",
    "درس هوش مصنوعی",
    "آزمون جامع دکتری",
    "ساعات ملاقات اساتید",
    "کتابخانه دیجیتال",
    "کلاس‌های جبرانی",
    "وام شهریه",
]

PHYSICS_TOPICS = [
    "آزمایشگاه اپتیک",
    "درس مکانیک کوانتومی",
    "رصدخانه دانشگاه",
    "سمینار هفتگی فیزیک",
    "آزمون میان‌ترم فیزیک پایه",
    "کارگاه لیزر",
    "دفتر گروه فیزیک",
    "المپیاد فیزیک دانشجویی",
    "درس ترمودینامیک",
    "آزمایشگاه حالت جامد",
    "اتاق اساتید فیزیک",
    "انجمن علمی فیزیک",
]

DEPT_FA = {COMPUTER: "دانشکده مهندسی کامپیوتر", PHYSICS: "دانشکده فیزیک"}


def write_jsonl(path, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def make_toy_corpus():
    docs = []
    for dept, topics in ((COMPUTER, COMPUTER_TOPICS), (PHYSICS, PHYSICS_TOPICS)):
        prefix = "ce" if dept == COMPUTER else "ph"
        for i, topic in enumerate(topics, start=1):
            paragraphs = [
                f"{topic} یکی از بخش‌های مهم {DEPT_FA[dept]} دانشگاه اصفهان است و "
                "اطلاعات آن در ابتدای هر نیم‌سال تحصیلی به‌روزرسانی می‌شود.",
                f"برای استفاده از {topic} دانشجویان باید ابتدا در سامانه گلستان درخواست "
                "خود را ثبت کنند و سپس منتظر تایید کارشناس آموزش دانشکده بمانند.",
                f"پرسش‌های متداول درباره {topic} از طریق سامانه پشتیبانی دانشکده پاسخ داده "
                "می‌شود و مهلت‌های مهم در تقویم آموزشی اعلام می‌گردد.",
            ]
            docs.append(
                {
                    "id": f"{prefix}{i:02d}",
                    "department": dept,
                    "title": topic,
                    "text": "\n\n".join(paragraphs),
                    "source_url": f"https://ui.ac.ir/{prefix}/{i:02d}",
                    "lang": "fa",
                }
            )
    write_jsonl(FIXTURES / "toy_corpus.jsonl", docs)
    return docs


QUESTION_FORMS = [
    "شرایط {topic} چیست؟",
    "برای {topic} به کجا مراجعه کنیم؟",
    "مهلت {topic} چه زمانی است؟",
]

EXTRA_QUESTIONS = [
    ("آیا {0} نیاز به تایید استاد دارد؟".format("ثبت‌نام دروس"), COMPUTER),
    ("هزینه استفاده از {0} چقدر است؟".format("کتابخانه دیجیتال"), COMPUTER),
    ("ظرفیت {0} چند نفر است؟".format("کارآموزی تابستانی"), COMPUTER),
    ("برنامه {0} کجا اعلام می‌شود؟".format("سمینار هفتگی فیزیک"), PHYSICS),
    ("تجهیزات {0} شامل چه مواردی است؟".format("کارگاه لیزر"), PHYSICS),
    ("عضویت در {0} چگونه است؟".format("انجمن علمی فیزیک"), PHYSICS),
]


def make_qa30():
    rng = random.Random(1402)
    records = []
    qa_meta = []  # (id, question, department) for the bench script
    pairs = [(t, COMPUTER) for t in COMPUTER_TOPICS] + [(t, PHYSICS) for t in PHYSICS_TOPICS]
    for i, (topic, dept) in enumerate(pairs, start=1):
        question = QUESTION_FORMS[i % len(QUESTION_FORMS)].format(topic=topic)
        records.append(
            {
                "id": f"q{i:02d}",
                "question": question,
                "reference_answer": f"پاسخ مرجع درباره {topic}.",
                "department": dept,
                "origin": "student" if rng.random() < 0.7 else "generated",
                "validated": True,
            }
        )
        qa_meta.append((f"q{i:02d}", question, dept))
    for j, (question, dept) in enumerate(EXTRA_QUESTIONS, start=25):
        records.append(
            {
                "id": f"q{j:02d}",
                "question": question,
                "reference_answer": "پاسخ مرجع تکمیلی.",
                "department": dept,
                "origin": "student",
                "validated": True,
            }
        )
        qa_meta.append((f"q{j:02d}", question, dept))
    # generated-origin records are not validated and carry no reference answer
    for record in records:
        if record["origin"] == "generated":
            record["validated"] = False
            record["reference_answer"] = None
    write_jsonl(FIXTURES / "qa30.jsonl", records)
    return qa_meta


def make_bench_script(qa_meta):
    rng = random.Random(88)
    entries = []
    for qa_id, question, dept in qa_meta:
        answer = (
            f"بر اساس اسناد بازیابی‌شده، {question[:-1]} در تقویم آموزشی دانشکده مشخص شده است. "
            f"(شناسه پاسخ {qa_id})"
        )
        entries.append({"tag": "route", "pattern": question, "response": dept})
        entries.append(
            {"tag": "generate", "pattern": question, "response": answer, "latency_ms": 20}
        )
        n_statements = rng.randint(2, 3)
        statements = [
            f"گزاره {qa_id}-{j}: بخش {j} پاسخ درباره موضوع پرسش است." for j in range(1, n_statements + 1)
        ]
        entries.append(
            {
                "tag": "extract_statements",
                "pattern": f"شناسه پاسخ {qa_id}",
                "response": "\n".join(f"{j}. {s}" for j, s in enumerate(statements, start=1)),
            }
        )
        for statement in statements:
            verdict = "yes" if rng.random() < 0.75 else "no"
            entries.append(
                {"tag": "verify_support", "pattern": statement.split(":")[0], "response": verdict}
            )
        regen = [f"بازپرسش {qa_id}-{j}" for j in range(1, 4)]
        entries.append(
            {
                "tag": "gen_questions",
                "pattern": f"شناسه پاسخ {qa_id}",
                "response": "\n".join(f"{j}. {q}" for j, q in enumerate(regen, start=1)),
            }
        )
    # per-chunk relevance verdicts: a few topics are always judged useless,
    # everything else useful
    for useless in ("رصدخانه دانشگاه", "وام شهریه", "کارگاه لیزر"):
        entries.append({"tag": "judge_context", "pattern": useless, "response": "no"})
    entries.append({"tag": "judge_context", "pattern": "*", "response": "yes"})
    # catch-alls keep unknown questions answerable (e.g. ad-hoc CLI runs)
    entries.append({"tag": "route", "pattern": "*", "response": "general"})
    entries.append(
        {"tag": "generate", "pattern": "*", "response": "پاسخ در اسناد موجود نیست."}
    )
    entries.append({"tag": "extract_statements", "pattern": "*", "response": "1. گزاره عمومی."})
    entries.append({"tag": "verify_support", "pattern": "*", "response": "no"})
    entries.append(
        {"tag": "gen_questions", "pattern": "*", "response": "1. پرسش الف؟\n2. پرسش ب؟\n3. پرسش پ؟"}
    )
    write_jsonl(FIXTURES / "script.jsonl", entries)


def make_configs():
    pipeline_toml = """version = 1

index_path = "toy.uqix"

[pipeline]
k = 3
empty_context = "error"

[taxonomy]
labels = ["computer-engineering", "physics", "general"]
fallback = "general"

[split]
delimiter = "blank_line"
min_chars = 50
max_chars = 2000
overflow = "hard_split"

[llm]
kind = "scripted"
script = "script.jsonl"

[embedding]
kind = "mock"
model_id = "mock-embedder"
dimension = 32
seed = 7
max_batch = 16

[eval]
m = 3

[service]
cors_origins = ["*"]
"""
    (FIXTURES / "pipeline.toml").write_text(pipeline_toml, encoding="utf-8")

    bench_toml = """version = 1

dataset = "qa30.jsonl"
corpus = "toy_corpus.jsonl"
formats = ["markdown", "csv", "json"]
cache_dir = ".bench-cache"

[taxonomy]
labels = ["computer-engineering", "physics", "general"]
fallback = "general"

[split]
delimiter = "blank_line"
min_chars = 50
max_chars = 2000
overflow = "hard_split"

[eval]
m = 3

[[configs]]
name = "scripted-mock32"
model_label = "Scripted LLM"
embedding_label = "Mock 32d"
k = 3

[configs.llm]
kind = "scripted"
script = "script.jsonl"

[configs.embedding]
kind = "mock"
model_id = "mock-embedder"
dimension = 32
seed = 7

[[configs]]
name = "scripted-mock64"
model_label = "Scripted LLM"
embedding_label = "Mock 64d"
k = 3

[configs.llm]
kind = "scripted"
script = "script.jsonl"

[configs.embedding]
kind = "mock"
model_id = "mock-embedder-64"
dimension = 64
seed = 11
"""
    (FIXTURES / "bench.toml").write_text(bench_toml, encoding="utf-8")


# 2-D unit vectors with exactly representable coordinates; similarity against
# the reference direction e0 is simply the first coordinate.
VECTOR_CATALOG = {
    "e0": [1.0, 0.0],
    "e1": [0.0, 1.0],
    "c06": [0.6, 0.8],
    "c08": [0.8, 0.6],
    "c028": [0.28, 0.96],
    "c096": [0.96, 0.28],
    "n06": [-0.6, 0.8],
    "neg": [-1.0, 0.0],
}


def make_eval30():
    rng = random.Random(20240810)
    catalog_names = ["e1", "c06", "c08", "c028", "c096"]
    triples = []
    script = []
    vectors = {}
    expected_samples = []

    for i in range(1, 31):
        sid = f"s{i:02d}"
        question = f"پرسش نمونه {sid}: شرایط موضوع {i} چیست؟"
        answer = f"پاسخ نمونه {sid}: موضوع {i} طبق مقررات دانشگاه انجام می‌شود."
        n_contexts = rng.randint(1, 4)
        contexts = [
            f"زمینه {sid}-{j}: متن بازیابی‌شده شماره {j} درباره موضوع {i}."
            for j in range(1, n_contexts + 1)
        ]
        triples.append({"id": sid, "question": question, "answer": answer, "contexts": contexts})

        # faithfulness: statements and their support verdicts
        n_statements = rng.randint(1, 5)
        statements = [f"گزاره {sid}-{j}: جزئیات شماره {j}." for j in range(1, n_statements + 1)]
        script.append(
            {
                "tag": "extract_statements",
                "pattern": f"پاسخ نمونه {sid}",
                "response": "\n".join(f"{j}. {s}" for j, s in enumerate(statements, start=1)),
            }
        )
        support = [rng.random() < 0.7 for _ in statements]
        for statement, verdict in zip(statements, support):
            script.append(
                {
                    "tag": "verify_support",
                    "pattern": statement.split(":")[0],
                    "response": "yes" if verdict else "no",
                }
            )
        faith = sum(support) / n_statements

        # answer relevancy: the question embeds to e0, regenerated questions
        # to catalog vectors, so each similarity is that vector's first
        # coordinate
        if i == 17:
            picks = ["neg", "n06", "e1"]  # deliberately negative mean
        else:
            picks = [rng.choice(catalog_names) for _ in range(3)]
        regenerated = [f"بازپرسش {sid}-{j}" for j in range(1, 4)]
        script.append(
            {
                "tag": "gen_questions",
                "pattern": f"پاسخ نمونه {sid}",
                "response": "\n".join(f"{j}. {q}" for j, q in enumerate(regenerated, start=1)),
            }
        )
        vectors[question] = VECTOR_CATALOG["e0"]
        sims = []
        for regen_text, pick in zip(regenerated, picks):
            vectors[regen_text] = VECTOR_CATALOG[pick]
            sims.append(VECTOR_CATALOG[pick][0])
        answer_rel = sum(sims) / 3

        # context relevancy: one binary verdict per retrieved chunk
        ctx_verdicts = [rng.random() < 0.6 for _ in contexts]
        for context, verdict in zip(contexts, ctx_verdicts):
            script.append(
                {
                    "tag": "judge_context",
                    "pattern": context.split(":")[0],
                    "response": "yes" if verdict else "no",
                }
            )
        ctx_rel = sum(ctx_verdicts) / n_contexts

        expected_samples.append(
            {
                "id": sid,
                "faithfulness": faith,
                "answer_relevancy": answer_rel,
                "context_relevancy": ctx_rel,
            }
        )

    n = len(expected_samples)
    faith_mean = sum(s["faithfulness"] for s in expected_samples) / n
    ar_raw_mean = sum(s["answer_relevancy"] for s in expected_samples) / n
    ctx_mean = sum(s["context_relevancy"] for s in expected_samples) / n
    expected = {
        "samples": expected_samples,
        "aggregates": {
            "sample_count": n,
            "failure_count": 0,
            "faithfulness": faith_mean,
            "answer_relevancy": max(0.0, ar_raw_mean),
            "answer_relevancy_raw": ar_raw_mean,
            "context_relevancy": ctx_mean,
            "negative_answer_relevancy_count": sum(
                1 for s in expected_samples if s["answer_relevancy"] < 0.0
            ),
            "answer_relevancy_clamped": ar_raw_mean < 0.0,
        },
    }

    out = FIXTURES / "eval30"
    write_jsonl(out / "triples.jsonl", triples)
    write_jsonl(out / "script.jsonl", script)
    (out / "vectors.json").write_text(
        json.dumps(vectors, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    (out / "expected.json").write_text(
        json.dumps(expected, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def make_table1():
    # Published UQB reference results, shipped only as a rendering fixture.
    # They were produced with external hosted models over the private corpus
    # and are NOT reproduced by this artifact.
    rows = [
        ("GPT 4o", "OpenAI Embeddings", 0.6333, 0.6395, 0.1154),
        ("GPT 3.5-turbo", "OpenAI Embeddings", 0.8497, 0.5604, 0.1849),
        ("GPT 3.5-turbo", "Persin-Sentence-Embedding-V3", 0.8113, 0.493, 0.223),
        ("GPT 4o", "Persin-Sentence-Embedding-V3", 0.6578, 0.6564, 0.1848),
        ("Dorna (Persian version of Llama3)", "Dorna Embeddings", 0.839, 0.823, 0.216),
    ]
    payload = {
        "rows": [
            {
                "config_name": f"reference-{i}",
                "model_label": model,
                "embedding_label": embedding,
                "faithfulness": faith,
                "answer_relevancy": ans,
                "context_relevancy": ctx,
                "sample_count": 300,
                "failure_count": 0,
            }
            for i, (model, embedding, faith, ans, ctx) in enumerate(rows, start=1)
        ],
        "metadata": {
            "artifact_version": "fixture",
            "note": (
                "Published UQB reference results rendered for formatting tests only; "
                "produced with external hosted backends and a private corpus, "
                "not reproduced by this artifact."
            ),
        },
    }
    (FIXTURES / "table1.json").write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def make_golden_prompt():
    # Composed by hand from the default template pieces; reviewed, then frozen.
    question = "شرایط مهمانی دانشجویان چیست؟"
    contexts = [
        "متن اول درباره مهمانی دانشجویان در نیم‌سال تابستان.",
        "متن دوم درباره ثبت‌نام و مدارک لازم.",
        "متن سوم درباره مهلت ارسال درخواست.",
    ]
    golden = (
        "پرسش:\n"
        + question
        + "\n\nمتن‌های بازیابی‌شده:\n"
        + "\n---\n".join(contexts)
        + "\n\nپاسخ را کوتاه و دقیق بنویس."
    )
    (FIXTURES / "golden_prompt.txt").write_text(golden, encoding="utf-8")


def main():
    FIXTURES.mkdir(exist_ok=True)
    make_toy_corpus()
    qa_meta = make_qa30()
    make_bench_script(qa_meta)
    make_configs()
    make_eval30()
    make_table1()
    make_golden_prompt()
    print(f"fixtures written under {FIXTURES}")


if __name__ == "__main__":
    main()
