"""Acceptance suite: one test per release criterion, oracle- and property-based.

Each criterion prints an ACCEPTANCE PASS/FAIL line (visible with -s or in
captured output). Oracles are independent of the code paths they check:
numpy for percentile interpolation, brute-force enumeration for retrieval
semantics and scenario labels, hand-computed values for scoring.
"""

from __future__ import annotations

import json
import random
import subprocess
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from tmlpredict.corpus import MetricRecord, ModelFamilyMapping, ViewRole, reduce_corpus
from tmlpredict.evalharness import (
    build_score_report,
    breakdown,
    score_predset,
    verdict_for,
    Verdict,
)
from tmlpredict.evalharness.extraction import ExtractedMetric, ExtractedPrediction
from tmlpredict.kb import KbDocument, VectorStore, _cosine, retrieve
from tmlpredict.langsim import (
    TypologicalVector,
    close_threshold,
    cosine_distance,
    pairwise_distances,
)
from tmlpredict.metrics import GroundTruth, GroundTruthRef, MetricValue, normalize, render_normalized
from tmlpredict.orchestrator import (
    ConversationEngine,
    ExpertKnowledgeTool,
    FailingSearchProvider,
    MemoryConversationStore,
    OrchestratorConfig,
    OrchestratorError,
    ScriptedBackend,
    ScriptedQuirks,
    ToolSet,
)
from tmlpredict.kb import RetrievalCache
from tmlpredict.scenario import (
    Question,
    QueryType,
    Scenario,
    TmlQuery,
    build_blocks,
    classification_query,
    classify_query,
)

from .conftest import FIXTURES


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE FAIL: {name}")
        raise
    print(f"\nACCEPTANCE PASS: {name}")


def random_vector(rng: random.Random, dim: int, maskable: bool = True):
    values = []
    for _ in range(dim):
        if maskable and rng.random() < 0.15:
            values.append(None)
        else:
            values.append(rng.uniform(-1.0, 1.0))
    if all(v is None or v == 0 for v in values):
        values[0] = 1.0
    return values


def test_similarity_math():
    """Symmetry, scale invariance, range over 10k pairs; threshold vs oracle."""
    with criterion("similarity math (10,000 pairs + 100 threshold oracles, <10s)"):
        started = time.monotonic()
        rng = random.Random(20240817)
        checked = 0
        while checked < 10_000:
            dim = rng.randint(2, 10)
            u = TypologicalVector.from_raw("aaa", random_vector(rng, dim))
            v = TypologicalVector.from_raw("bbb", random_vector(rng, dim))
            try:
                d_uv = cosine_distance(u, v)
            except Exception:
                continue  # unscorable pair (empty intersection / zero vector)
            d_vu = cosine_distance(v, u)
            assert d_uv == d_vu, "symmetry must be exact"
            assert -1e-9 <= d_uv <= 2.0 + 1e-9, "range bound violated"
            c = rng.uniform(0.01, 100.0)
            scaled = TypologicalVector(
                language="aaa",
                features=tuple(c * x for x in u.features),
                present=u.present,
            )
            assert abs(cosine_distance(scaled, v) - d_uv) <= 1e-9, "scale invariance"
            checked += 1

        for trial in range(100):
            n = rng.randint(3, 18)
            vectors = [
                TypologicalVector.from_raw(f"l{i:03d}", random_vector(rng, 6))
                for i in range(n)
            ]
            got = close_threshold(vectors, 10.0)
            # independent oracle: brute-force pair enumeration + numpy percentile
            dists = list(pairwise_distances(vectors).values())
            expected = float(np.percentile(np.array(dists, dtype=float), 10.0,
                                           method="linear"))
            assert got == expected, f"trial {trial}: {got} != {expected}"

        elapsed = time.monotonic() - started
        assert elapsed < 10.0, f"similarity math took {elapsed:.1f}s"


def test_normalization():
    """The three documented examples exactly; idempotence over 1,000 values."""
    with criterion("metric normalization (3 exact examples + 1,000-value idempotence)"):
        assert normalize("pass@1", "0.85") == 85.0
        assert normalize("accuracy", "61.25%") == 61.25
        assert normalize("accuracy", "85.5") == 85.5

        rng = random.Random(99)
        for _ in range(1_000):
            value = rng.choice([
                rng.uniform(0.0, 100.0),
                rng.uniform(0.0, 1.0),          # sub-1 normalized outputs
                float(rng.randint(0, 100)),
            ])
            once = normalize("accuracy", render_normalized(value))
            assert once == value
            twice = normalize("accuracy", render_normalized(once))
            assert twice == once
            if once == 0.0 or once > 1.0:
                assert normalize("accuracy", repr(once)) == once


HAND_LABELS = [
    ("machine_translation", "eng", "GammaMT", Scenario.S1),
    ("machine_translation", "eng", "Alpha-7B", Scenario.S2),
    ("machine_translation", "deu", "EpsilonNet", Scenario.S2),
    ("machine_translation", "nld", "GammaMT", Scenario.S3),
    ("machine_translation", "nld", "DeltaLM", Scenario.S3),
    ("machine_translation", "spa", "GammaMT", Scenario.S4),
    ("machine_translation", "jpn", "GammaMT", Scenario.S4),
    ("machine_translation", "swa", "DeltaLM", Scenario.S4),
    ("machine_translation", "npi", "EpsilonNet", Scenario.S5),
    ("machine_translation", "jpn", "EpsilonNet", Scenario.S5),
    ("code_generation", "eng", "BetaCoder", Scenario.S1),
    ("code_generation", "eng", "Alpha-7B", Scenario.S1),
    ("code_generation", "deu", "BetaCoder", Scenario.S1),
    ("code_generation", "deu", "Alpha-7B", Scenario.S2),
    ("code_generation", "deu", "ZetaCoder", Scenario.S2),
    ("code_generation", "nld", "BetaCoder", Scenario.S3),
    ("code_generation", "nld", "Alpha-7B", Scenario.S3),
    ("code_generation", "npi", "BetaCoder", Scenario.S4),
    ("code_generation", "swa", "Alpha-7B", Scenario.S4),
    ("code_generation", "jpn", "EpsilonNet", Scenario.S5),
    ("classification_nli", "eng", "Alpha-7B", Scenario.S1),
    ("classification_nli", "deu", "DeltaLM", Scenario.S2),
    ("classification_nli", "nld", "Alpha-7B", Scenario.S3),
    ("classification_nli", "jpn", "Alpha-7B", Scenario.S4),
    ("classification_nli", "npi", "EpsilonNet", Scenario.S5),
]


def test_scenario_engine(corpus, reduced_view, split, runtime):
    """25 hand labels at 100%; closure over >= 500 generated questions."""
    with criterion("scenario engine (25/25 hand labels + 750-question closure)"):
        for task, lang, fam, expected in HAND_LABELS:
            probe = TmlQuery(
                task=task, query_type=QueryType.NUMERIC_PREDICTION,
                model_family=fam, language=lang,
            )
            got = classify_query(probe, reduced_view, split)
            assert got is expected, f"({task},{lang},{fam}): {got} != {expected}"

        generated = 0
        for task in corpus.tasks():
            for scenario in Scenario:
                block = build_blocks(
                    task, scenario, corpus, split, registry=runtime.registry,
                    aliases=runtime.aliases, n_numeric=25, n_comparative=25, seed=0,
                )
                assert len(block.questions) == 50
                for item in block.questions:
                    probe = classification_query(item, corpus, runtime.registry)
                    assert classify_query(probe, reduced_view, split) is scenario
                generated += len(block.questions)
        assert generated >= 500
        assert generated == 750


def test_corpus_guard():
    """No ReducedOnly lookup ever returns a removed-paper record (1,000 trials)."""
    with criterion("corpus access guard (1,000 randomized removal trials)"):
        rng = random.Random(7331)
        languages = ["aaa", "bbb", "ccc", "ddd", "eee"]
        families = ["F1", "F2", "F3"]
        papers = [f"P{i}" for i in range(1, 7)]
        for _ in range(1_000):
            entries = {}
            for lang in rng.sample(languages, rng.randint(1, len(languages))):
                fams = {}
                for fam in rng.sample(families, rng.randint(1, len(families))):
                    fams[fam] = tuple(
                        MetricRecord("bleu", rng.uniform(1.5, 95.0), rng.choice(papers))
                        for _ in range(rng.randint(1, 3))
                    )
                entries[lang] = fams
            mapping = ModelFamilyMapping(task="machine_translation", entries=entries)
            present = sorted(mapping.paper_ids())
            removed = set(rng.sample(present, rng.randint(0, len(present))))
            corpus = reduce_corpus(
                {mapping.task: mapping}, removed, require_instantiable=False
            )
            reduced = corpus.view(ViewRole.REDUCED_ONLY)
            combined = corpus.view(ViewRole.COMBINED)
            for lang, fams in mapping.entries.items():
                for fam in fams:
                    reduced_records = reduced.lookup(mapping.task, lang, fam)
                    for record in reduced_records:
                        assert record.paper_id not in removed
                    assert set(reduced_records) <= set(
                        combined.lookup(mapping.task, lang, fam)
                    )


def test_retrieval_semantics():
    """Threshold/top-k agree exactly with a brute-force oracle on 1,000 stores."""
    with criterion("kb retrieval (1,000-store brute-force oracle + monotonicity)"):
        rng = random.Random(424242)
        for trial in range(1_000):
            dim = rng.randint(2, 6)
            n_docs = rng.randint(0, 15)
            docs = []
            for i in range(n_docs):
                embedding = [rng.uniform(-1, 1) for _ in range(dim)]
                if all(x == 0 for x in embedding):
                    embedding[0] = 1.0
                docs.append(KbDocument(
                    doc_id=f"d{i:03d}", text=f"doc {i}",
                    embedding=tuple(embedding),
                    citation={"paper_id": "P", "locator": str(i)},
                ))
            store = VectorStore(dim=dim, documents=tuple(docs), version=f"v{trial}")
            query = [rng.uniform(-1, 1) for _ in range(dim)]
            if all(x == 0 for x in query):
                query[0] = 1.0
            threshold = rng.choice([0.0, 0.3, 0.6, 0.9, 0.95])
            k = rng.randint(1, 4)

            got = [(r.document.doc_id, r.similarity)
                   for r in retrieve(query, store, threshold=threshold, k=k)]

            # brute-force oracle over every document, shared similarity kernel
            scored = sorted(
                (
                    (-_cosine(query, doc.embedding), doc.doc_id)
                    for doc in docs
                ),
            )
            expected = [
                (doc_id, -neg_sim)
                for neg_sim, doc_id in scored
                if -neg_sim >= threshold
            ][:k]
            assert got == expected, f"trial {trial}"

            # numpy similarity sanity for the same pairs
            for doc in docs:
                np_sim = float(
                    np.dot(query, doc.embedding)
                    / (np.linalg.norm(query) * np.linalg.norm(doc.embedding))
                )
                assert abs(_cosine(query, doc.embedding) - np_sim) < 1e-9

            tighter = [(r.document.doc_id, r.similarity)
                       for r in retrieve(query, store, threshold=min(threshold + 0.2, 1.0), k=k)]
            assert set(tighter) <= set(got) or len(got) == k
            k1 = retrieve(query, store, threshold=threshold, k=1)
            assert [(r.document.doc_id, r.similarity) for r in k1] == got[:1]


ALLOWED_TRANSITIONS = {("active", "completed"), ("active", "discarded")}


def _validate_event_log(events, max_nodes: int) -> None:
    states: dict[str, str] = {}
    seqs = [e.seq for e in events]
    assert seqs == list(range(1, len(seqs) + 1)), "seq numbers must be contiguous"
    for event in events:
        payload = event.payload
        if event.type == "thought_created":
            node_id = payload["node_id"]
            assert node_id not in states, "node ids must be unique"
            states[node_id] = "active"
            assert len(states) <= max_nodes, "node budget exceeded"
        elif event.type == "state_changed":
            node_id = payload["node_id"]
            transition = (states[node_id], payload["to"])
            assert transition in ALLOWED_TRANSITIONS, f"forbidden {transition}"
            states[node_id] = payload["to"]
        elif event.type == "aggregated":
            active = [n for n, s in states.items() if s == "active"]
            assert not active, f"aggregated with active nodes: {active}"


def test_dag_state_machine(runtime):
    """500 randomized scripted runs: legal transitions, gating, budgets, replay."""
    with criterion("DAG state machine (500 randomized runs + byte-identical logs)"):
        combined = runtime.corpus.view(ViewRole.COMBINED)
        combos = [
            (task, lang, fam)
            for task in runtime.corpus.tasks()
            for lang in combined.languages(task)
            for fam in combined.families_for_language(task, lang)
        ]

        def run_once(seed: int) -> list:
            rng = random.Random(seed)
            task, lang, fam = rng.choice(combos)
            query_type = rng.choice(list(QueryType))
            query = TmlQuery(
                task=task, query_type=query_type,
                text=f"expected result for {fam} on {task} in {lang}",
                model_family=fam if query_type is QueryType.NUMERIC_PREDICTION else None,
                language=lang,
            )
            max_nodes = rng.choice([4, 6, 12])
            config = OrchestratorConfig(
                max_thoughts=rng.choice([2, 3, 5]),
                max_nodes=max_nodes,
                max_rounds=rng.choice([2, 3, 4]),
                tool_retry=1,
                parallelism=rng.choice([1, 2]),
                kb_threshold=0.5,
                seed=seed,
            )
            search = FailingSearchProvider(
                inner=runtime.search_provider,
                fail_times=rng.choice([0, 0, 1, 2, -1]),
            )
            store = MemoryConversationStore()
            engine = ConversationEngine(
                backend=ScriptedBackend(seed=seed, quirks=ScriptedQuirks.from_seed(seed)),
                tools=ToolSet(
                    kb=ExpertKnowledgeTool(
                        reduced_view=runtime.corpus.view(ViewRole.REDUCED_ONLY),
                        store=runtime.kb_store,
                        embedder=runtime.embedder,
                        cache=RetrievalCache(),
                        threshold=0.5,
                    ),
                    search=search,
                ),
                config=config,
                store=store,
            )
            try:
                engine.start(query, conversation_id="c1")
            except OrchestratorError:
                pass  # a rejected decomposition is a legal outcome
            events = store.read("c1") if store.exists("c1") else []
            _validate_event_log(events, max_nodes)
            return events

        for seed in range(500):
            events = run_once(seed)
            if seed % 25 == 0:
                repeat = run_once(seed)
                first = "\n".join(e.to_line() for e in events)
                second = "\n".join(e.to_line() for e in repeat)
                assert first == second, f"seed {seed}: event logs differ across runs"


def _question(task, scenario, metric, fam="F"):
    return Question(
        complete_question=f"What score does {fam} achieve for {task} in aaa?",
        task=task, models=fam, languages="aaa",
        query_type=QueryType.NUMERIC_PREDICTION, scenario=scenario,
        ground_truth_ref=GroundTruthRef(task=task, language="aaa", family=fam),
    )


def test_scoring(runtime):
    """Hand-tallied MAE; judge verdict boundaries; breakdown consistency."""
    with criterion("scoring (hand-tallied MAE, verdict boundaries, consistency)"):
        questions = [
            _question("code_generation", Scenario.S1, "pass@1", "BetaCoder"),
            _question("code_generation", Scenario.S1, "pass@1", "BetaCoder"),
        ]
        predictions = [
            ExtractedPrediction(True, (ExtractedMetric("pass@1", "80", 80.0),)),
            ExtractedPrediction(True, (ExtractedMetric("pass@1", "60", 60.0),)),
        ]
        truths = [
            GroundTruth(ref=questions[0].ground_truth_ref,
                        answer_numeric=MetricValue("pass@1", "85", 85.0)),
            GroundTruth(ref=questions[1].ground_truth_ref,
                        answer_numeric=MetricValue("pass@1", "55", 55.0)),
        ]
        assert score_predset(questions, predictions, truths).mae == 5.0

        assert verdict_for(4.25) is Verdict.ACCEPT
        assert verdict_for(4.2499) is Verdict.MINOR_REVISION
        assert verdict_for(3.25) is Verdict.MINOR_REVISION
        assert verdict_for(3.2499) is Verdict.MAJOR_REVISION
        assert verdict_for(2.5) is Verdict.MAJOR_REVISION
        assert verdict_for(2.4999) is Verdict.REJECT

        rng = random.Random(555)
        tasks = [("code_generation", "pass@1"), ("classification_nli", "accuracy"),
                 ("machine_translation", "bleu")]
        for _ in range(50):
            questions, predictions, truths = [], [], []
            for _ in range(rng.randint(1, 60)):
                task, metric = rng.choice(tasks)
                questions.append(
                    _question(task, rng.choice(list(Scenario)), metric)
                )
                answered = rng.random() > 0.2
                predictions.append(
                    ExtractedPrediction(
                        True, (ExtractedMetric(metric, "x", rng.uniform(0, 100)),)
                    ) if answered else ExtractedPrediction(False)
                )
                truths.append(GroundTruth(
                    ref=questions[-1].ground_truth_ref,
                    answer_numeric=MetricValue(metric, "x", rng.uniform(0, 100)),
                ))
            report = build_score_report(questions, predictions, truths)
            tables = breakdown(report)
            cells = [c for c in tables["per_task"].values() if c["n_scored"]]
            if not cells:
                assert tables["overall"]["mae"] is None
                continue
            weighted = sum(c["mae"] * c["n_scored"] for c in cells) / sum(
                c["n_scored"] for c in cells
            )
            assert tables["overall"]["mae"] == pytest.approx(weighted, abs=1e-12)
            bounded = [r.abs_error for r in report.predset.records
                       if r.abs_error is not None]
            assert all(0.0 <= e <= 100.0 for e in bounded)


def _cli(*args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "tmlpredict.cli", *args],
        capture_output=True, text=True, cwd=cwd, timeout=300,
    )


def _digest_tree(root: Path) -> dict[str, bytes]:
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*")) if p.is_file()
    }


def test_end_to_end(tmp_path):
    """build-benchmark + run + evaluate, twice, <60s, byte-reproducible."""
    with criterion("end-to-end CLI (fixture corpus, scripted backends, <60s, "
                   "byte-reproducible)"):
        started = time.monotonic()
        outputs = []
        for attempt in ("first", "second"):
            out_dir = tmp_path / attempt
            base = json.loads((FIXTURES / "runconfig.json").read_text())
            base["out_dir"] = str(out_dir)
            for key in ("manifest", "typology", "backends", "kb_docs",
                        "search_fixture", "aliases"):
                base[key] = str((FIXTURES / Path(base[key]).name).resolve())
            config_path = tmp_path / f"config_{attempt}.json"
            config_path.write_text(json.dumps(base), encoding="utf-8")

            result = _cli("build-benchmark", "--config", str(config_path),
                          "--no-verify", cwd=tmp_path)
            assert result.returncode == 0, result.stderr
            result = _cli("run", "--config", str(config_path),
                          "--questions", str(out_dir / "benchmark"),
                          "--run-id", "accept", cwd=tmp_path)
            assert result.returncode == 0, result.stderr
            result = _cli("evaluate", "--config", str(config_path),
                          "--run-id", "accept", cwd=tmp_path)
            assert result.returncode == 0, result.stderr
            outputs.append(out_dir)

        elapsed = time.monotonic() - started
        assert elapsed < 60.0, f"end-to-end took {elapsed:.1f}s"

        first = _digest_tree(outputs[0])
        second = _digest_tree(outputs[1])
        assert first.keys() == second.keys()
        for name in first:
            assert first[name] == second[name], f"{name} differs between runs"

        summary = json.loads(
            (outputs[0] / "runs" / "accept" / "summary.json").read_text()
        )
        assert summary["breakdown"]["overall"]["n_questions"] == 750
        assert summary["mae_overall"] is not None
        assert summary["accuracy_overall"] is not None
