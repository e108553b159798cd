"""End-to-end pipeline: build runtime resources, run benchmarks, evaluate.

The runtime bundles everything a conversation needs (corpus views, the
similarity split, the knowledge base, backends, budgets) resolved from one
RunConfig, so the CLI and the HTTP service construct it the same way.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .config import RunConfig
from .corpus import EvidenceCorpus, ViewRole, load_corpus
from .evalharness import (
    build_score_report,
    extract_prediction,
    judge_report,
    run_diagnostics,
    write_report,
)
from .evalharness.extraction import ExtractedPrediction, ExtractionError
from .kb import HashEmbedder, RetrievalCache, VectorStore, ingest_documents, load_kb_file
from .langsim import SimilaritySplit, TypologyTable, build_split, load_typology
from .metrics import MetricRegistry, default_registry, ground_truth
from .orchestrator import (
    ConversationEngine,
    ExpertKnowledgeTool,
    FixtureSearchProvider,
    ToolSet,
    build_backend,
)
from .orchestrator.store import FileConversationStore, canonical_dumps
from .scenario import (
    Aliases,
    Question,
    QueryType,
    Scenario,
    build_blocks,
    classification_query,
    read_questions,
    write_questions,
)


class PipelineError(RuntimeError):
    pass


@dataclass
class Runtime:
    config: RunConfig
    corpus: EvidenceCorpus
    typology: TypologyTable
    split: SimilaritySplit
    registry: MetricRegistry
    aliases: Aliases
    kb_store: VectorStore | None
    embedder: HashEmbedder
    backend: object
    search_provider: FixtureSearchProvider | None

    def engine(self, store=None) -> ConversationEngine:
        tools = ToolSet(
            kb=ExpertKnowledgeTool(
                reduced_view=self.corpus.view(ViewRole.REDUCED_ONLY),
                store=self.kb_store,
                embedder=self.embedder,
                cache=RetrievalCache(),
                threshold=self.config.kb_threshold,
                top_k=self.config.kb_top_k,
            ),
            search=self.search_provider,
        )
        return ConversationEngine(
            backend=self.backend,
            tools=tools,
            config=self.config.orchestrator(),
            store=store,
            registry=self.registry,
        )


def build_runtime(config: RunConfig) -> Runtime:
    config.validate_paths()
    typology = load_typology(config.typology)
    split = build_split(list(typology.vectors.values()))
    corpus = load_corpus(config.manifest, is_close=split.is_close_or_none)
    registry = (
        MetricRegistry.load(config.registry) if config.registry else default_registry()
    )
    aliases = Aliases.load(config.aliases) if config.aliases else Aliases()
    embedder = HashEmbedder()
    kb_store = None
    if config.kb_docs:
        kb_store = ingest_documents(load_kb_file(config.kb_docs), embedder)
    search_provider = None
    if config.search_fixture:
        search_provider = FixtureSearchProvider(
            json.loads(Path(config.search_fixture).read_text(encoding="utf-8"))
        )
    backend_config = {"default": {"type": "scripted", "seed": config.seed}}
    if config.backends:
        backend_config = json.loads(Path(config.backends).read_text(encoding="utf-8"))
    backend = build_backend(backend_config)
    return Runtime(
        config=config,
        corpus=corpus,
        typology=typology,
        split=split,
        registry=registry,
        aliases=aliases,
        kb_store=kb_store,
        embedder=embedder,
        backend=backend,
        search_provider=search_provider,
    )


def build_benchmark(
    runtime: Runtime,
    out_dir: str | Path,
    tasks: list[str] | None = None,
    scenarios: list[Scenario] | None = None,
    n_numeric: int = 25,
    n_comparative: int = 25,
) -> list[Path]:
    """Emit one question file per instantiable (task, scenario) block."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = tasks or runtime.corpus.tasks()
    scenarios = scenarios or list(Scenario)
    written = []
    for task in tasks:
        for scenario in scenarios:
            try:
                block = build_blocks(
                    task,
                    scenario,
                    runtime.corpus,
                    runtime.split,
                    registry=runtime.registry,
                    aliases=runtime.aliases,
                    n_numeric=n_numeric,
                    n_comparative=n_comparative,
                    seed=runtime.config.seed,
                )
            except Exception:
                continue  # scenario not instantiable for this task
            path = out_dir / f"{block.task}__{scenario.value}.jsonl"
            write_questions(path, block)
            written.append(path)
    if not written:
        raise PipelineError("no (task, scenario) block was instantiable")
    return written


def _load_question_files(questions: str | Path) -> list[Question]:
    path = Path(questions)
    if path.is_dir():
        out: list[Question] = []
        for file in sorted(path.glob("*.jsonl")):
            out.extend(read_questions(file))
        return out
    return read_questions(path)


def run_benchmark(
    runtime: Runtime, questions: str | Path, run_dir: str | Path
) -> Path:
    """Run a conversation per question; write event logs and results.jsonl.

    Everything written here is deterministic for a fixed config and seed:
    conversation ids are positional, serialization is canonical, and the
    event logs carry no timestamps.
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    store = FileConversationStore(run_dir / "conversations")
    engine = runtime.engine(store=store)
    items = _load_question_files(questions)
    results_path = run_dir / "results.jsonl"
    with results_path.open("w", encoding="utf-8") as fh:
        for index, question in enumerate(items):
            conversation_id = f"q{index:04d}"
            query = question.to_query()
            dag = engine.start(query, conversation_id=conversation_id)
            final = dag.final_response
            report_text = final.as_report_text(query.text) if final else ""
            try:
                extraction = extract_prediction(
                    report_text, question.query_type, runtime.backend, query.text
                )
            except ExtractionError:
                extraction = ExtractedPrediction(is_answer_present=False)
            record = {
                "conversation_id": conversation_id,
                "question": question.to_dict(),
                "report": report_text,
                "final_response": final.to_dict() if final else None,
                "extraction": extraction.to_dict(),
            }
            fh.write(canonical_dumps(record) + "\n")
    return results_path


def evaluate_run(
    runtime: Runtime,
    run_dir: str | Path,
    judge: bool = True,
    diagnostics: bool = True,
    thresholds: dict | None = None,
) -> dict:
    """Score a run directory against combined-corpus ground truth.

    Returns the summary dict; with thresholds, adds a "thresholds_ok" flag
    ({"max_mae": x} and/or {"min_accuracy": y}).
    """
    run_dir = Path(run_dir)
    results_path = run_dir / "results.jsonl"
    if not results_path.exists():
        raise PipelineError(f"no results file at {results_path}")
    questions: list[Question] = []
    extractions: list[ExtractedPrediction] = []
    reports: list[str] = []
    for line in results_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        questions.append(Question.from_dict(record["question"]))
        extractions.append(ExtractedPrediction.from_dict(record["extraction"]))
        reports.append(record.get("report", ""))

    combined = runtime.corpus.view(ViewRole.COMBINED)
    truths = [
        ground_truth(q.ground_truth_ref, combined, runtime.registry)
        for q in questions
    ]
    score_report = build_score_report(
        questions, extractions, truths, runtime.registry,
        aliases=runtime.aliases.model_families,
    )
    extras: dict = {}
    if judge and reports:
        scored = []
        for text in reports:
            if not text:
                continue
            try:
                scored.append(judge_report(text, runtime.backend))
            except Exception:
                continue
        if scored:
            extras["judge"] = {
                "n_reports": len(scored),
                "average": round(sum(s.average for s in scored) / len(scored), 3),
                "verdicts": _verdict_counts(scored),
            }
    if diagnostics:
        store = FileConversationStore(run_dir / "conversations")
        logs = [(cid, store.read(cid)) for cid in store.ids()]
        extras["diagnostics"] = run_diagnostics(logs, runtime.backend).to_dict()

    summary_ok = True
    if thresholds:
        mae = score_report.predset.mae
        accuracy = score_report.qnaset.accuracy
        if "max_mae" in thresholds and mae is not None and mae > thresholds["max_mae"]:
            summary_ok = False
        if (
            "min_accuracy" in thresholds
            and accuracy is not None
            and accuracy < thresholds["min_accuracy"]
        ):
            summary_ok = False
        extras["thresholds_ok"] = summary_ok

    write_report(score_report, run_dir, extras=extras)
    summary = json.loads((run_dir / "summary.json").read_text(encoding="utf-8"))
    return summary


def _verdict_counts(scored) -> dict[str, int]:
    counts: dict[str, int] = {}
    for s in scored:
        counts[s.verdict.value] = counts.get(s.verdict.value, 0) + 1
    return counts


def verify_blocks(runtime: Runtime, questions: str | Path) -> int:
    """Re-classification closure check over generated question files."""
    items = _load_question_files(questions)
    reduced = runtime.corpus.view(ViewRole.REDUCED_ONLY)
    from .scenario import classify_query

    checked = 0
    for question in items:
        probe = classification_query(question, runtime.corpus, runtime.registry)
        actual = classify_query(probe, reduced, runtime.split)
        if actual != question.scenario:
            raise PipelineError(
                f"question does not re-classify to its block: "
                f"{question.complete_question!r} ({actual} != {question.scenario})"
            )
        checked += 1
    return checked
