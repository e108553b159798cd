"""Evidence-scenario classification and benchmark question-block assembly.

A query asks about a (task, model family, language) triple. Its scenario is
determined by what the reduced corpus can say about it:

  S1  language and family observed together (a joint record exists)
  S2  language observed, no joint record for the family
  S3  language unobserved, family observed under a typologically close language
  S4  language unobserved, family observed only under distant languages
  S5  neither language nor family observed

Question blocks are generated deterministically from seeded templates so a
benchmark build is reproducible; every emitted question re-classifies to
its block's scenario by construction.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable

from .corpus import CorpusView, EvidenceCorpus, ViewRole, canonicalize_task, task_display
from .langsim import PairClass, SimilaritySplit
from .metrics import GroundTruthRef, MetricRegistry, default_registry, ground_truth


class ScenarioError(ValueError):
    pass


class Scenario(str, Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S4 = "S4"
    S5 = "S5"


class QueryType(str, Enum):
    NUMERIC_PREDICTION = "numeric_prediction"
    COMPARATIVE_REASONING = "comparative_reasoning"


@dataclass(frozen=True)
class TmlQuery:
    """One task/model-family/language performance question."""

    task: str
    query_type: QueryType
    text: str = ""
    model_family: str | None = None
    language: str | None = None

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "query_type": self.query_type.value,
            "text": self.text,
            "model_family": self.model_family or "",
            "language": self.language or "",
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "TmlQuery":
        return cls(
            task=raw["task"],
            query_type=QueryType(raw["query_type"]),
            text=raw.get("text", ""),
            model_family=raw.get("model_family") or None,
            language=raw.get("language") or None,
        )


def classify_query(
    query: TmlQuery, reduced: CorpusView, split: SimilaritySplit
) -> Scenario:
    """Assign the evidence scenario for a fully specified query.

    Requires a specified language and model family and a reduced view that
    covers the task. S3/S4 discrimination needs the query language to be
    scorable against at least one of the family's observed languages.
    """
    if reduced.role is not ViewRole.REDUCED_ONLY:
        raise ScenarioError("classification must use the reduced view")
    task = canonicalize_task(query.task)
    if not reduced.has_task(task):
        raise ScenarioError(f"task {task!r} not covered by the reduced corpus")
    if not query.language or not query.model_family:
        raise ScenarioError("classification needs both language and model family")

    language = query.language.strip().lower()
    family = query.model_family.strip()
    if reduced.lookup(task, language, family):
        return Scenario.S1
    if reduced.has_language(task, language):
        return Scenario.S2
    observed = reduced.observed_languages_for_family(task, family)
    if not observed:
        return Scenario.S5
    verdicts = [split.classify_or_none(language, other) for other in observed]
    known = [v for v in verdicts if v is not None]
    if not known:
        raise ScenarioError(
            f"language {language!r} cannot be compared with any observed "
            f"language of {family!r} (missing typological vector)"
        )
    return Scenario.S3 if PairClass.CLOSE in known else Scenario.S4


# --- question templates ---------------------------------------------------
# ids 1-10 follow the generation prompt's template list; 11-14 are phrasing
# variants. {model} expects exactly one identifier, {models} a sorted
# comma-separated list, {language} one display name.

TEMPLATES: dict[int, str] = {
    1: "What is the performance of {model} on {task} for {language}?",
    2: "How does {model} perform on {task} in {language}?",
    3: "Which of {models} performs better for {language} on {task}?",
    4: "Which model performs best for {task} in {language}?",
    5: "What are the {task} results for {model} across all languages?",
    6: "How does {language} performance vary across models for {task}?",
    7: "What languages show the best performance for {task}?",
    8: "Which models have been evaluated for {task} in {language}?",
    9: "What is the cross-lingual performance of {model} on {task}?",
    10: "How do low-resource languages perform on {task}?",
    11: "What score does {model} achieve for {task} in {language}?",
    12: "How well does {model} perform on {task} for {language}?",
    13: "Which model achieves the highest score for {task} in {language}?",
    14: "What is the top-performing model for {task} in {language}?",
}

NUMERIC_TEMPLATE_IDS = (1, 2, 11, 12)
COMPARATIVE_TEMPLATE_IDS = (4, 13, 14)
PAIRWISE_TEMPLATE_ID = 3


def join_identifiers(values: Iterable[str]) -> str:
    """Alphabetical, comma-separated, no spaces."""
    return ",".join(sorted(values))


def render_question(
    template_id: int,
    task: str = "",
    models: Iterable[str] = (),
    languages: Iterable[str] = (),
) -> str:
    """Fill a template; every supplied identifier appears verbatim."""
    template = TEMPLATES.get(template_id)
    if template is None:
        raise ScenarioError(f"unknown template id {template_id}")
    models = list(models)
    languages = list(languages)
    values = {"task": task}
    if "{model}" in template:
        if len(models) != 1:
            raise ScenarioError(f"template {template_id} needs exactly one model")
        values["model"] = models[0]
    if "{models}" in template:
        if len(models) < 2:
            raise ScenarioError(f"template {template_id} needs at least two models")
        values["models"] = join_identifiers(models)
    if "{language}" in template:
        if len(languages) != 1:
            raise ScenarioError(f"template {template_id} needs exactly one language")
        values["language"] = languages[0]
    if "{task}" in template and not task:
        raise ScenarioError(f"template {template_id} needs a task")
    text = template.format(**values)
    if not text.endswith("?"):
        raise ScenarioError(f"template {template_id} does not end with '?'")
    return text


@dataclass(frozen=True)
class Question:
    complete_question: str
    task: str
    models: str
    languages: str
    query_type: QueryType
    scenario: Scenario
    ground_truth_ref: GroundTruthRef

    def __post_init__(self) -> None:
        if not self.complete_question.endswith("?"):
            raise ScenarioError("questions must end with '?'")
        for value in (self.models, self.languages):
            if value and (" " in value or value != join_identifiers(value.split(","))):
                raise ScenarioError(f"list field not sorted/space-free: {value!r}")

    def to_dict(self) -> dict:
        return {
            "complete_question": self.complete_question,
            "task": self.task,
            "models": self.models,
            "languages": self.languages,
            "query_type": self.query_type.value,
            "scenario": self.scenario.value,
            "ground_truth_ref": self.ground_truth_ref.to_dict(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Question":
        return cls(
            complete_question=raw["complete_question"],
            task=raw["task"],
            models=raw.get("models", ""),
            languages=raw.get("languages", ""),
            query_type=QueryType(raw["query_type"]),
            scenario=Scenario(raw["scenario"]),
            ground_truth_ref=GroundTruthRef.from_dict(raw["ground_truth_ref"]),
        )

    def to_query(self) -> TmlQuery:
        """The orchestrator-facing query; comparative leaves the family open."""
        if self.query_type is QueryType.NUMERIC_PREDICTION:
            family = self.ground_truth_ref.family
        else:
            family = None
        return TmlQuery(
            task=self.task,
            query_type=self.query_type,
            text=self.complete_question,
            model_family=family,
            language=self.ground_truth_ref.language,
        )


@dataclass(frozen=True)
class QuestionBlock:
    task: str
    scenario: Scenario
    questions: tuple[Question, ...]
    exhausted_space: bool = False


@dataclass(frozen=True)
class Aliases:
    """Display names for languages/tasks and model-name canonicalization."""

    languages: dict[str, str] = field(default_factory=dict)
    tasks: dict[str, str] = field(default_factory=dict)
    model_families: dict[str, str] = field(default_factory=dict)

    def language_display(self, code: str) -> str:
        return self.languages.get(code.lower(), code)

    def task_display(self, task: str) -> str:
        return self.tasks.get(canonicalize_task(task)) or task_display(task)

    def canonical_model(self, name: str) -> str:
        return self.model_families.get(name.strip().lower(), name.strip())

    @classmethod
    def load(cls, path: str | Path) -> "Aliases":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            languages={k.lower(): v for k, v in raw.get("languages", {}).items()},
            tasks={canonicalize_task(k): v for k, v in raw.get("tasks", {}).items()},
            model_families={
                k.lower(): v for k, v in raw.get("model_families", {}).items()
            },
        )


def _numeric_candidates(
    task: str,
    scenario: Scenario,
    corpus: EvidenceCorpus,
    split: SimilaritySplit,
) -> list[tuple[str, str]]:
    combined = corpus.view(ViewRole.COMBINED)
    reduced = corpus.view(ViewRole.REDUCED_ONLY)
    out = []
    for lang in combined.languages(task):
        for fam in combined.families_for_language(task, lang):
            probe = TmlQuery(
                task=task,
                query_type=QueryType.NUMERIC_PREDICTION,
                model_family=fam,
                language=lang,
            )
            try:
                if classify_query(probe, reduced, split) == scenario:
                    out.append((lang, fam))
            except ScenarioError:
                continue
    return out


def _comparative_candidates(
    task: str,
    scenario: Scenario,
    corpus: EvidenceCorpus,
    split: SimilaritySplit,
    registry: MetricRegistry,
) -> list[tuple[str, tuple[str, ...]]]:
    """(language, candidate families) units whose argmax family hits the scenario.

    An empty candidate tuple means "all families observed for the language";
    pairs give two-way comparison questions.
    """
    combined = corpus.view(ViewRole.COMBINED)
    reduced = corpus.view(ViewRole.REDUCED_ONLY)
    out = []
    for lang in combined.languages(task):
        fams = combined.families_for_language(task, lang)
        units: list[tuple[str, ...]] = [()]
        if len(fams) >= 2:
            units.extend(
                (a, b) for i, a in enumerate(fams) for b in fams[i + 1:]
            )
        for unit in units:
            ref = GroundTruthRef(task=task, language=lang, candidates=unit)
            try:
                gt = ground_truth(ref, combined, registry)
            except Exception:
                continue
            probe = TmlQuery(
                task=task,
                query_type=QueryType.COMPARATIVE_REASONING,
                model_family=gt.answer_label,
                language=lang,
            )
            try:
                if classify_query(probe, reduced, split) == scenario:
                    out.append((lang, unit))
            except ScenarioError:
                continue
    return out


def build_blocks(
    task: str,
    scenario: Scenario,
    corpus: EvidenceCorpus,
    split: SimilaritySplit,
    registry: MetricRegistry | None = None,
    aliases: Aliases | None = None,
    n_numeric: int = 25,
    n_comparative: int = 25,
    seed: int = 0,
) -> QuestionBlock:
    """Assemble one task-scenario question block, deterministically per seed.

    Candidate combinations are cycled before any repeats; a block that had
    to repeat is flagged via exhausted_space.
    """
    registry = registry or default_registry()
    aliases = aliases or Aliases()
    task = canonicalize_task(task)
    rng = random.Random(f"{task}:{scenario.value}:{seed}")
    display_task = aliases.task_display(task)

    questions: list[Question] = []
    exhausted = False

    if n_numeric > 0:
        cands = _numeric_candidates(task, scenario, corpus, split)
        if not cands:
            raise ScenarioError(
                f"scenario not instantiable: no numeric candidates for "
                f"({task}, {scenario.value})"
            )
        combos = [(t, c) for c in cands for t in NUMERIC_TEMPLATE_IDS]
        pool: list = []
        for _ in range(n_numeric):
            if not pool:
                if questions:
                    exhausted = exhausted or len(combos) < n_numeric
                pool = combos.copy()
                rng.shuffle(pool)
            template_id, (lang, fam) = pool.pop()
            text = render_question(
                template_id,
                task=display_task,
                models=[fam],
                languages=[aliases.language_display(lang)],
            )
            questions.append(
                Question(
                    complete_question=text,
                    task=task,
                    models=fam,
                    languages=lang,
                    query_type=QueryType.NUMERIC_PREDICTION,
                    scenario=scenario,
                    ground_truth_ref=GroundTruthRef(
                        task=task, language=lang, family=fam
                    ),
                )
            )
        exhausted = exhausted or len(combos) < n_numeric

    if n_comparative > 0:
        cands = _comparative_candidates(task, scenario, corpus, split, registry)
        if not cands:
            raise ScenarioError(
                f"scenario not instantiable: no comparative candidates for "
                f"({task}, {scenario.value})"
            )
        combos = []
        for lang, unit in cands:
            if unit:
                combos.append((PAIRWISE_TEMPLATE_ID, lang, unit))
            else:
                combos.extend((t, lang, unit) for t in COMPARATIVE_TEMPLATE_IDS)
        pool = []
        for _ in range(n_comparative):
            if not pool:
                pool = combos.copy()
                rng.shuffle(pool)
            template_id, lang, unit = pool.pop()
            text = render_question(
                template_id,
                task=display_task,
                models=list(unit),
                languages=[aliases.language_display(lang)],
            )
            questions.append(
                Question(
                    complete_question=text,
                    task=task,
                    models=join_identifiers(unit) if unit else "",
                    languages=lang,
                    query_type=QueryType.COMPARATIVE_REASONING,
                    scenario=scenario,
                    ground_truth_ref=GroundTruthRef(
                        task=task, language=lang, candidates=unit
                    ),
                )
            )
        exhausted = exhausted or len(combos) < n_comparative

    return QuestionBlock(
        task=task,
        scenario=scenario,
        questions=tuple(questions),
        exhausted_space=exhausted,
    )


def classification_query(
    question: Question,
    corpus: EvidenceCorpus,
    registry: MetricRegistry | None = None,
) -> TmlQuery:
    """Fully specified query for re-classification checks.

    Comparative questions classify via their ground-truth argmax family.
    """
    if question.query_type is QueryType.NUMERIC_PREDICTION:
        return replace(question.to_query(), model_family=question.ground_truth_ref.family)
    gt = ground_truth(
        question.ground_truth_ref, corpus.view(ViewRole.COMBINED), registry
    )
    return replace(question.to_query(), model_family=gt.answer_label)


def write_questions(path: str | Path, block: QuestionBlock) -> None:
    lines = [
        json.dumps(q.to_dict(), sort_keys=True, ensure_ascii=False)
        for q in block.questions
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_questions(path: str | Path) -> list[Question]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            out.append(Question.from_dict(json.loads(line)))
    return out
