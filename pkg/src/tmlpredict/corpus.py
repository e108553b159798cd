"""Evidence corpus: combined vs. reduced mapping views with an access guard.

The combined corpus holds every extracted language -> model-family ->
metric record and defines ground truth. The reduced corpus is the combined
corpus minus a removal set of papers and is the only evidence a prediction
system may consult at inference time. Views enforce that restriction
structurally: a ReducedOnly view reads exclusively from the reduced maps,
so it cannot leak a removed-paper record.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping


class CorpusError(ValueError):
    pass


class MappingError(CorpusError):
    pass


#: canonical task identifiers and their display names
TASK_DISPLAY = {
    "code_generation": "Code Generation",
    "math_reasoning": "Mathematical Reasoning",
    "qa_vqa": "QA VQA",
    "classification_nli": "Classification NLI",
    "text_summarization": "Text Summarization",
    "machine_translation": "Machine Translation",
}

#: programming languages are invalid mapping keys for code generation
PROGRAMMING_LANGUAGES = frozenset(
    {
        "python", "java", "javascript", "typescript", "c", "c++", "cpp",
        "c#", "csharp", "go", "golang", "rust", "php", "ruby", "kotlin",
        "swift", "scala", "haskell", "perl", "lua", "r", "julia", "sql",
        "bash", "shell", "fortran", "cobol", "matlab", "dart", "elixir",
    }
)


def canonicalize_task(task: str) -> str:
    return task.strip().lower().replace("/", "_").replace(" ", "_")


def task_display(task: str) -> str:
    return TASK_DISPLAY.get(canonicalize_task(task), task)


@dataclass(frozen=True)
class MetricRecord:
    """One reported score for a (language, model family) cell."""

    metric: str
    raw_value: float
    paper_id: str

    def __post_init__(self) -> None:
        if not self.metric:
            raise MappingError("metric name must be nonempty")
        if not self.paper_id:
            raise MappingError("paper_id must be nonempty")
        if not math.isfinite(self.raw_value):
            raise MappingError(f"{self.metric}: value must be finite")


@dataclass(frozen=True)
class ModelFamilyMapping:
    """Per-task language -> model family -> records table."""

    task: str
    entries: dict[str, dict[str, tuple[MetricRecord, ...]]]

    def __post_init__(self) -> None:
        for lang, fams in self.entries.items():
            if not lang:
                raise MappingError("empty language key")
            if self.task == "code_generation" and lang.lower() in PROGRAMMING_LANGUAGES:
                raise MappingError(
                    f"programming language {lang!r} not allowed under code_generation"
                )
            for fam, records in fams.items():
                if not fam:
                    raise MappingError(f"{lang}: empty model family key")
                if not records:
                    raise MappingError(f"{lang}/{fam}: empty record list")

    def languages(self) -> list[str]:
        return sorted(self.entries)

    def families(self) -> list[str]:
        return sorted({f for fams in self.entries.values() for f in fams})

    def paper_ids(self) -> set[str]:
        return {
            r.paper_id
            for fams in self.entries.values()
            for records in fams.values()
            for r in records
        }

    def record_count(self) -> int:
        return sum(
            len(records) for fams in self.entries.values() for records in fams.values()
        )


def _dedup(records: Iterable[MetricRecord]) -> tuple[MetricRecord, ...]:
    # duplicate (metric, paper) entries collapse to the first occurrence
    seen: set[tuple[str, str]] = set()
    out: list[MetricRecord] = []
    for rec in records:
        key = (rec.metric.lower(), rec.paper_id)
        if key in seen:
            continue
        seen.add(key)
        out.append(rec)
    return tuple(out)


def load_mapping(path: str | Path) -> ModelFamilyMapping:
    """Parse a mapping file.

    Format: ``{"task": str, "entries": {lang: {family: [{"metric", "value",
    "paper_id"}]}}}``. Language keys are lowercased ISO 639-3 codes.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MappingError(f"{path}: cannot parse mapping file: {exc}") from exc
    if not isinstance(raw, dict) or "task" not in raw:
        raise MappingError(f"{path}: mapping file needs a 'task' field")
    entries_raw = raw.get("entries") or {}
    if not entries_raw:
        raise MappingError(f"{path}: empty mapping")
    task = canonicalize_task(str(raw["task"]))
    entries: dict[str, dict[str, tuple[MetricRecord, ...]]] = {}
    for lang, fams in entries_raw.items():
        lang_key = str(lang).strip().lower()
        fam_map: dict[str, tuple[MetricRecord, ...]] = {}
        for fam, recs in (fams or {}).items():
            parsed = []
            for rec in recs or []:
                try:
                    parsed.append(
                        MetricRecord(
                            metric=str(rec["metric"]),
                            raw_value=float(rec["value"]),
                            paper_id=str(rec["paper_id"]),
                        )
                    )
                except (KeyError, TypeError, ValueError) as exc:
                    raise MappingError(
                        f"{path}: bad record under {lang}/{fam}: {exc}"
                    ) from exc
            deduped = _dedup(parsed)
            if deduped:
                fam_map[str(fam).strip()] = deduped
        if fam_map:
            entries[lang_key] = fam_map
    if not entries:
        raise MappingError(f"{path}: empty mapping")
    return ModelFamilyMapping(task=task, entries=entries)


def serialize_mapping(mapping: ModelFamilyMapping) -> dict:
    return {
        "task": mapping.task,
        "entries": {
            lang: {
                fam: [
                    {"metric": r.metric, "value": r.raw_value, "paper_id": r.paper_id}
                    for r in records
                ]
                for fam, records in sorted(fams.items())
            }
            for lang, fams in sorted(mapping.entries.items())
        },
    }


def save_mapping(mapping: ModelFamilyMapping, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(serialize_mapping(mapping), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


class ViewRole(str, Enum):
    COMBINED = "combined"
    REDUCED_ONLY = "reduced_only"


# scenario tags used by the build-time instantiability check; the full
# query classifier lives in the scenario module
_SIG_S1, _SIG_S2, _SIG_S3, _SIG_S4, _SIG_S5 = "S1", "S2", "S3", "S4", "S5"
_SIG_TRANSFER = "S3/S4"  # undiscriminated when no close/distant oracle given


def _evidence_signature(
    reduced: ModelFamilyMapping | None,
    language: str,
    family: str,
    is_close: Callable[[str, str], bool | None] | None,
) -> str | None:
    """Evidence configuration of (language, family) against the reduced map.

    Returns None when S3/S4 cannot be discriminated for this pair.
    """
    entries = reduced.entries if reduced else {}
    fam_lower = family.lower()
    lang_entry = entries.get(language.lower(), {})
    joint = any(f.lower() == fam_lower for f in lang_entry)
    if joint:
        return _SIG_S1
    if lang_entry:
        return _SIG_S2
    observed_langs = sorted(
        lang
        for lang, fams in entries.items()
        if any(f.lower() == fam_lower for f in fams)
    )
    if not observed_langs:
        return _SIG_S5
    if is_close is None:
        return _SIG_TRANSFER
    verdicts = [is_close(language, other) for other in observed_langs]
    known = [v for v in verdicts if v is not None]
    if not known:
        return None
    return _SIG_S3 if any(known) else _SIG_S4


@dataclass(frozen=True)
class EvidenceCorpus:
    """Combined and reduced mapping views plus the removal set."""

    combined: dict[str, ModelFamilyMapping]
    reduced: dict[str, ModelFamilyMapping]
    removed_papers: frozenset[str]
    paper_order: tuple[str, ...] = ()

    def tasks(self) -> list[str]:
        return sorted(self.combined)

    def view(self, role: ViewRole) -> "CorpusView":
        return CorpusView(role=role, corpus=self)

    def paper_rank(self, paper_id: str) -> tuple[int, str]:
        """Sort key for recency: listed papers by position, the rest after."""
        try:
            return (self.paper_order.index(paper_id), paper_id)
        except ValueError:
            return (len(self.paper_order), paper_id)


@dataclass(frozen=True)
class CorpusView:
    """Role-restricted read access to an EvidenceCorpus.

    A REDUCED_ONLY view reads exclusively from the reduced maps, so records
    from removed papers are unreachable through it by construction.
    """

    role: ViewRole
    corpus: EvidenceCorpus

    def _maps(self) -> dict[str, ModelFamilyMapping]:
        if self.role is ViewRole.COMBINED:
            return self.corpus.combined
        return self.corpus.reduced

    def has_task(self, task: str) -> bool:
        return canonicalize_task(task) in self._maps()

    def lookup(self, task: str, language: str, model_family: str) -> list[MetricRecord]:
        """Records for the triple; absence yields an empty list, not an error."""
        mapping = self._maps().get(canonicalize_task(task))
        if mapping is None:
            return []
        fams = mapping.entries.get(language.strip().lower())
        if not fams:
            return []
        fam_lower = model_family.strip().lower()
        out: list[MetricRecord] = []
        for fam, records in fams.items():
            if fam.lower() == fam_lower:
                out.extend(records)
        return out

    def languages(self, task: str) -> list[str]:
        mapping = self._maps().get(canonicalize_task(task))
        return mapping.languages() if mapping else []

    def has_language(self, task: str, language: str) -> bool:
        mapping = self._maps().get(canonicalize_task(task))
        return bool(mapping and language.strip().lower() in mapping.entries)

    def families(self, task: str) -> list[str]:
        mapping = self._maps().get(canonicalize_task(task))
        return mapping.families() if mapping else []

    def families_for_language(self, task: str, language: str) -> list[str]:
        mapping = self._maps().get(canonicalize_task(task))
        if not mapping:
            return []
        return sorted(mapping.entries.get(language.strip().lower(), {}))

    def observed_languages_for_family(self, task: str, model_family: str) -> list[str]:
        mapping = self._maps().get(canonicalize_task(task))
        if not mapping:
            return []
        fam_lower = model_family.strip().lower()
        return sorted(
            lang
            for lang, fams in mapping.entries.items()
            if any(f.lower() == fam_lower for f in fams)
        )

    def paper_rank(self, paper_id: str) -> tuple[int, str]:
        return self.corpus.paper_rank(paper_id)


def _filter_mapping(
    mapping: ModelFamilyMapping, removed: frozenset[str]
) -> ModelFamilyMapping | None:
    entries: dict[str, dict[str, tuple[MetricRecord, ...]]] = {}
    for lang, fams in mapping.entries.items():
        fam_map = {}
        for fam, records in fams.items():
            kept = tuple(r for r in records if r.paper_id not in removed)
            if kept:
                fam_map[fam] = kept
        if fam_map:
            entries[lang] = fam_map
    if not entries:
        return None
    return ModelFamilyMapping(task=mapping.task, entries=entries)


def reduce_corpus(
    combined: Mapping[str, ModelFamilyMapping] | Iterable[ModelFamilyMapping],
    removed: Iterable[str],
    *,
    is_close: Callable[[str, str], bool | None] | None = None,
    paper_order: Iterable[str] = (),
    require_instantiable: bool = True,
) -> EvidenceCorpus:
    """Build the corpus by removing a paper subset from the combined maps.

    The reduced maps keep exactly the records whose paper is not removed;
    languages and families that lose every record disappear from the keys.
    With require_instantiable, construction fails unless every scenario can
    still be posed for every task from the reduced view (S3 vs S4 needs an
    is_close oracle; without one they are checked as one transfer category).
    """
    if isinstance(combined, Mapping):
        combined_by_task = dict(combined)
    else:
        combined_by_task = {}
        for mapping in combined:
            if mapping.task in combined_by_task:
                raise CorpusError(f"duplicate task {mapping.task!r} in combined corpus")
            combined_by_task[mapping.task] = mapping
    if not combined_by_task:
        raise CorpusError("combined corpus is empty")

    removed_set = frozenset(str(p) for p in removed)
    all_papers = set()
    for mapping in combined_by_task.values():
        all_papers |= mapping.paper_ids()
    unknown = removed_set - all_papers
    if unknown:
        raise CorpusError(f"unknown paper_id in removal set: {sorted(unknown)}")

    reduced_by_task: dict[str, ModelFamilyMapping] = {}
    for task, mapping in combined_by_task.items():
        filtered = _filter_mapping(mapping, removed_set)
        if filtered is not None:
            reduced_by_task[task] = filtered

    corpus = EvidenceCorpus(
        combined=combined_by_task,
        reduced=reduced_by_task,
        removed_papers=removed_set,
        paper_order=tuple(paper_order),
    )
    if require_instantiable:
        check_instantiable(corpus, is_close=is_close)
    return corpus


def check_instantiable(
    corpus: EvidenceCorpus,
    is_close: Callable[[str, str], bool | None] | None = None,
) -> dict[str, set[str]]:
    """Verify every scenario is posable per task; returns the coverage found.

    A scenario counts as instantiable when some (language, family) pair with
    ground truth in the combined map has that evidence configuration against
    the reduced map.
    """
    coverage: dict[str, set[str]] = {}
    required = (
        {_SIG_S1, _SIG_S2, _SIG_S3, _SIG_S4, _SIG_S5}
        if is_close is not None
        else {_SIG_S1, _SIG_S2, _SIG_TRANSFER, _SIG_S5}
    )
    for task, mapping in corpus.combined.items():
        reduced = corpus.reduced.get(task)
        found: set[str] = set()
        for lang, fams in mapping.entries.items():
            for fam in fams:
                sig = _evidence_signature(reduced, lang, fam, is_close)
                if sig is not None:
                    found.add(sig)
        coverage[task] = found
        missing = required - found
        if missing:
            raise CorpusError(
                f"task {task!r}: scenarios not instantiable after removal: "
                f"{sorted(missing)}"
            )
    return coverage


def load_corpus(
    manifest_path: str | Path,
    *,
    is_close: Callable[[str, str], bool | None] | None = None,
    require_instantiable: bool = True,
) -> EvidenceCorpus:
    """Load a corpus manifest: mapping paths plus the removal set.

    Manifest format: ``{"mappings": [path, ...], "removed_papers": [...],
    "paper_order": [...]}``; relative paths resolve against the manifest.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"{manifest_path}: cannot parse manifest: {exc}") from exc
    mappings = {}
    for rel in manifest.get("mappings", []):
        path = (manifest_path.parent / rel).resolve()
        mapping = load_mapping(path)
        if mapping.task in mappings:
            raise CorpusError(f"duplicate task {mapping.task!r} in manifest")
        mappings[mapping.task] = mapping
    if not mappings:
        raise CorpusError(f"{manifest_path}: manifest lists no mappings")
    return reduce_corpus(
        mappings,
        manifest.get("removed_papers", []),
        is_close=is_close,
        paper_order=manifest.get("paper_order", []),
        require_instantiable=require_instantiable,
    )
