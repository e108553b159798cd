"""Metric normalization onto the shared 0-100 scale and ground-truth answers.

Reported scores arrive in heterogeneous conventions: fractions in [0, 1],
percentage strings, or values already on a 0-100 scale. Normalization maps
them all onto [0, 100] deterministically. A registry groups each task's
metrics into compatibility families (a BLEU cannot be compared with a chrF)
and may attach per-metric linear rescaling.

Ground truth is always resolved from the combined corpus view: numeric
questions take the selected record's normalized value, comparative
questions take the argmax entity over metric-compatible normalized scores.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .corpus import CorpusView, MetricRecord, canonicalize_task


class MetricError(ValueError):
    pass


class GroundTruthError(MetricError):
    pass


@dataclass(frozen=True)
class MetricSpec:
    name: str
    scale_a: float = 1.0
    scale_b: float = 0.0


@dataclass(frozen=True)
class MetricFamily:
    name: str
    metrics: tuple[MetricSpec, ...]


class MetricRegistry:
    """Task -> metric-family table with optional linear scaling per metric."""

    def __init__(self, tasks: dict[str, tuple[MetricFamily, ...]]):
        self.tasks = tasks
        self._family_index: dict[tuple[str, str], MetricFamily] = {}
        self._spec_index: dict[str, MetricSpec] = {}
        for task, families in tasks.items():
            for fam in families:
                for spec in fam.metrics:
                    self._family_index[(task, spec.name.lower())] = fam
                    self._spec_index.setdefault(spec.name.lower(), spec)

    @classmethod
    def from_dict(cls, raw: dict) -> "MetricRegistry":
        tasks = {}
        for task, families in raw.items():
            parsed = []
            for entry in families:
                specs = tuple(
                    MetricSpec(
                        name=name,
                        scale_a=float(params.get("scale_a", 1.0)),
                        scale_b=float(params.get("scale_b", 0.0)),
                    )
                    for name, params in entry.get("metrics", {}).items()
                )
                parsed.append(MetricFamily(name=entry["family"], metrics=specs))
            tasks[canonicalize_task(task)] = tuple(parsed)
        return cls(tasks)

    @classmethod
    def load(cls, path: str | Path) -> "MetricRegistry":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def family_of(self, task: str, metric: str) -> MetricFamily:
        key = (canonicalize_task(task), metric.strip().lower())
        fam = self._family_index.get(key)
        if fam is None:
            raise MetricError(f"unknown metric {metric!r} for task {key[0]!r}")
        return fam

    def scaling(self, metric: str) -> tuple[float, float]:
        spec = self._spec_index.get(metric.strip().lower())
        if spec is None:
            return (1.0, 0.0)
        return (spec.scale_a, spec.scale_b)

    def families(self, task: str) -> tuple[MetricFamily, ...]:
        return self.tasks.get(canonicalize_task(task), ())


_DEFAULT_REGISTRY: MetricRegistry | None = None


def default_registry() -> MetricRegistry:
    global _DEFAULT_REGISTRY
    if _DEFAULT_REGISTRY is None:
        text = (
            resources.files("tmlpredict").joinpath("data/metric_registry.json")
        ).read_text(encoding="utf-8")
        _DEFAULT_REGISTRY = MetricRegistry.from_dict(json.loads(text))
    return _DEFAULT_REGISTRY


def normalize(metric_name: str, raw: str | float, registry: MetricRegistry | None = None) -> float:
    """Map a reported value onto [0, 100].

    Rules: percentage text keeps its numeric part; a bare decimal in [0, 1]
    is multiplied by 100 (exactly 1 maps to 100); a value already in
    (1, 100] passes through. A non-identity (scale_a, scale_b) registry
    entry replaces the heuristic: normalized = a * value + b.
    """
    registry = registry or default_registry()
    text = str(raw).strip()
    if not text:
        raise MetricError("empty metric value")
    is_percent = text.endswith("%")
    if is_percent:
        text = text[:-1].strip()
    try:
        value = float(text)
    except ValueError as exc:
        raise MetricError(f"unparseable metric value {raw!r}") from exc
    if not math.isfinite(value):
        raise MetricError(f"non-finite metric value {raw!r}")

    a, b = registry.scaling(metric_name)
    if (a, b) != (1.0, 0.0):
        result = a * value + b
    elif is_percent:
        result = value
    elif 0.0 <= value <= 1.0:
        result = value * 100.0
    elif 1.0 < value <= 100.0:
        result = value
    else:
        raise MetricError(f"{metric_name}: value {raw!r} outside [0, 100]")
    if not 0.0 <= result <= 100.0:
        raise MetricError(
            f"{metric_name}: value {raw!r} normalizes to {result}, outside [0, 100]"
        )
    return result


def render_normalized(value: float) -> str:
    """Render a normalized value so that re-normalizing it is the identity.

    Normalized values live on the 0-100 scale, i.e. they are percentages;
    rendering with the % suffix keeps normalize(render(v)) == v exactly,
    including for values that land in (0, 1).
    """
    return f"{value!r}%"


def compatible(metric_a: str, metric_b: str, task: str, registry: MetricRegistry | None = None) -> bool:
    """True iff both metrics belong to the same family entry for the task."""
    registry = registry or default_registry()
    fam_a = registry.family_of(task, metric_a)
    fam_b = registry.family_of(task, metric_b)
    return fam_a.name == fam_b.name


@dataclass(frozen=True)
class MetricValue:
    metric_name: str
    raw: str
    normalized: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.normalized <= 100.0:
            raise MetricError(f"normalized value out of range: {self.normalized}")


@dataclass(frozen=True)
class GroundTruthRef:
    """Pointer from a benchmark question into the combined corpus."""

    task: str
    language: str
    family: str | None = None
    candidates: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "language": self.language,
            "family": self.family or "",
            "candidates": list(self.candidates),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "GroundTruthRef":
        return cls(
            task=raw["task"],
            language=raw["language"],
            family=raw.get("family") or None,
            candidates=tuple(raw.get("candidates") or ()),
        )


@dataclass(frozen=True)
class GroundTruth:
    ref: GroundTruthRef
    answer_numeric: MetricValue | None = None
    answer_label: str | None = None
    sources: tuple[MetricRecord, ...] = ()
    tie: bool = False
    multiple_papers: bool = False


def _pick_record(
    records: list[MetricRecord],
    task: str,
    view: CorpusView,
    registry: MetricRegistry,
) -> tuple[MetricRecord, bool]:
    """Deterministic record selection among conflicting reports.

    Restrict to the first registry family (declaration order) present among
    the records, then the first metric of that family, then the most recent
    paper per the corpus ordering. Returns (record, had_conflicts).
    """
    by_metric: dict[str, list[MetricRecord]] = {}
    for rec in records:
        by_metric.setdefault(rec.metric.lower(), []).append(rec)

    chosen_metric: str | None = None
    for family in registry.families(task):
        for spec in family.metrics:
            if spec.name.lower() in by_metric:
                chosen_metric = spec.name.lower()
                break
        if chosen_metric:
            break
    if chosen_metric is None:
        # metrics unknown to the registry: fall back to lexicographic
        chosen_metric = sorted(by_metric)[0]

    candidates = sorted(
        by_metric[chosen_metric], key=lambda r: view.paper_rank(r.paper_id)
    )
    return candidates[-1], len(candidates) > 1


def _best_family(
    scored: dict[str, list[MetricRecord]], task: str, registry: MetricRegistry
) -> str | None:
    """Metric family covering the most candidates; ties by registry order."""
    coverage: list[tuple[int, int, str]] = []
    for order, family in enumerate(registry.families(task)):
        members = {spec.name.lower() for spec in family.metrics}
        covered = sum(
            1
            for records in scored.values()
            if any(r.metric.lower() in members for r in records)
        )
        if covered:
            coverage.append((-covered, order, family.name))
    if not coverage:
        return None
    return sorted(coverage)[0][2]


def ground_truth(
    ref: GroundTruthRef,
    combined: CorpusView,
    registry: MetricRegistry | None = None,
) -> GroundTruth:
    """Resolve a question's answer from the combined corpus view.

    Numeric refs (family set) return the selected record's normalized value;
    comparative refs return the argmax family over compatible scores, ties
    broken lexicographically and flagged.
    """
    registry = registry or default_registry()
    task = canonicalize_task(ref.task)

    if ref.family:
        records = combined.lookup(task, ref.language, ref.family)
        if not records:
            raise GroundTruthError(
                f"no ground truth for ({task}, {ref.language}, {ref.family})"
            )
        record, conflicts = _pick_record(records, task, combined, registry)
        value = MetricValue(
            metric_name=record.metric,
            raw=repr(record.raw_value),
            normalized=normalize(record.metric, record.raw_value, registry),
        )
        return GroundTruth(
            ref=ref,
            answer_numeric=value,
            sources=(record,),
            multiple_papers=conflicts,
        )

    candidates = list(ref.candidates) or combined.families_for_language(task, ref.language)
    if not candidates:
        raise GroundTruthError(f"no candidate families for ({task}, {ref.language})")
    scored = {
        fam: combined.lookup(task, ref.language, fam)
        for fam in sorted(candidates)
    }
    scored = {fam: recs for fam, recs in scored.items() if recs}
    if not scored:
        raise GroundTruthError(
            f"no records for any candidate in ({task}, {ref.language})"
        )
    family_name = _best_family(scored, task, registry)
    if family_name is None:
        raise GroundTruthError(
            f"no registry-known metrics among candidates ({task}, {ref.language})"
        )
    members = {
        spec.name.lower()
        for fam in registry.families(task)
        if fam.name == family_name
        for spec in fam.metrics
    }
    results: dict[str, tuple[MetricRecord, float, bool]] = {}
    for fam, records in scored.items():
        in_family = [r for r in records if r.metric.lower() in members]
        if not in_family:
            continue
        record, conflicts = _pick_record(in_family, task, combined, registry)
        results[fam] = (
            record,
            normalize(record.metric, record.raw_value, registry),
            conflicts,
        )
    best_score = max(v[1] for v in results.values())
    winners = sorted(fam for fam, v in results.items() if v[1] == best_score)
    winner = winners[0]
    return GroundTruth(
        ref=ref,
        answer_label=winner,
        sources=tuple(results[f][0] for f in sorted(results)),
        tie=len(winners) > 1,
        multiple_papers=any(v[2] for v in results.values()),
    )
