"""Scoring: numeric MAE, comparative accuracy, and breakdown tables.

Unanswered numeric questions are excluded from MAE (a scalar error is
undefined without a prediction) and surface through the coverage fraction;
unanswered comparative questions count as incorrect. Per-question records
carry task and scenario so breakdowns can stratify.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..metrics import GroundTruth, MetricError, MetricRegistry, default_registry
from ..scenario import Question, QueryType
from .extraction import ExtractedPrediction


@dataclass(frozen=True)
class QuestionScore:
    question: str
    task: str
    scenario: str
    query_type: str
    answered: bool
    prediction: float | str | None = None
    truth: float | str | None = None
    metric_name: str = ""
    abs_error: float | None = None
    correct: bool | None = None
    exclusion_reason: str = ""

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "task": self.task,
            "scenario": self.scenario,
            "query_type": self.query_type,
            "answered": self.answered,
            "prediction": self.prediction,
            "truth": self.truth,
            "metric_name": self.metric_name,
            "abs_error": self.abs_error,
            "correct": self.correct,
            "exclusion_reason": self.exclusion_reason,
        }


@dataclass
class PredsetResult:
    records: list[QuestionScore] = field(default_factory=list)

    @property
    def mae(self) -> float | None:
        errors = [r.abs_error for r in self.records if r.abs_error is not None]
        if not errors:
            return None
        return sum(errors) / len(errors)

    @property
    def coverage(self) -> float:
        if not self.records:
            return 0.0
        scored = sum(1 for r in self.records if r.abs_error is not None)
        return scored / len(self.records)


@dataclass
class QnasetResult:
    records: list[QuestionScore] = field(default_factory=list)

    @property
    def accuracy(self) -> float | None:
        if not self.records:
            return None
        return sum(1 for r in self.records if r.correct) / len(self.records)


def canonicalize_label(label: str, aliases: dict[str, str] | None = None) -> str:
    """Case-fold, trim, strip trailing punctuation, then alias-map."""
    cleaned = label.strip().strip(".,;:").casefold()
    if aliases:
        folded = {k.casefold(): v for k, v in aliases.items()}
        canonical = folded.get(cleaned)
        if canonical is not None:
            return canonical.casefold()
    return cleaned


def _pick_numeric_value(
    prediction: ExtractedPrediction,
    truth: GroundTruth,
    task: str,
    registry: MetricRegistry,
) -> tuple[float | None, str, str]:
    """Choose the extracted metric compatible with the ground-truth family.

    Returns (value, metric_name, exclusion_reason); value None means the
    question does not enter the MAE.
    """
    if not prediction.is_answer_present or not prediction.metrics:
        return None, "", "unanswered"
    assert truth.answer_numeric is not None
    truth_metric = truth.answer_numeric.metric_name
    try:
        truth_family = registry.family_of(task, truth_metric)
    except MetricError:
        return None, "", "ground-truth metric unknown to registry"
    members = {spec.name.lower() for spec in truth_family.metrics}
    for metric in prediction.metrics:
        if metric.metric_name.lower() in members:
            return metric.value_in_100_range, metric.metric_name, ""
    return None, "", "no metric compatible with ground truth"


def score_predset(
    questions: list[Question],
    predictions: list[ExtractedPrediction],
    ground_truths: list[GroundTruth],
    registry: MetricRegistry | None = None,
) -> PredsetResult:
    """Absolute error per answered, metric-compatible numeric question."""
    registry = registry or default_registry()
    if not len(questions) == len(predictions) == len(ground_truths):
        raise ValueError("questions, predictions, ground truths must align")
    result = PredsetResult()
    for question, prediction, truth in zip(questions, predictions, ground_truths):
        value, metric_name, reason = _pick_numeric_value(
            prediction, truth, question.task, registry
        )
        truth_value = truth.answer_numeric.normalized if truth.answer_numeric else None
        if value is None or truth_value is None:
            result.records.append(
                QuestionScore(
                    question=question.complete_question,
                    task=question.task,
                    scenario=question.scenario.value,
                    query_type=question.query_type.value,
                    answered=prediction.is_answer_present and bool(prediction.metrics),
                    truth=truth_value,
                    exclusion_reason=reason or "no ground truth",
                )
            )
            continue
        result.records.append(
            QuestionScore(
                question=question.complete_question,
                task=question.task,
                scenario=question.scenario.value,
                query_type=question.query_type.value,
                answered=True,
                prediction=value,
                truth=truth_value,
                metric_name=metric_name,
                abs_error=abs(value - truth_value),
            )
        )
    return result


def score_qnaset(
    questions: list[Question],
    predictions: list[ExtractedPrediction],
    ground_truths: list[GroundTruth],
    aliases: dict[str, str] | None = None,
) -> QnasetResult:
    """Label match after canonicalization; unanswered counts as incorrect."""
    if not len(questions) == len(predictions) == len(ground_truths):
        raise ValueError("questions, predictions, ground truths must align")
    result = QnasetResult()
    for question, prediction, truth in zip(questions, predictions, ground_truths):
        answered = prediction.is_answer_present and bool(prediction.answer_text)
        correct = False
        if answered and truth.answer_label:
            correct = canonicalize_label(
                prediction.answer_text, aliases
            ) == canonicalize_label(truth.answer_label, aliases)
        result.records.append(
            QuestionScore(
                question=question.complete_question,
                task=question.task,
                scenario=question.scenario.value,
                query_type=question.query_type.value,
                answered=answered,
                prediction=prediction.answer_text or None,
                truth=truth.answer_label,
                correct=correct,
                exclusion_reason="" if answered else "unanswered",
            )
        )
    return result


@dataclass
class ScoreReport:
    """Per-question records plus MAE/accuracy aggregates and coverage."""

    predset: PredsetResult
    qnaset: QnasetResult

    @property
    def records(self) -> list[QuestionScore]:
        return list(self.predset.records) + list(self.qnaset.records)

    def to_dict(self) -> dict:
        return {
            "mae_overall": self.predset.mae,
            "accuracy_overall": self.qnaset.accuracy,
            "coverage": self.predset.coverage,
            "n_numeric": len(self.predset.records),
            "n_comparative": len(self.qnaset.records),
            "records": [r.to_dict() for r in self.records],
        }


def build_score_report(
    questions: list[Question],
    predictions: list[ExtractedPrediction],
    ground_truths: list[GroundTruth],
    registry: MetricRegistry | None = None,
    aliases: dict[str, str] | None = None,
) -> ScoreReport:
    numeric = [
        (q, p, t)
        for q, p, t in zip(questions, predictions, ground_truths)
        if q.query_type is QueryType.NUMERIC_PREDICTION
    ]
    comparative = [
        (q, p, t)
        for q, p, t in zip(questions, predictions, ground_truths)
        if q.query_type is QueryType.COMPARATIVE_REASONING
    ]
    predset = score_predset(
        [q for q, _, _ in numeric],
        [p for _, p, _ in numeric],
        [t for _, _, t in numeric],
        registry,
    )
    qnaset = score_qnaset(
        [q for q, _, _ in comparative],
        [p for _, p, _ in comparative],
        [t for _, _, t in comparative],
        aliases,
    )
    return ScoreReport(predset=predset, qnaset=qnaset)


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def breakdown(report: ScoreReport) -> dict:
    """Per-task, per-scenario, overall, and per-metric MAE tables."""

    def group(records: list[QuestionScore], key) -> dict[str, dict]:
        table: dict[str, dict] = {}
        for record in records:
            table.setdefault(key(record), {"errors": [], "correct": 0, "n_acc": 0})
        for record in records:
            cell = table[key(record)]
            if record.abs_error is not None:
                cell["errors"].append(record.abs_error)
            if record.correct is not None:
                cell["n_acc"] += 1
                cell["correct"] += 1 if record.correct else 0
        return {
            name: {
                "mae": _mean(cell["errors"]),
                "n_scored": len(cell["errors"]),
                "accuracy": (cell["correct"] / cell["n_acc"]) if cell["n_acc"] else None,
                "n_comparative": cell["n_acc"],
            }
            for name, cell in sorted(table.items())
        }

    records = report.records
    per_metric: dict[str, list[float]] = {}
    for record in report.predset.records:
        if record.abs_error is not None and record.metric_name:
            per_metric.setdefault(record.metric_name.lower(), []).append(record.abs_error)
    return {
        "overall": {
            "mae": report.predset.mae,
            "accuracy": report.qnaset.accuracy,
            "coverage": report.predset.coverage,
            "n_questions": len(records),
        },
        "per_task": group(records, lambda r: r.task),
        "per_scenario": group(records, lambda r: r.scenario),
        "per_metric_mae": {
            name: {"mae": _mean(errors), "n_scored": len(errors)}
            for name, errors in sorted(per_metric.items())
        },
    }


def breakdown_csv(tables: dict) -> str:
    """Flat CSV mirror of the breakdown tables."""
    lines = ["section,cell,mae,n_scored,accuracy,n_comparative"]

    def fmt(value) -> str:
        if value is None:
            return ""
        if isinstance(value, float):
            return f"{value:.4f}"
        return str(value)

    overall = tables["overall"]
    lines.append(
        f"overall,overall,{fmt(overall['mae'])},,{fmt(overall['accuracy'])},"
    )
    for section in ("per_task", "per_scenario"):
        for cell, stats in tables[section].items():
            lines.append(
                f"{section},{cell},{fmt(stats['mae'])},{stats['n_scored']},"
                f"{fmt(stats['accuracy'])},{stats['n_comparative']}"
            )
    for metric, stats in tables["per_metric_mae"].items():
        lines.append(
            f"per_metric,{metric},{fmt(stats['mae'])},{stats['n_scored']},,"
        )
    return "\n".join(lines) + "\n"


def write_report(report: ScoreReport, directory: str | Path, extras: dict | None = None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tables = breakdown(report)
    summary = {**report.to_dict(), "breakdown": tables}
    summary.pop("records")
    if extras:
        summary.update(extras)
    (directory / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (directory / "summary.csv").write_text(breakdown_csv(tables), encoding="utf-8")
    lines = [
        json.dumps(record.to_dict(), sort_keys=True, ensure_ascii=False)
        for record in report.records
    ]
    (directory / "scores.jsonl").write_text(
        "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8"
    )
