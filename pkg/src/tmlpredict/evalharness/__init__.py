"""Evaluation harness: extraction, scoring, judging, diagnostics."""

from .diagnostics import DiagnosticsReport, run_diagnostics
from .extraction import (
    ExtractedMetric,
    ExtractedPrediction,
    ExtractionError,
    extract_prediction,
)
from .judging import (
    JUDGE_AXES,
    JudgeError,
    JudgeScores,
    Verdict,
    judge_report,
    scores_from_values,
    verdict_for,
)
from .scoring import (
    PredsetResult,
    QnasetResult,
    QuestionScore,
    ScoreReport,
    breakdown,
    breakdown_csv,
    build_score_report,
    canonicalize_label,
    score_predset,
    score_qnaset,
    write_report,
)

__all__ = [
    "DiagnosticsReport",
    "ExtractedMetric",
    "ExtractedPrediction",
    "ExtractionError",
    "JUDGE_AXES",
    "JudgeError",
    "JudgeScores",
    "PredsetResult",
    "QnasetResult",
    "QuestionScore",
    "ScoreReport",
    "Verdict",
    "breakdown",
    "breakdown_csv",
    "build_score_report",
    "canonicalize_label",
    "extract_prediction",
    "judge_report",
    "run_diagnostics",
    "score_predset",
    "score_qnaset",
    "scores_from_values",
    "verdict_for",
    "write_report",
]
