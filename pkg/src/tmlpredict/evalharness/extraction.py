"""Structured prediction extraction from agent research reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..orchestrator.backends import AgentBackend, BackendProtocolError, REASK_MARKER
from ..orchestrator.store import canonical_dumps
from ..scenario import QueryType


class ExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExtractedMetric:
    metric_name: str
    value: str
    value_in_100_range: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.value_in_100_range <= 100.0:
            raise ExtractionError(
                f"value_in_100_range out of range: {self.value_in_100_range}"
            )

    def to_dict(self) -> dict:
        return {
            "metric_name": self.metric_name,
            "value": self.value,
            "value_in_100_range": self.value_in_100_range,
        }


@dataclass(frozen=True)
class ExtractedPrediction:
    is_answer_present: bool
    metrics: tuple[ExtractedMetric, ...] = ()
    answer_text: str = ""

    def to_dict(self) -> dict:
        return {
            "is_answer_present": self.is_answer_present,
            "predicted_metrics_and_values_for_predictive": [
                m.to_dict() for m in self.metrics
            ],
            "answer_text_for_qna": self.answer_text,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExtractedPrediction":
        metrics = tuple(
            ExtractedMetric(
                metric_name=str(m["metric_name"]),
                value=str(m["value"]),
                value_in_100_range=float(m["value_in_100_range"]),
            )
            for m in raw.get("predicted_metrics_and_values_for_predictive") or ()
        )
        answer = raw.get("answer_text_for_qna", "")
        if not isinstance(answer, str):
            raise ExtractionError("answer_text_for_qna must be a string")
        if not isinstance(raw.get("is_answer_present"), bool):
            raise ExtractionError("is_answer_present must be a boolean")
        return cls(
            is_answer_present=raw["is_answer_present"],
            metrics=metrics,
            answer_text=answer,
        )


def extract_prediction(
    report: str,
    query_type: QueryType,
    backend: AgentBackend,
    user_query: str = "",
) -> ExtractedPrediction:
    """Parse a report into the extraction schema; one re-ask, then hard error."""
    if not report:
        raise ExtractionError("cannot extract from an empty report")
    context = {"query_type": query_type.value}
    message = canonical_dumps({"user_query": user_query, "report": report})

    def attempt(msg: str) -> ExtractedPrediction:
        response = backend.send("extractor", context, msg)
        return ExtractedPrediction.from_dict(json.loads(response))

    try:
        return attempt(message)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, ExtractionError):
        pass
    try:
        return attempt(f"{message}\n{REASK_MARKER}")
    except (
        json.JSONDecodeError,
        KeyError,
        TypeError,
        ValueError,
        ExtractionError,
    ) as exc:
        raise ExtractionError(f"extractor output malformed after retry: {exc}") from exc
    except BackendProtocolError as exc:
        raise ExtractionError(str(exc)) from exc
