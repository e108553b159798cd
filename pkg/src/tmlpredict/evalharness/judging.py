"""Rubric-based report judging with a locally recomputed verdict.

The backend scores four axes 1-5 (null when unassessable); the verdict is
always recomputed here from the average so a backend cannot emit an
inconsistent recommendation: >= 4.25 accept, >= 3.25 minor revision,
>= 2.5 major revision, below that reject.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from ..orchestrator.backends import AgentBackend, REASK_MARKER
from ..orchestrator.store import canonical_dumps


class JudgeError(RuntimeError):
    pass


class Verdict(str, Enum):
    ACCEPT = "accept"
    MINOR_REVISION = "minor_revision"
    MAJOR_REVISION = "major_revision"
    REJECT = "reject"


JUDGE_AXES = (
    "predictive_plausibility",
    "feature_selection",
    "coherence",
    "citation_emphasis",
)


def verdict_for(average: float) -> Verdict:
    if average >= 4.25:
        return Verdict.ACCEPT
    if average >= 3.25:
        return Verdict.MINOR_REVISION
    if average >= 2.5:
        return Verdict.MAJOR_REVISION
    return Verdict.REJECT


@dataclass(frozen=True)
class JudgeScores:
    predictive_plausibility: int | None
    feature_selection: int | None
    coherence: int | None
    citation_emphasis: int | None
    average: float
    verdict: Verdict

    def to_dict(self) -> dict:
        return {
            "predictive_plausibility": self.predictive_plausibility,
            "feature_selection": self.feature_selection,
            "coherence": self.coherence,
            "citation_emphasis": self.citation_emphasis,
            "average": self.average,
            "verdict": self.verdict.value,
        }


def scores_from_values(values: dict[str, int | None]) -> JudgeScores:
    present = [v for v in values.values() if v is not None]
    if not present:
        raise JudgeError("judge scored no axes")
    for v in present:
        if not 1 <= v <= 5:
            raise JudgeError(f"judge score out of range: {v}")
    average = round(sum(present) / len(present), 2)
    return JudgeScores(
        predictive_plausibility=values.get("predictive_plausibility"),
        feature_selection=values.get("feature_selection"),
        coherence=values.get("coherence"),
        citation_emphasis=values.get("citation_emphasis"),
        average=average,
        verdict=verdict_for(average),
    )


def _parse_judge(response: str) -> JudgeScores:
    raw = json.loads(response)
    values: dict[str, int | None] = {}
    for entry in raw["metrics"]:
        name = entry["metric_name"]
        if name not in JUDGE_AXES:
            raise JudgeError(f"unknown judge axis {name!r}")
        score = entry.get("score")
        values[name] = None if score is None else int(score)
    missing = set(JUDGE_AXES) - set(values)
    if missing:
        raise JudgeError(f"judge omitted axes: {sorted(missing)}")
    return scores_from_values(values)


def judge_report(report: str, backend: AgentBackend) -> JudgeScores:
    """Score one report; re-ask once on malformed output, then raise."""
    context: dict = {}
    message = canonical_dumps({"report": report})

    def attempt(msg: str) -> JudgeScores:
        return _parse_judge(backend.send("judge", context, msg))

    try:
        return attempt(message)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, JudgeError):
        pass
    try:
        return attempt(f"{message}\n{REASK_MARKER}")
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, JudgeError) as exc:
        raise JudgeError(f"judge output malformed after retry: {exc}") from exc
