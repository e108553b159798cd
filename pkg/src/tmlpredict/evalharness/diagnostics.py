"""Agent-reasoning diagnostics replayed from conversation event logs.

Five rates: hypothesis faithfulness to the expert guidance, capability
compliance of proposed methods, web-search relevance against the owning
hypothesis, validity of features chosen by analysis artifacts, and code
execution success read from artifact status flags. Judge calls that stay
malformed after a retry are excluded from their rate and counted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

from ..orchestrator.backends import AgentBackend, REASK_MARKER
from ..orchestrator.dag import (
    EVENT_THOUGHT_CREATED,
    EVENT_TOOL_INVOKED,
    EVENT_TURN_STARTED,
)
from ..orchestrator.engine import EVENT_THOUGHT_REJECTED
from ..orchestrator.store import Event, canonical_dumps


@dataclass
class DiagnosticsReport:
    thought_faithfulness_rate: float | None = None
    capability_compliance_rate: float | None = None
    web_search_relevance_rate: float | None = None
    feature_correctness_rate: float | None = None
    code_execution_success_rate: float | None = None
    evaluated: dict[str, int] = field(default_factory=dict)
    unevaluable: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "thought_faithfulness_rate": self.thought_faithfulness_rate,
            "capability_compliance_rate": self.capability_compliance_rate,
            "web_search_relevance_rate": self.web_search_relevance_rate,
            "feature_correctness_rate": self.feature_correctness_rate,
            "code_execution_success_rate": self.code_execution_success_rate,
            "evaluated": dict(self.evaluated),
            "unevaluable": dict(self.unevaluable),
        }


def _rate(positives: int, evaluated: int) -> float | None:
    return positives / evaluated if evaluated else None


def _ask_json(backend: AgentBackend, role: str, context: dict, message: str):
    try:
        return json.loads(backend.send(role, context, message))
    except (json.JSONDecodeError, TypeError, ValueError):
        pass
    try:
        return json.loads(backend.send(role, context, f"{message}\n{REASK_MARKER}"))
    except (json.JSONDecodeError, TypeError, ValueError):
        return None


def run_diagnostics(
    logs: Iterable[tuple[str, list[Event]]], backend: AgentBackend
) -> DiagnosticsReport:
    report = DiagnosticsReport()
    faithful = faith_n = 0
    compliant = comply_n = 0
    relevant = relevance_n = 0
    features_ok = features_n = 0
    exec_ok = exec_n = 0
    unevaluable = {"faithfulness": 0, "compliance": 0, "relevance": 0, "features": 0}

    for conversation_id, events in logs:
        guidance: list = []
        thoughts_by_turn: dict[int, list[dict]] = {}
        guidance_by_turn: dict[int, list] = {}
        node_context: dict[str, dict] = {}
        search_calls: list[tuple[str, str]] = []
        artifacts: list[dict] = []

        for event in events:
            payload = event.payload
            if event.type == EVENT_TURN_STARTED:
                guidance = payload.get("guidance", [])
                guidance_by_turn[payload["turn"]] = guidance
            elif event.type == EVENT_THOUGHT_CREATED:
                turn = payload.get("turn", 1)
                entry = {
                    "thought_name": payload["node_id"],
                    "hypothesis": payload["hypothesis"],
                    "method": payload["method"],
                }
                thoughts_by_turn.setdefault(turn, []).append(entry)
                node_context[payload["node_id"]] = entry
            elif event.type == EVENT_THOUGHT_REJECTED:
                turn = max(guidance_by_turn, default=1)
                thoughts_by_turn.setdefault(turn, []).append(
                    {
                        "thought_name": f"rejected:{len(thoughts_by_turn.get(turn, []))}",
                        "hypothesis": payload["hypothesis"],
                        "method": payload["method"],
                    }
                )
            elif event.type == EVENT_TOOL_INVOKED and payload.get("status") == "ok":
                if payload.get("tool") == "search":
                    search_calls.append(
                        (payload["node_id"], payload.get("inputs", {}).get("query", ""))
                    )
                elif payload.get("tool") == "coder":
                    for item in payload.get("evidence", []):
                        if item.get("kind") == "analysis":
                            artifacts.append(item["content"])

        for turn, thoughts in sorted(thoughts_by_turn.items()):
            message = canonical_dumps(
                {
                    "guidance": guidance_by_turn.get(turn, []),
                    "thoughts": thoughts,
                }
            )
            parsed = _ask_json(backend, "faithfulness_judge", {}, message)
            if parsed is None or "evaluations" not in parsed:
                unevaluable["faithfulness"] += 1
            else:
                for entry in parsed["evaluations"]:
                    faith_n += 1
                    faithful += 1 if entry.get("is_faithful") else 0
            parsed = _ask_json(backend, "compliance_judge", {}, message)
            if parsed is None or "evaluations" not in parsed:
                unevaluable["compliance"] += 1
            else:
                for entry in parsed["evaluations"]:
                    comply_n += 1
                    compliant += 1 if entry.get("is_compliant") else 0

        for node_id, query in search_calls:
            ctx = node_context.get(node_id, {})
            message = canonical_dumps(
                {
                    "thought_name": node_id,
                    "hypothesis": ctx.get("hypothesis", ""),
                    "method": ctx.get("method", ""),
                    "tool_query": query,
                }
            )
            parsed = _ask_json(backend, "relevance_judge", {}, message)
            if parsed is None or "is_relevant" not in parsed:
                unevaluable["relevance"] += 1
            else:
                relevance_n += 1
                relevant += 1 if parsed["is_relevant"] else 0

        for artifact in artifacts:
            exec_n += 1
            exec_ok += 1 if artifact.get("execution_status") == "success" else 0
            message = canonical_dumps(
                {"task_context": "", "user_question": "", "artifact": artifact}
            )
            parsed = _ask_json(backend, "code_judge", {}, message)
            if parsed is None or "feature_engineering_level" not in parsed:
                unevaluable["features"] += 1
            else:
                features_n += 1
                level = parsed.get("feature_engineering_level")
                has_features = bool(parsed.get("features_used"))
                features_ok += 1 if (has_features and level != "none") else 0

    report.thought_faithfulness_rate = _rate(faithful, faith_n)
    report.capability_compliance_rate = _rate(compliant, comply_n)
    report.web_search_relevance_rate = _rate(relevant, relevance_n)
    report.feature_correctness_rate = _rate(features_ok, features_n)
    report.code_execution_success_rate = _rate(exec_ok, exec_n)
    report.evaluated = {
        "faithfulness": faith_n,
        "compliance": comply_n,
        "relevance": relevance_n,
        "features": features_n,
        "execution": exec_n,
    }
    report.unevaluable = unevaluable
    return report
