"""Hypothesis DAG: thought nodes with a lifecycle, evidence trails, replay.

Every mutation of a conversation is recorded as an append-only event; a DAG
snapshot is a pure fold over its event sequence, so any point-in-time state
can be reconstructed from the log alone and the log doubles as the audit
trail for diagnostics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from ..scenario import TmlQuery


class DagError(ValueError):
    pass


class NodeState(str, Enum):
    ACTIVE = "active"
    COMPLETED = "completed"
    DISCARDED = "discarded"


#: the only legal lifecycle transitions
ALLOWED_TRANSITIONS = {
    (NodeState.ACTIVE, NodeState.COMPLETED),
    (NodeState.ACTIVE, NodeState.DISCARDED),
}


@dataclass(frozen=True)
class EvidenceItem:
    kind: str  # corpus | kb | search | analysis
    content: dict
    citation: dict
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "content": self.content,
            "citation": self.citation,
            "flags": self.flags,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "EvidenceItem":
        return cls(
            kind=raw["kind"],
            content=raw.get("content", {}),
            citation=raw.get("citation", {}),
            flags=raw.get("flags", {}),
        )


@dataclass
class ThoughtNode:
    """One hypothesis investigation unit."""

    node_id: str
    hypothesis: str
    method: str
    tools: tuple[str, ...] = ()
    lookups: tuple[tuple[str, str], ...] = ()
    state: NodeState = NodeState.ACTIVE
    evidence_trail: list[EvidenceItem] = field(default_factory=list)
    report: str | None = None
    annotations: list[str] = field(default_factory=list)

    def transition(self, new_state: NodeState, report: str | None = None) -> None:
        if (self.state, new_state) not in ALLOWED_TRANSITIONS:
            raise DagError(
                f"{self.node_id}: illegal transition {self.state.value} -> {new_state.value}"
            )
        if new_state is NodeState.COMPLETED and not report:
            raise DagError(f"{self.node_id}: completion requires a report")
        if new_state is NodeState.DISCARDED:
            report = None
        self.state = new_state
        self.report = report

    @property
    def is_terminal(self) -> bool:
        return self.state is not NodeState.ACTIVE

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "hypothesis": self.hypothesis,
            "method": self.method,
            "tools": list(self.tools),
            "lookups": [list(p) for p in self.lookups],
            "state": self.state.value,
            "evidence_trail": [e.to_dict() for e in self.evidence_trail],
            "report": self.report,
            "annotations": list(self.annotations),
        }


@dataclass(frozen=True)
class FinalResponse:
    """Aggregated prediction with citations and structured rationale."""

    prediction: dict
    citations: tuple[dict, ...]
    rationale: str
    uncertainty: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {
            "prediction": self.prediction,
            "citations": [dict(c) for c in self.citations],
            "rationale": self.rationale,
            "uncertainty": list(self.uncertainty) if self.uncertainty else None,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "FinalResponse":
        unc = raw.get("uncertainty")
        return cls(
            prediction=raw.get("prediction") or {"kind": "none"},
            citations=tuple(raw.get("citations") or ()),
            rationale=raw.get("rationale", ""),
            uncertainty=tuple(unc) if unc else None,
        )

    def as_report_text(self, query_text: str = "") -> str:
        """Render the response as a research report for extraction/judging."""
        lines = [f"Prediction report for: {query_text}".rstrip(": "), ""]
        lines.append(self.rationale)
        kind = self.prediction.get("kind")
        if kind == "numeric":
            lines.append(
                f"Predicted {self.prediction['metric_name']} of "
                f"{self.prediction['value_text']}."
            )
            if self.uncertainty:
                lo, hi = self.uncertainty
                lines.append(f"Confidence interval: {lo!r} to {hi!r}.")
        elif kind == "comparative":
            lines.append(f"Best model: {self.prediction['answer_label']}.")
        else:
            lines.append("No relevant evidence was found; no prediction is available.")
        if self.citations:
            lines.append("Citations:")
            for cit in self.citations:
                lines.append(f"- {json.dumps(cit, sort_keys=True)}")
        return "\n".join(lines)


@dataclass
class ConversationDag:
    conversation_id: str
    query: TmlQuery
    nodes: dict[str, ThoughtNode] = field(default_factory=dict)
    parents: dict[str, str | None] = field(default_factory=dict)
    final_response: FinalResponse | None = None
    turns: int = 0

    def add_node(self, node: ThoughtNode, parent: str | None = None) -> None:
        if node.node_id in self.nodes:
            raise DagError(f"duplicate node id {node.node_id}")
        if parent is not None and parent not in self.nodes:
            raise DagError(f"unknown parent {parent}")
        self.nodes[node.node_id] = node
        self.parents[node.node_id] = parent

    def active_nodes(self) -> list[ThoughtNode]:
        return [n for n in self._ordered() if n.state is NodeState.ACTIVE]

    def completed_nodes(self) -> list[ThoughtNode]:
        return [n for n in self._ordered() if n.state is NodeState.COMPLETED]

    def _ordered(self) -> list[ThoughtNode]:
        return [self.nodes[k] for k in sorted(self.nodes)]

    def set_final_response(self, response: FinalResponse) -> None:
        if self.active_nodes():
            raise DagError("cannot aggregate while nodes are active")
        self.final_response = response

    def snapshot(self) -> dict:
        return {
            "schema_version": 1,
            "conversation_id": self.conversation_id,
            "query": self.query.to_dict(),
            "turns": self.turns,
            "nodes": [n.to_dict() for n in self._ordered()],
            "edges": [
                {"parent": parent, "child": child}
                for child, parent in sorted(self.parents.items())
            ],
            "final_response": (
                self.final_response.to_dict() if self.final_response else None
            ),
        }


# --- event replay ----------------------------------------------------------

EVENT_CONVERSATION_STARTED = "conversation_started"
EVENT_TURN_STARTED = "turn_started"
EVENT_THOUGHT_CREATED = "thought_created"
EVENT_TOOL_INVOKED = "tool_invoked"
EVENT_STATE_CHANGED = "state_changed"
EVENT_ANALYSIS_COMPLETED = "analysis_completed"
EVENT_AGGREGATED = "aggregated"


def replay_dag(events: Iterable) -> ConversationDag:
    """Reconstruct a DAG snapshot by folding an event sequence."""
    dag: ConversationDag | None = None
    for event in events:
        etype = event.type
        payload = event.payload
        if etype == EVENT_CONVERSATION_STARTED:
            dag = ConversationDag(
                conversation_id=payload["conversation_id"],
                query=TmlQuery.from_dict(payload["query"]),
            )
        elif dag is None:
            raise DagError(f"event {etype!r} before {EVENT_CONVERSATION_STARTED}")
        elif etype == EVENT_TURN_STARTED:
            dag.turns = payload["turn"]
            dag.final_response = None
        elif etype == EVENT_THOUGHT_CREATED:
            node = ThoughtNode(
                node_id=payload["node_id"],
                hypothesis=payload["hypothesis"],
                method=payload["method"],
                tools=tuple(payload.get("tools", ())),
                lookups=tuple(tuple(p) for p in payload.get("lookups", ())),
            )
            dag.add_node(node, parent=payload.get("parent"))
        elif etype == EVENT_TOOL_INVOKED:
            node = dag.nodes[payload["node_id"]]
            for raw in payload.get("evidence", []):
                node.evidence_trail.append(EvidenceItem.from_dict(raw))
            annotation = payload.get("annotation")
            if annotation:
                node.annotations.append(annotation)
        elif etype == EVENT_STATE_CHANGED:
            node = dag.nodes[payload["node_id"]]
            node.transition(NodeState(payload["to"]), report=payload.get("report"))
            for annotation in payload.get("annotations", []):
                node.annotations.append(annotation)
        elif etype == EVENT_ANALYSIS_COMPLETED:
            pass  # bookkeeping only; spawn/discard carry their own events
        elif etype == EVENT_AGGREGATED:
            dag.set_final_response(FinalResponse.from_dict(payload["final_response"]))
    if dag is None:
        raise DagError("empty event sequence")
    return dag
