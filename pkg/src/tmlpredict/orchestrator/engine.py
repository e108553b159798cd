"""Conversation engine: decompose, investigate, analyze, aggregate.

A turn creates hypothesis nodes from the backend's decomposition, then
alternates analyzer barriers with investigation rounds until every node is
terminal or the round budget runs out. Active thoughts may run concurrently;
their events are buffered per node and appended in node-id order at each
barrier, so the event log is byte-identical regardless of parallelism.
"""

from __future__ import annotations

import json
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Protocol

from .. import metrics as metrics_mod
from ..corpus import CorpusView, ViewRole, canonicalize_task
from ..kb import RetrievalCache, RetrievalResult, VectorStore, cached_retrieve
from .backends import (
    AgentBackend,
    BackendProtocolError,
    REASK_MARKER,
    capability_violations,
)
from .dag import (
    EVENT_AGGREGATED,
    EVENT_ANALYSIS_COMPLETED,
    EVENT_CONVERSATION_STARTED,
    EVENT_STATE_CHANGED,
    EVENT_THOUGHT_CREATED,
    EVENT_TOOL_INVOKED,
    EVENT_TURN_STARTED,
    ConversationDag,
    EvidenceItem,
    FinalResponse,
    NodeState,
    ThoughtNode,
)
from .store import MemoryConversationStore, canonical_dumps
from ..scenario import TmlQuery


class OrchestratorError(RuntimeError):
    pass


class _ToolFailure(Exception):
    def __init__(self, tool: str):
        self.tool = tool


EVENT_THOUGHT_REJECTED = "thought_rejected"


@dataclass(frozen=True)
class OrchestratorConfig:
    max_thoughts: int = 5
    max_nodes: int = 12
    max_rounds: int = 4
    tool_retry: int = 1
    parallelism: int = 1
    kb_threshold: float = 0.90
    kb_top_k: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("max_thoughts", "max_nodes", "max_rounds", "parallelism"):
            if getattr(self, name) < 1:
                raise OrchestratorError(f"config {name} must be positive")
        if self.tool_retry < 0:
            raise OrchestratorError("config tool_retry must be >= 0")


@dataclass(frozen=True)
class ThoughtSpec:
    hypothesis: str
    method: str
    tools: tuple[str, ...]
    lookups: tuple[tuple[str, str], ...] = ()
    parent: str | None = None


class SearchProvider(Protocol):
    def search(self, query: str) -> list[dict]: ...


class FixtureSearchProvider:
    """Keyword-routed canned search results; the pluggable provider for tests."""

    def __init__(self, data: dict):
        self.default = list(data.get("default", ()))
        self.by_keyword = {k.lower(): list(v) for k, v in data.get("by_keyword", {}).items()}

    def search(self, query: str) -> list[dict]:
        lowered = query.lower()
        for keyword in sorted(self.by_keyword):
            if keyword in lowered:
                return list(self.by_keyword[keyword])
        return list(self.default)


class FailingSearchProvider:
    """Test double that raises for the first `fail_times` calls (-1 = always)."""

    def __init__(self, inner: SearchProvider | None = None, fail_times: int = -1):
        self.inner = inner
        self.fail_times = fail_times
        self.calls = 0

    def search(self, query: str) -> list[dict]:
        self.calls += 1
        if self.fail_times < 0 or self.calls <= self.fail_times:
            raise ConnectionError("search provider unavailable")
        if self.inner is None:
            return []
        return self.inner.search(query)


@dataclass
class ExpertKnowledgeTool:
    """Curated-KB retrieval plus restricted corpus record lookups.

    All record access goes through a ReducedOnly view, which is what makes
    inference-time evidence restriction structural rather than advisory.
    """

    reduced_view: CorpusView
    store: VectorStore | None = None
    embedder: object | None = None
    cache: RetrievalCache = field(default_factory=RetrievalCache)
    threshold: float = 0.90
    top_k: int = 2

    def __post_init__(self) -> None:
        if self.reduced_view.role is not ViewRole.REDUCED_ONLY:
            raise OrchestratorError("expert knowledge tool requires a reduced-only view")

    def retrieve(self, text: str) -> list[RetrievalResult]:
        if self.store is None or self.embedder is None or len(self.store) == 0:
            return []
        return cached_retrieve(
            text,
            self.embedder.embed(text),
            self.store,
            self.cache,
            threshold=self.threshold,
            k=self.top_k,
        )

    def lookup_records(self, task: str, language: str, family: str):
        return self.reduced_view.lookup(task, language, family)


@dataclass
class ToolSet:
    kb: ExpertKnowledgeTool
    search: SearchProvider | None = None


@dataclass(frozen=True)
class Route:
    kind: str  # "new" | "follow_up"
    conversation_id: str | None = None


def route_query(store, conversation_id: str | None, text: str) -> Route:
    """New conversation when no id is supplied; follow-up attaches to one."""
    if conversation_id is None:
        return Route(kind="new")
    if not store.exists(conversation_id):
        raise OrchestratorError(f"unknown conversation {conversation_id!r}")
    return Route(kind="follow_up", conversation_id=conversation_id)


def capability_check(method: str) -> list[str]:
    """Prohibited operations referenced by a hypothesis method."""
    return capability_violations(method)


def ask_structured(
    backend: AgentBackend, role: str, context: dict, message: str, parser
):
    """Send, parse, re-ask once on a malformed response, then fail hard."""
    response = backend.send(role, context, message)
    try:
        return parser(response)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
        pass
    retry_message = f"{message}\n{REASK_MARKER}"
    response = backend.send(role, context, retry_message)
    try:
        return parser(response)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise BackendProtocolError(
            f"role {role!r} returned malformed output after retry: {exc}"
        ) from exc


def _parse_thought_specs(response: str) -> list[ThoughtSpec]:
    raw = json.loads(response)
    specs = []
    for entry in raw["thoughts"]:
        hypothesis = str(entry["hypothesis"]).strip()
        method = str(entry["method"]).strip()
        if not hypothesis or not method:
            raise ValueError("hypothesis and method must be nonempty")
        specs.append(
            ThoughtSpec(
                hypothesis=hypothesis,
                method=method,
                tools=tuple(entry.get("tools") or ("kb", "reporter")),
                lookups=tuple(
                    (str(lang), str(fam)) for lang, fam in entry.get("lookups") or ()
                ),
            )
        )
    return specs


@dataclass
class AnalyzerDecision:
    spawn: list[ThoughtSpec] = field(default_factory=list)
    discard: list[str] = field(default_factory=list)
    rejected_discards: list[str] = field(default_factory=list)
    rejected_spawns: list[str] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.spawn and not self.discard


class ConversationEngine:
    """Shared-everything engine; per-conversation turns are externally serialized."""

    def __init__(
        self,
        backend: AgentBackend,
        tools: ToolSet,
        config: OrchestratorConfig,
        store=None,
        registry: metrics_mod.MetricRegistry | None = None,
    ):
        self.backend = backend
        self.tools = tools
        self.config = config
        self.store = store if store is not None else MemoryConversationStore()
        self.registry = registry or metrics_mod.default_registry()

    # -- public API -----------------------------------------------------------

    def route_query(self, conversation_id: str | None, text: str) -> Route:
        return route_query(self.store, conversation_id, text)

    def start(self, query: TmlQuery, conversation_id: str | None = None) -> ConversationDag:
        conversation_id = conversation_id or f"c{uuid.uuid4().hex[:12]}"
        if self.store.exists(conversation_id):
            raise OrchestratorError(f"conversation {conversation_id!r} already exists")
        dag = ConversationDag(conversation_id=conversation_id, query=query)
        self.store.append(
            conversation_id,
            EVENT_CONVERSATION_STARTED,
            {"conversation_id": conversation_id, "query": query.to_dict()},
        )
        self._run_turn(dag, turn=1, text=query.text, follow_up=None)
        return dag

    def follow_up(self, conversation_id: str, text: str) -> ConversationDag:
        route = self.route_query(conversation_id, text)
        assert route.kind == "follow_up"
        from .dag import replay_dag

        dag = replay_dag(self.store.read(conversation_id))
        previous = {
            "final_response": dag.final_response.to_dict() if dag.final_response else None,
            "node_summaries": [
                {
                    "node_id": n.node_id,
                    "hypothesis": n.hypothesis,
                    "state": n.state.value,
                }
                for n in dag.completed_nodes()
            ],
        }
        self._run_turn(dag, turn=dag.turns + 1, text=text, follow_up=previous)
        return dag

    def load(self, conversation_id: str) -> ConversationDag:
        from .dag import replay_dag

        return replay_dag(self.store.read(conversation_id))

    # -- turn internals ---------------------------------------------------------

    def _summary(self, task: str) -> dict:
        view = self.tools.kb.reduced_view
        task = canonicalize_task(task)
        families = view.families(task)
        return {
            "languages": view.languages(task),
            "families": families,
            "observed": {
                fam: view.observed_languages_for_family(task, fam) for fam in families
            },
            "families_for_language": {
                lang: view.families_for_language(task, lang)
                for lang in view.languages(task)
            },
        }

    def _run_turn(
        self, dag: ConversationDag, turn: int, text: str, follow_up: dict | None
    ) -> None:
        cid = dag.conversation_id
        log = self.store
        query = dag.query

        try:
            guidance = [
                {"doc_id": r.document.doc_id, "text": r.document.text}
                for r in self.tools.kb.retrieve(text or query.text)
            ]
        except Exception:  # degraded turn: thoughts proceed without guidance
            guidance = []
        dag.turns = turn
        dag.final_response = None
        log.append(
            cid,
            EVENT_TURN_STARTED,
            {"turn": turn, "text": text, "guidance": guidance},
        )

        creator_context = {
            "query": query.to_dict(),
            "guidance": guidance,
            "reduced_summary": self._summary(query.task),
            "previous": follow_up,
            "follow_up": text if follow_up else None,
        }
        specs = self.create_thoughts(
            creator_context, existing=len(dag.nodes), conversation_id=cid
        )
        round_no = 0
        for spec in specs:
            self._add_node(dag, spec, round_no=round_no, turn=turn)

        while round_no < self.config.max_rounds:
            round_no += 1
            decision = self.analyze_thoughts(dag)
            self._apply_decision(dag, decision, round_no=round_no, turn=turn)
            active = dag.active_nodes()
            if not active:
                break
            self._run_active(dag, active)

        leftovers = dag.active_nodes()
        if leftovers:
            for node in leftovers:
                report = (
                    f"Hypothesis: {node.hypothesis}\n"
                    "Investigation did not finish within the round budget; "
                    "partial evidence only."
                )
                node.transition(NodeState.COMPLETED, report=report)
                node.annotations.append("forced_completion")
                log.append(
                    cid,
                    EVENT_STATE_CHANGED,
                    {
                        "node_id": node.node_id,
                        "from": "active",
                        "to": "completed",
                        "report": report,
                        "annotations": ["forced_completion"],
                    },
                )

        final = self.aggregate(dag)
        dag.set_final_response(final)
        log.append(
            cid,
            EVENT_AGGREGATED,
            {"turn": turn, "final_response": final.to_dict()},
        )

    def _add_node(
        self, dag: ConversationDag, spec: ThoughtSpec, round_no: int, turn: int
    ) -> ThoughtNode:
        node = ThoughtNode(
            node_id=f"t{len(dag.nodes) + 1:03d}",
            hypothesis=spec.hypothesis,
            method=spec.method,
            tools=spec.tools,
            lookups=spec.lookups,
        )
        dag.add_node(node, parent=spec.parent)
        self.store.append(
            dag.conversation_id,
            EVENT_THOUGHT_CREATED,
            {
                "node_id": node.node_id,
                "parent": spec.parent,
                "hypothesis": node.hypothesis,
                "method": node.method,
                "tools": list(node.tools),
                "lookups": [list(p) for p in node.lookups],
                "round": round_no,
                "turn": turn,
            },
        )
        return node

    # -- operations -------------------------------------------------------------

    def create_thoughts(
        self, context: dict, existing: int = 0, conversation_id: str | None = None
    ) -> list[ThoughtSpec]:
        """Decompose the query into 1..max_thoughts capability-compliant specs."""
        capacity = self.config.max_nodes - existing
        if capacity <= 0:
            raise OrchestratorError("node budget exhausted; cannot create thoughts")
        specs = ask_structured(
            self.backend,
            "thought_creator",
            context,
            "Propose hypothesis investigations for this query.",
            _parse_thought_specs,
        )
        if not specs:
            raise OrchestratorError("backend proposed no hypotheses")
        accepted: list[ThoughtSpec] = []
        for spec in specs:
            violations = capability_check(spec.method)
            if violations:
                if conversation_id is not None:
                    self.store.append(
                        conversation_id,
                        EVENT_THOUGHT_REJECTED,
                        {
                            "hypothesis": spec.hypothesis,
                            "method": spec.method,
                            "violations": violations,
                        },
                    )
                continue
            accepted.append(spec)
        if not accepted:
            raise OrchestratorError(
                "every proposed hypothesis violates system capabilities"
            )
        limit = min(self.config.max_thoughts, capacity)
        return accepted[:limit]

    def analyze_thoughts(self, dag: ConversationDag) -> AnalyzerDecision:
        """Spawn/discard decision over the current DAG; empty when all terminal."""
        if not dag.nodes:
            raise OrchestratorError("cannot analyze an empty DAG")
        if not dag.active_nodes():
            return AnalyzerDecision()
        context = {
            "query": dag.query.to_dict(),
            "nodes": [
                {
                    "node_id": n.node_id,
                    "hypothesis": n.hypothesis,
                    "method": n.method,
                    "state": n.state.value,
                    "n_evidence": len(n.evidence_trail),
                    "has_report": n.report is not None,
                }
                for n in sorted(dag.nodes.values(), key=lambda n: n.node_id)
            ],
            "capacity": self.config.max_nodes - len(dag.nodes),
            "families": self.tools.kb.reduced_view.families(dag.query.task),
        }

        def parse(response: str) -> AnalyzerDecision:
            raw = json.loads(response)
            spawn = [
                ThoughtSpec(
                    hypothesis=str(e["hypothesis"]).strip(),
                    method=str(e["method"]).strip(),
                    tools=tuple(e.get("tools") or ("kb", "reporter")),
                    lookups=tuple(
                        (str(lang), str(fam)) for lang, fam in e.get("lookups") or ()
                    ),
                )
                for e in raw.get("spawn", [])
            ]
            discard = [str(x) for x in raw.get("discard", [])]
            return AnalyzerDecision(spawn=spawn, discard=discard)

        decision = ask_structured(
            self.backend,
            "thought_analyzer",
            context,
            "Decide which hypotheses to prune and whether gaps need new ones.",
            parse,
        )

        filtered = AnalyzerDecision()
        for node_id in decision.discard:
            node = dag.nodes.get(node_id)
            if node is None or node.state is not NodeState.ACTIVE:
                filtered.rejected_discards.append(node_id)
            else:
                filtered.discard.append(node_id)
        capacity = self.config.max_nodes - len(dag.nodes)
        for spec in decision.spawn:
            if capability_check(spec.method):
                filtered.rejected_spawns.append(spec.hypothesis)
                continue
            if capacity <= 0:
                filtered.rejected_spawns.append(spec.hypothesis)
                continue
            filtered.spawn.append(spec)
            capacity -= 1
        return filtered

    def _apply_decision(
        self, dag: ConversationDag, decision: AnalyzerDecision, round_no: int, turn: int
    ) -> None:
        if decision.empty and not decision.rejected_discards:
            return
        discarded_ids = []
        for node_id in decision.discard:
            node = dag.nodes[node_id]
            node.transition(NodeState.DISCARDED)
            discarded_ids.append(node_id)
        spawned_ids = []
        for spec in decision.spawn:
            node = self._add_node(dag, spec, round_no=round_no, turn=turn)
            spawned_ids.append(node.node_id)
        self.store.append(
            dag.conversation_id,
            EVENT_ANALYSIS_COMPLETED,
            {
                "round": round_no,
                "turn": turn,
                "spawned": spawned_ids,
                "discarded": discarded_ids,
                "rejected_discards": decision.rejected_discards,
                "rejected_spawns": decision.rejected_spawns,
            },
        )
        for node_id in discarded_ids:
            self.store.append(
                dag.conversation_id,
                EVENT_STATE_CHANGED,
                {"node_id": node_id, "from": "active", "to": "discarded"},
            )

    def _run_active(self, dag: ConversationDag, active: list[ThoughtNode]) -> None:
        """Run active thoughts, buffering events; append in node-id order."""
        ordered = sorted(active, key=lambda n: n.node_id)
        if self.config.parallelism > 1 and len(ordered) > 1:
            with ThreadPoolExecutor(max_workers=self.config.parallelism) as pool:
                buffers = list(
                    pool.map(lambda n: self.run_thought(dag.query, n), ordered)
                )
        else:
            buffers = [self.run_thought(dag.query, node) for node in ordered]
        for events in buffers:
            for etype, payload in events:
                self.store.append(dag.conversation_id, etype, payload)

    def run_thought(
        self, query: TmlQuery, node: ThoughtNode
    ) -> list[tuple[str, dict]]:
        """Investigate one hypothesis; returns the buffered event list.

        On a tool failing past the retry budget the node stays active with a
        failure annotation; otherwise it completes with a report and a
        nonempty evidence trail.
        """
        if node.state is not NodeState.ACTIVE:
            raise OrchestratorError(f"node {node.node_id} is not active")
        events: list[tuple[str, dict]] = []
        task = canonicalize_task(query.task)

        def invoke(tool: str, inputs: dict, fn):
            attempts = 0
            while True:
                try:
                    result = fn()
                except Exception as exc:  # tool boundary: anything can fail
                    attempts += 1
                    if attempts > self.config.tool_retry:
                        annotation = f"{tool}:failed"
                        node.annotations.append(annotation)
                        events.append(
                            (
                                EVENT_TOOL_INVOKED,
                                {
                                    "node_id": node.node_id,
                                    "tool": tool,
                                    "inputs": inputs,
                                    "status": "error",
                                    "error": str(exc)[:200],
                                    "annotation": annotation,
                                },
                            )
                        )
                        raise _ToolFailure(tool) from exc
                    continue
                return result

        def record_ok(tool: str, inputs: dict, evidence: list[EvidenceItem]):
            node.evidence_trail.extend(evidence)
            events.append(
                (
                    EVENT_TOOL_INVOKED,
                    {
                        "node_id": node.node_id,
                        "tool": tool,
                        "inputs": inputs,
                        "status": "ok",
                        "evidence": [e.to_dict() for e in evidence],
                    },
                )
            )

        numeric_records: list[dict] = []
        artifact: dict | None = None
        counts = {"corpus": 0, "kb": 0, "search": 0}
        try:
            if "kb" in node.tools:
                for language, family in node.lookups:
                    inputs = {"task": task, "language": language, "family": family}
                    records = invoke(
                        "kb", inputs,
                        lambda lang=language, fam=family: self.tools.kb.lookup_records(
                            task, lang, fam
                        ),
                    )
                    evidence = []
                    for rec in records:
                        try:
                            normalized = metrics_mod.normalize(
                                rec.metric, rec.raw_value, self.registry
                            )
                        except metrics_mod.MetricError:
                            continue
                        numeric_records.append(
                            {
                                "language": language.lower(),
                                "family": family,
                                "metric": rec.metric,
                                "value": normalized,
                            }
                        )
                        evidence.append(
                            EvidenceItem(
                                kind="corpus",
                                content={
                                    "language": language.lower(),
                                    "family": family,
                                    "metric": rec.metric,
                                    "value_raw": rec.raw_value,
                                    "normalized": normalized,
                                },
                                citation={
                                    "source": "corpus",
                                    "task": task,
                                    "language": language.lower(),
                                    "family": family,
                                    "metric": rec.metric,
                                    "paper_id": rec.paper_id,
                                },
                            )
                        )
                    counts["corpus"] += len(evidence)
                    record_ok("kb", inputs, evidence)
                inputs = {"retrieve": node.hypothesis}
                hits = invoke(
                    "kb", inputs, lambda: self.tools.kb.retrieve(node.hypothesis)
                )
                evidence = [
                    EvidenceItem(
                        kind="kb",
                        content={
                            "doc_id": r.document.doc_id,
                            "text": r.document.text,
                            "similarity": round(r.similarity, 6),
                        },
                        citation={"source": "kb", "doc_id": r.document.doc_id,
                                  **r.document.citation},
                    )
                    for r in hits
                ]
                counts["kb"] += len(evidence)
                record_ok("kb", inputs, evidence)

            if "search" in node.tools and self.tools.search is not None:
                search_query = f"{query.task} {query.language or ''} {node.hypothesis}"
                inputs = {"query": search_query}
                results = invoke(
                    "search", inputs, lambda: self.tools.search.search(search_query)
                )
                evidence = [
                    EvidenceItem(
                        kind="search",
                        content={
                            "title": doc.get("title", ""),
                            "snippet": doc.get("snippet", ""),
                        },
                        citation={"source": "search", "url": doc.get("url", "")},
                        flags={"needs_relevance_audit": True},
                    )
                    for doc in results
                ]
                counts["search"] += len(evidence)
                record_ok("search", inputs, evidence)

            if "coder" in node.tools:
                coder_context = {
                    "query": query.to_dict(),
                    "hypothesis": node.hypothesis,
                    "method": node.method,
                }
                coder_message = canonical_dumps({"records": numeric_records})
                inputs = {"n_records": len(numeric_records)}

                def run_coder():
                    return ask_structured(
                        self.backend,
                        "coder",
                        coder_context,
                        coder_message,
                        _parse_artifact,
                    )

                artifact = invoke("coder", inputs, run_coder)
                evidence = [
                    EvidenceItem(
                        kind="analysis",
                        content=artifact,
                        citation={
                            "source": "analysis",
                            "derived_from": sorted(
                                {r["metric"] for r in numeric_records}
                            ),
                        },
                        flags={"execution_status": artifact["execution_status"]},
                    )
                ]
                record_ok("coder", inputs, evidence)

            reporter_context = {
                "query": query.to_dict(),
                "hypothesis": node.hypothesis,
            }
            reporter_message = canonical_dumps(
                {"evidence_counts": counts, "artifact": artifact}
            )
            inputs = {"evidence_counts": counts}
            report = invoke(
                "reporter",
                inputs,
                lambda: self.backend.send("reporter", reporter_context, reporter_message),
            )
            events.append(
                (
                    EVENT_TOOL_INVOKED,
                    {
                        "node_id": node.node_id,
                        "tool": "reporter",
                        "inputs": inputs,
                        "status": "ok",
                        "evidence": [],
                    },
                )
            )
            if not node.evidence_trail:
                node.annotations.append("no_evidence")
                events.append(
                    (
                        EVENT_TOOL_INVOKED,
                        {
                            "node_id": node.node_id,
                            "tool": "reporter",
                            "inputs": {},
                            "status": "error",
                            "error": "no evidence gathered; completion deferred",
                            "annotation": "no_evidence",
                        },
                    )
                )
                return events
            node.transition(NodeState.COMPLETED, report=report)
            events.append(
                (
                    EVENT_STATE_CHANGED,
                    {
                        "node_id": node.node_id,
                        "from": "active",
                        "to": "completed",
                        "report": report,
                    },
                )
            )
        except _ToolFailure:
            pass  # node stays active; failure annotation already buffered
        return events

    def aggregate(self, dag: ConversationDag) -> FinalResponse:
        """Combine completed investigations into the cited final response."""
        if dag.active_nodes():
            raise OrchestratorError("cannot aggregate while nodes are active")
        completed = dag.completed_nodes()
        citations = _collect_citations(completed)
        if not completed:
            return FinalResponse(
                prediction={"kind": "none"},
                citations=(),
                rationale="No hypothesis investigation completed; no evidence "
                "is available for a prediction.",
            )
        context = {
            "query": dag.query.to_dict(),
            "completed": [
                {
                    "node_id": n.node_id,
                    "report": n.report,
                    "artifact": _last_artifact(n),
                }
                for n in completed
            ],
        }

        def parse(response: str) -> dict:
            raw = json.loads(response)
            if "rationale" not in raw:
                raise ValueError("aggregator response lacks rationale")
            return raw

        raw = ask_structured(
            self.backend,
            "aggregator",
            context,
            "Aggregate the completed investigations into a final response.",
            parse,
        )
        prediction_raw = raw.get("prediction")
        uncertainty = None
        if raw.get("uncertainty"):
            lo, hi = raw["uncertainty"]
            uncertainty = (float(lo), float(hi))
        if not prediction_raw:
            prediction = {"kind": "none"}
        elif "answer_label" in prediction_raw:
            prediction = {
                "kind": "comparative",
                "answer_label": str(prediction_raw["answer_label"]),
            }
        else:
            value_text = str(prediction_raw["value"])
            metric_name = str(prediction_raw.get("metric_name") or "score")
            normalized = metrics_mod.normalize(metric_name, value_text, self.registry)
            prediction = {
                "kind": "numeric",
                "metric_name": metric_name,
                "value_text": value_text,
                "normalized": normalized,
            }
        return FinalResponse(
            prediction=prediction,
            citations=citations,
            rationale=str(raw["rationale"]),
            uncertainty=uncertainty,
        )


def _parse_artifact(response: str) -> dict:
    raw = json.loads(response)
    status = raw.get("execution_status")
    if status not in ("success", "error"):
        raise ValueError(f"bad execution_status {status!r}")
    return {
        "algorithm": str(raw.get("algorithm", "")),
        "features": [str(f) for f in raw.get("features") or []],
        "prediction": raw.get("prediction"),
        "execution_status": status,
        "notes": str(raw.get("notes", "")),
    }


def _last_artifact(node: ThoughtNode) -> dict | None:
    for item in reversed(node.evidence_trail):
        if item.kind == "analysis":
            return item.content
    return None


def _collect_citations(completed: Iterable[ThoughtNode]) -> tuple[dict, ...]:
    seen = {}
    for node in completed:
        for item in node.evidence_trail:
            if item.kind in ("corpus", "kb", "search"):
                key = canonical_dumps(item.citation)
                seen.setdefault(key, item.citation)
    return tuple(seen[k] for k in sorted(seen))


def run_conversation(
    query: TmlQuery,
    backend: AgentBackend,
    tools: ToolSet,
    config: OrchestratorConfig,
    store=None,
    conversation_id: str | None = None,
) -> ConversationDag:
    """One-shot conversation over the given backends and tools."""
    engine = ConversationEngine(backend=backend, tools=tools, config=config, store=store)
    return engine.start(query, conversation_id=conversation_id)
