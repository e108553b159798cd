"""DAG orchestration: backends, thought lifecycle, engine, event store."""

from .backends import (
    AgentBackend,
    BackendProtocolError,
    OpenAICompatBackend,
    RoleRouter,
    ScriptedBackend,
    ScriptedQuirks,
    build_backend,
    capability_violations,
)
from .dag import (
    ConversationDag,
    DagError,
    EvidenceItem,
    FinalResponse,
    NodeState,
    ThoughtNode,
    replay_dag,
)
from .engine import (
    ConversationEngine,
    ExpertKnowledgeTool,
    FailingSearchProvider,
    FixtureSearchProvider,
    OrchestratorConfig,
    OrchestratorError,
    Route,
    SearchProvider,
    ThoughtSpec,
    ToolSet,
    capability_check,
    route_query,
    run_conversation,
)
from .store import (
    Event,
    FileConversationStore,
    MemoryConversationStore,
    StoreError,
    canonical_dumps,
)

__all__ = [
    "AgentBackend",
    "BackendProtocolError",
    "ConversationDag",
    "ConversationEngine",
    "DagError",
    "Event",
    "EvidenceItem",
    "ExpertKnowledgeTool",
    "FailingSearchProvider",
    "FileConversationStore",
    "FinalResponse",
    "FixtureSearchProvider",
    "MemoryConversationStore",
    "NodeState",
    "OpenAICompatBackend",
    "OrchestratorConfig",
    "OrchestratorError",
    "RoleRouter",
    "Route",
    "ScriptedBackend",
    "ScriptedQuirks",
    "SearchProvider",
    "StoreError",
    "ThoughtNode",
    "ThoughtSpec",
    "ToolSet",
    "build_backend",
    "canonical_dumps",
    "capability_check",
    "capability_violations",
    "replay_dag",
    "route_query",
    "run_conversation",
]
