"""Pydantic wire models for the conversation service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class QueryRequest(BaseModel):
    text: str = ""
    task: str
    language: str | None = None
    model_family: str | None = None
    query_type: str = "numeric_prediction"


class ConversationCreated(BaseModel):
    conversation_id: str
    status: str = "running"


class NodeModel(BaseModel):
    node_id: str
    hypothesis: str
    method: str
    tools: list[str] = Field(default_factory=list)
    lookups: list[list[str]] = Field(default_factory=list)
    state: str
    evidence_trail: list[dict] = Field(default_factory=list)
    report: str | None = None
    annotations: list[str] = Field(default_factory=list)


class EdgeModel(BaseModel):
    parent: str | None = None
    child: str


class SnapshotResponse(BaseModel):
    schema_version: int
    conversation_id: str
    query: dict
    turns: int
    nodes: list[NodeModel]
    edges: list[EdgeModel]
    final_response: dict | None = None
    in_flight: bool = False


class EventModel(BaseModel):
    seq: int
    type: str
    payload: dict


class EventsResponse(BaseModel):
    conversation_id: str
    events: list[EventModel]
    next_cursor: int


class FollowUpRequest(BaseModel):
    text: str


class FollowUpAccepted(BaseModel):
    conversation_id: str
    turn: int
    status: str = "running"


class HealthResponse(BaseModel):
    status: str = "ok"
    conversations: int = 0
