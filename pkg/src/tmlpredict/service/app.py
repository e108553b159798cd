"""HTTP service over the conversation engine.

Per-conversation turns are serialized: a follow-up posted while a turn is
in flight gets 409. State is the append-only event log, so a restart
reconstructs every conversation; orphaned active nodes from an interrupted
turn are discarded with a recovery annotation.
"""

from __future__ import annotations

import json
import re
import threading
import time
import uuid
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import HTMLResponse, JSONResponse

from ..orchestrator.dag import EVENT_STATE_CHANGED, NodeState, replay_dag
from ..orchestrator.store import FileConversationStore
from ..pipeline import Runtime
from ..scenario import QueryType, TmlQuery
from .schemas import (
    ConversationCreated,
    EventsResponse,
    FollowUpAccepted,
    FollowUpRequest,
    HealthResponse,
    QueryRequest,
    SnapshotResponse,
)

_RUN_ID_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


class ConversationManager:
    """Tracks in-flight turns and runs them on background threads."""

    def __init__(self, runtime: Runtime, store: FileConversationStore):
        self.runtime = runtime
        self.store = store
        self.engine = runtime.engine(store=store)
        self._busy: set[str] = set()
        self._errors: dict[str, str] = {}
        self._lock = threading.Lock()

    def recover(self) -> int:
        """Discard active nodes orphaned by an interrupted process."""
        recovered = 0
        for conversation_id in self.store.ids():
            try:
                dag = replay_dag(self.store.read(conversation_id))
            except Exception:
                continue
            for node in dag.active_nodes():
                self.store.append(
                    conversation_id,
                    EVENT_STATE_CHANGED,
                    {
                        "node_id": node.node_id,
                        "from": "active",
                        "to": "discarded",
                        "annotations": ["recovered_after_restart"],
                    },
                )
                recovered += 1
        return recovered

    def is_busy(self, conversation_id: str) -> bool:
        with self._lock:
            return conversation_id in self._busy

    def _acquire(self, conversation_id: str) -> bool:
        with self._lock:
            if conversation_id in self._busy:
                return False
            self._busy.add(conversation_id)
            return True

    def _release(self, conversation_id: str) -> None:
        with self._lock:
            self._busy.discard(conversation_id)

    def start(self, query: TmlQuery) -> str:
        conversation_id = f"c{uuid.uuid4().hex[:12]}"
        self._busy.add(conversation_id)

        def runner() -> None:
            try:
                self.engine.start(query, conversation_id=conversation_id)
            except Exception as exc:  # surfaced via snapshot polling
                self._errors[conversation_id] = str(exc)
            finally:
                self._release(conversation_id)

        threading.Thread(target=runner, daemon=True).start()
        return conversation_id

    def follow_up(self, conversation_id: str, text: str) -> int:
        if not self.store.exists(conversation_id):
            raise HTTPException(status_code=404, detail="unknown conversation")
        if not self._acquire(conversation_id):
            raise HTTPException(status_code=409, detail="turn in progress")
        dag = replay_dag(self.store.read(conversation_id))
        next_turn = dag.turns + 1

        def runner() -> None:
            try:
                self.engine.follow_up(conversation_id, text)
            except Exception as exc:
                self._errors[conversation_id] = str(exc)
            finally:
                self._release(conversation_id)

        threading.Thread(target=runner, daemon=True).start()
        return next_turn


def create_app(runtime: Runtime, data_dir: str | Path) -> FastAPI:
    data_dir = Path(data_dir)
    store = FileConversationStore(data_dir / "conversations")
    manager = ConversationManager(runtime, store)
    manager.recover()

    app = FastAPI(title="tmlpredict service", version="1")
    app.state.manager = manager

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", conversations=len(store.ids()))

    @app.post("/conversations", response_model=ConversationCreated, status_code=201)
    def create_conversation(body: QueryRequest) -> ConversationCreated:
        try:
            query_type = QueryType(body.query_type)
        except ValueError:
            raise HTTPException(status_code=422, detail="unknown query_type")
        query = TmlQuery(
            task=body.task,
            query_type=query_type,
            text=body.text,
            model_family=body.model_family,
            language=body.language,
        )
        conversation_id = manager.start(query)
        return ConversationCreated(conversation_id=conversation_id)

    @app.get("/conversations/{conversation_id}", response_model=SnapshotResponse)
    def get_snapshot(conversation_id: str) -> SnapshotResponse:
        if not store.exists(conversation_id):
            raise HTTPException(status_code=404, detail="unknown conversation")
        dag = replay_dag(store.read(conversation_id))
        snapshot = dag.snapshot()
        snapshot["in_flight"] = manager.is_busy(conversation_id)
        return SnapshotResponse(**snapshot)

    @app.get("/conversations/{conversation_id}/events", response_model=EventsResponse)
    def get_events(
        conversation_id: str, cursor: int = 0, wait: float = 0.0
    ) -> EventsResponse:
        if not store.exists(conversation_id):
            raise HTTPException(status_code=404, detail="unknown conversation")
        deadline = time.monotonic() + min(wait, 30.0)
        events = store.read(conversation_id, after=cursor)
        while not events and time.monotonic() < deadline:
            time.sleep(0.05)
            events = store.read(conversation_id, after=cursor)
        next_cursor = events[-1].seq if events else cursor
        return EventsResponse(
            conversation_id=conversation_id,
            events=[
                {"seq": e.seq, "type": e.type, "payload": e.payload} for e in events
            ],
            next_cursor=next_cursor,
        )

    @app.post(
        "/conversations/{conversation_id}/messages",
        response_model=FollowUpAccepted,
        status_code=202,
    )
    def post_message(conversation_id: str, body: FollowUpRequest) -> FollowUpAccepted:
        turn = manager.follow_up(conversation_id, body.text)
        return FollowUpAccepted(conversation_id=conversation_id, turn=turn)

    @app.get("/results/{run_id}")
    def get_results(run_id: str) -> JSONResponse:
        if not _RUN_ID_RE.match(run_id):
            raise HTTPException(status_code=422, detail="bad run id")
        summary_path = data_dir / "runs" / run_id / "summary.json"
        if not summary_path.exists():
            raise HTTPException(status_code=404, detail="unknown run")
        return JSONResponse(json.loads(summary_path.read_text(encoding="utf-8")))

    @app.get("/schema/snapshot")
    def get_snapshot_schema() -> JSONResponse:
        from importlib import resources

        text = (
            resources.files("tmlpredict").joinpath("data/snapshot.schema.json")
        ).read_text(encoding="utf-8")
        return JSONResponse(json.loads(text))

    ui_dir = data_dir / "ui"
    if ui_dir.exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    @app.get("/", response_class=HTMLResponse)
    def index() -> str:
        if ui_dir.exists():
            return '<html><meta http-equiv="refresh" content="0; url=/ui/"></html>'
        return "<html><body><h1>tmlpredict service</h1><p>See /docs.</p></body></html>"

    return app
