"""Local HTTP review service: exposes sessions, artifacts and gates so a
browser console (or curl) can approve or reject while the pipeline waits.

The service holds no state of its own; every mutation maps 1:1 onto a
pipeline operation and everything durable lives in the session store.
"""

import json
import os
import threading
import time
from pathlib import Path
from typing import Any, Dict, Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import StreamingResponse
from fastapi.staticfiles import StaticFiles

from .pipeline import (
    GateDecision,
    GatePolicy,
    PipelineSession,
    SessionConfig,
    SessionNotFound,
    SessionStatus,
    SessionStore,
    StateError,
    Verdict,
    _StageFailed,
    provider_for,
    run_stage,
    start_session,
    submit_gate,
)

AUTH_TOKEN_ENV = "PROMPTFORGE_SERVICE_TOKEN"


def session_summary(session: PipelineSession) -> Dict[str, Any]:
    return {
        "id": session.id,
        "status": session.status.value,
        "current_stage": session.current_stage.value if session.current_stage else None,
        "prompt_kind": session.config.prompt_kind.value,
        "created_at": session.created_at,
        "stage_count": len(session.history),
    }


class SessionRunner:
    """Drives one session on a background thread; gates block on a condition."""

    def __init__(self, session: PipelineSession, store: SessionStore):
        self.session = session
        self.store = store
        self._cv = threading.Condition()
        self._decision: Optional[GateDecision] = None
        self._thread = threading.Thread(target=self._loop, daemon=True)

    def start(self) -> None:
        self._thread.start()

    def join(self, timeout: Optional[float] = None) -> None:
        self._thread.join(timeout)

    def _loop(self) -> None:
        session = self.session
        provider = provider_for(session.config, cursor=session.transcript_cursor)
        while session.status in (SessionStatus.RUNNING, SessionStatus.AWAITING_GATE):
            if session.status is SessionStatus.RUNNING:
                try:
                    run_stage(session, provider)
                except _StageFailed:
                    pass
                self.store.save(session)
            else:
                if session.config.gate_policy is GatePolicy.AUTO_APPROVE:
                    decision = GateDecision(Verdict.APPROVE)
                else:
                    with self._cv:
                        while self._decision is None:
                            self._cv.wait(timeout=0.5)
                        decision = self._decision
                        self._decision = None
                submit_gate(session, decision)
                self.store.save(session)
        self.store.save(session)

    def submit(self, decision: GateDecision) -> None:
        with self._cv:
            if self.session.status is not SessionStatus.AWAITING_GATE:
                raise StateError(f"no pending gate (status {self.session.status.value})")
            if self._decision is not None:
                raise StateError("gate decision already submitted")
            self._decision = decision
            self._cv.notify_all()


def create_app(store_dir: str, ui_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="promptforge review service")
    store = SessionStore(store_dir)
    runners: Dict[str, SessionRunner] = {}
    runners_lock = threading.Lock()

    def check_auth(request: Request) -> None:
        token = os.environ.get(AUTH_TOKEN_ENV, "")
        if not token:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="invalid or missing token")

    def get_session(session_id: str) -> PipelineSession:
        with runners_lock:
            runner = runners.get(session_id)
        if runner is not None:
            return runner.session
        try:
            return store.load(session_id)
        except SessionNotFound:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    @app.get("/api/sessions")
    def list_sessions(request: Request):
        check_auth(request)
        summaries = []
        for sid in store.list_ids():
            summaries.append(session_summary(get_session(sid)))
        return summaries

    @app.post("/api/sessions", status_code=201)
    async def create_session(request: Request):
        check_auth(request)
        try:
            body = await request.json()
            config = SessionConfig.from_dict(body)
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise HTTPException(status_code=400, detail=f"invalid config: {exc}")
        session = start_session(config)
        store.save(session)
        runner = SessionRunner(session, store)
        with runners_lock:
            runners[session.id] = runner
        runner.start()
        return {"id": session.id}

    @app.get("/api/sessions/{session_id}")
    def get_session_detail(session_id: str, request: Request):
        check_auth(request)
        session = get_session(session_id)
        return {
            **session_summary(session),
            "final_prompt": session.final_prompt,
            "failure": session.failure.to_dict() if session.failure else None,
            "history": [
                {
                    "index": n,
                    "stage": e.artifact.stage.value,
                    "attempt": e.artifact.attempt,
                    "decision": e.decision.to_dict() if e.decision else None,
                }
                for n, e in enumerate(session.history, start=1)
            ],
        }

    @app.get("/api/sessions/{session_id}/artifacts/{index}")
    def get_artifact(session_id: str, index: int, request: Request):
        check_auth(request)
        session = get_session(session_id)
        if not 1 <= index <= len(session.history):
            raise HTTPException(status_code=404, detail=f"no artifact {index}")
        entry = session.history[index - 1]
        return {
            "index": index,
            "stage": entry.artifact.stage.value,
            "attempt": entry.artifact.attempt,
            "payload": entry.artifact.payload_dict(),
            "decision": entry.decision.to_dict() if entry.decision else None,
        }

    @app.post("/api/sessions/{session_id}/gate")
    async def post_gate(session_id: str, request: Request):
        check_auth(request)
        try:
            body = await request.json()
            decision = GateDecision(
                Verdict(body["verdict"]), body.get("feedback")
            )
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise HTTPException(status_code=400, detail=f"invalid gate decision: {exc}")
        with runners_lock:
            runner = runners.get(session_id)
        if runner is not None:
            try:
                runner.submit(decision)
            except StateError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            return {"ok": True}
        # No live runner (e.g. after a service restart): apply the gate to the
        # stored session and resume it on a fresh runner.
        session = get_session(session_id)
        try:
            submit_gate(session, decision)
        except StateError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        store.save(session)
        if session.status is SessionStatus.RUNNING:
            runner = SessionRunner(session, store)
            with runners_lock:
                runners[session.id] = runner
            runner.start()
        return {"ok": True}

    @app.get("/api/sessions/{session_id}/events")
    def session_events(session_id: str, request: Request, max_seconds: float = 300.0):
        check_auth(request)
        get_session(session_id)  # 404 before streaming starts

        def state_of(session: PipelineSession) -> Dict[str, Any]:
            return session_summary(session)

        def event_name(status: str) -> str:
            return {
                "running": "stage_started",
                "awaiting_gate": "awaiting_gate",
                "completed": "completed",
                "failed": "failed",
            }[status]

        def stream():
            deadline = time.monotonic() + max_seconds
            last = None
            while time.monotonic() < deadline:
                state = state_of(get_session(session_id))
                if state != last:
                    last = state
                    yield (
                        f"event: {event_name(state['status'])}\n"
                        f"data: {json.dumps(state, sort_keys=True)}\n\n"
                    )
                    if state["status"] in ("completed", "failed"):
                        return
                time.sleep(0.2)

        return StreamingResponse(stream(), media_type="text/event-stream")

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    app.state.store = store
    app.state.runners = runners
    return app
