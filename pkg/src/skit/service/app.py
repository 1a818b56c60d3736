"""HTTP front end: live test sessions, the batch baseline and small experiment grids.

Sessions live in process memory. Each one has its own lock, so different
sessions can be fed concurrently while rounds of one session stay ordered.
"""
from __future__ import annotations

import threading
import uuid
from dataclasses import asdict

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .. import __version__, baselines
from ..engine import SessionConfig, TestSession
from ..errors import ConfigError, EmptyStateError, FormatError, InputError, InvariantError, SkitError, StateError
from ..experiments import run_experiment
from ..kernels import KernelSpec
from .schemas import (
    BatchHsicRequest,
    BatchHsicResponse,
    CreateSessionRequest,
    ExperimentRequest,
    ExperimentResponse,
    FeedResponse,
    ObservationsRequest,
    SessionStatus,
    SnapshotModel,
)

app = FastAPI(title="skit", version=__version__)

_sessions: dict[str, tuple[threading.Lock, TestSession]] = {}
_registry_lock = threading.Lock()


@app.exception_handler(SkitError)
async def _skit_error(request: Request, exc: SkitError):
    if isinstance(exc, InvariantError):
        code = 500
    elif isinstance(exc, (StateError, EmptyStateError)):
        code = 409
    elif isinstance(exc, (InputError, FormatError, ConfigError)):
        code = 422
    else:
        code = 500
    return JSONResponse(status_code=code, content={"detail": str(exc), "error": type(exc).__name__})


def _get(session_id: str) -> tuple[threading.Lock, TestSession]:
    with _registry_lock:
        entry = _sessions.get(session_id)
    if entry is None:
        raise HTTPException(status_code=404, detail=f"no session {session_id}")
    return entry


def _register(session: TestSession) -> str:
    sid = uuid.uuid4().hex
    with _registry_lock:
        _sessions[sid] = (threading.Lock(), session)
    return sid


def _status(sid: str, s: TestSession) -> dict:
    return {"session_id": sid, "observations": s.n_observations, "verdict": asdict(s.verdict())}


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/sessions", response_model=SessionStatus, status_code=201)
def create_session(req: CreateSessionRequest):
    cfg = SessionConfig.from_dict(req.config.model_dump())
    s = TestSession(cfg)
    return _status(_register(s), s)


@app.get("/sessions/{session_id}", response_model=SessionStatus)
def session_status(session_id: str):
    lock, s = _get(session_id)
    with lock:
        return _status(session_id, s)


@app.post("/sessions/{session_id}/observations", response_model=FeedResponse)
def feed(session_id: str, req: ObservationsRequest):
    if len(req.xs) != len(req.ys):
        raise InputError("xs and ys have different lengths")
    lock, s = _get(session_id)
    with lock:
        reports = s.feed_many(req.xs, req.ys)
        return {**_status(session_id, s), "reports": [asdict(r) for r in reports]}


@app.get("/sessions/{session_id}/snapshot", response_model=SnapshotModel)
def snapshot(session_id: str):
    lock, s = _get(session_id)
    with lock:
        return {"snapshot": s.snapshot().decode("utf-8")}


@app.post("/sessions/restore", response_model=SessionStatus, status_code=201)
def restore(req: SnapshotModel):
    s = TestSession.restore(req.snapshot.encode("utf-8"))
    return _status(_register(s), s)


@app.delete("/sessions/{session_id}", status_code=204)
def delete_session(session_id: str):
    with _registry_lock:
        if _sessions.pop(session_id, None) is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")


@app.post("/batch-hsic", response_model=BatchHsicResponse)
def batch_hsic(req: BatchHsicRequest):
    xs, ys = np.asarray(req.xs, dtype=float), np.asarray(req.ys, dtype=float)
    cps = req.checkpoints or [len(xs)]
    res = baselines.continuous_monitor(
        xs, ys, cps, req.alpha, req.bonferroni, req.permutations,
        KernelSpec(**req.kernel_x.model_dump()), KernelSpec(**req.kernel_y.model_dump()),
        np.random.default_rng(req.seed),
    )
    return {
        "checkpoints": res.checkpoints,
        "p_values": res.p_values,
        "thresholds": res.thresholds,
        "rejected_at": res.rejected_at,
        "first_rejection": res.first_rejection,
    }


@app.post("/experiments", response_model=ExperimentResponse)
def experiments(req: ExperimentRequest):
    return {"rows": run_experiment(req.config, workers=1)}
