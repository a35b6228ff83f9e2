"""HTTP facade for the interactive annotation loop.

One session owns one dataset and one pipeline state.  The session cycles
idle -> awaiting_annotation -> (training) -> idle: fetching the next segment
is idempotent while one is pending, and submitting corrections runs the
training steps synchronously before the response returns.

Endpoints (JSON):
    POST /sessions                          create from dataset path + config
    GET  /sessions/{id}/segment             pending or newly selected segment
    POST /sessions/{id}/annotations         submit corrections, run one round
    GET  /sessions/{id}/metrics             per-iteration metrics history
    GET  /sessions/{id}/series/{sid}        raw values for context panning
Errors carry {"code": ..., "message": ...}.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import pipeline
from .config import ConfigError, dataset_params, make_config
from .data import Segment, load_dataset, split_train_test
from .synthetic import synthetic_benchmark

PHASE_IDLE = "idle"
PHASE_AWAITING = "awaiting_annotation"
PHASE_TRAINING = "training"
PHASE_DONE = "exhausted"


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class CreateSessionRequest(BaseModel):
    dataset_path: str | None = None
    config: dict | None = None
    seed: int = 0
    synthetic: bool = False
    synthetic_series: int = 6
    synthetic_points: int = 1000


class Correction(BaseModel):
    timestamp: int
    label: int


class SubmitRequest(BaseModel):
    corrections: list[Correction] = []


@dataclass
class Session:
    session_id: str
    state: pipeline.IterationState
    phase: str = PHASE_IDLE
    pending_segment: Segment | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def descriptor(self) -> dict:
        train = self.state.train
        return {
            "session_id": self.session_id,
            "phase": self.phase,
            "iteration": self.state.iteration,
            "series_count": len(train.series),
            "point_count": train.point_count,
            "labeled_count": len(self.state.labeled_set),
            "segment_length": train.segment_length,
            "has_metrics": self.state.test is not None,
        }


def _segment_payload(session: Session) -> dict:
    state = session.state
    segment = session.pending_segment
    series = state.train.series_by_id(segment.series_id)
    seg_globals = pipeline.segment_global_indices(state, segment)
    probs = state.train_probs[seg_globals]
    predicted = (probs > 0.5).astype(int)
    idx = segment.indices
    return {
        "session_id": session.session_id,
        "iteration": state.iteration,
        "series_id": segment.series_id,
        "start_index": segment.start_index,
        "end_index": segment.end_index,
        "center_index": segment.center_index,
        "center_timestamp": int(series.timestamps[segment.center_index]),
        "points": [
            {
                "timestamp": int(series.timestamps[i]),
                "value": float(series.values[i]),
                "predicted_label": int(predicted[j]),
                "probability": float(probs[j]),
            }
            for j, i in enumerate(idx)
        ],
    }


def _metrics_payload(session: Session) -> dict:
    history = [
        {
            "iteration": i,
            "ap": m.average_precision,
            "roc_auc": m.roc_auc,
            "ap_auc": m.ap_auc_running,
        }
        for i, m in enumerate(session.state.metrics_history)
    ]
    return {"session_id": session.session_id, "history": history,
            "phase": session.phase}


def create_app(default_dataset: str | None = None,
               default_config: dict | None = None) -> FastAPI:
    app = FastAPI(title="leiad annotation service")
    sessions: dict[str, Session] = {}

    @app.exception_handler(ServiceError)
    async def _service_error(_req: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise ServiceError(404, "unknown_session", f"no session {session_id!r}")
        return session

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        try:
            config = make_config(req.config or default_config)
        except ConfigError as exc:
            raise ServiceError(422, "bad_config", str(exc))
        if req.synthetic:
            dataset = synthetic_benchmark(seed=req.seed, n_series=req.synthetic_series,
                                          n_points=req.synthetic_points)
        else:
            path = req.dataset_path or default_dataset
            if path is None:
                raise ServiceError(422, "no_dataset", "no dataset path given and no default configured")
            try:
                dataset = load_dataset(path, **dataset_params(config))
            except Exception as exc:
                raise ServiceError(422, "bad_dataset", str(exc))
        if dataset.has_truth() and len(dataset.series) >= 2:
            train, test = split_train_test(
                dataset, config["pipeline"]["test_fraction"], req.seed)
        else:
            train, test = dataset, None
        try:
            state = pipeline.warm_up(train, config, req.seed, test)
        except Exception as exc:
            raise ServiceError(422, "warmup_failed", str(exc))
        session = Session(uuid.uuid4().hex[:12], state)
        sessions[session.session_id] = session
        return session.descriptor()

    @app.get("/sessions/{session_id}")
    def describe(session_id: str):
        return get_session(session_id).descriptor()

    @app.get("/sessions/{session_id}/segment")
    def next_segment(session_id: str):
        session = get_session(session_id)
        with session.lock:
            if session.phase == PHASE_AWAITING:
                return _segment_payload(session)
            if session.phase == PHASE_DONE:
                raise ServiceError(409, "exhausted", "no unlabeled points remain")
            state = session.state
            if len(state.labeled_set) >= state.train.point_count:
                session.phase = PHASE_DONE
                raise ServiceError(409, "exhausted", "no unlabeled points remain")
            center = pipeline.select_query_point(state)
            session.pending_segment = pipeline.segment_for_point(state, center)
            session.phase = PHASE_AWAITING
            return _segment_payload(session)

    @app.post("/sessions/{session_id}/annotations")
    def submit(session_id: str, req: SubmitRequest):
        session = get_session(session_id)
        with session.lock:
            if session.phase != PHASE_AWAITING:
                raise ServiceError(409, "no_pending_segment",
                                   "no segment is awaiting annotation; fetch one first")
            state = session.state
            segment = session.pending_segment
            series = state.train.series_by_id(segment.series_id)
            seg_ts = series.timestamps[segment.indices]
            ts_to_offset = {int(t): j for j, t in enumerate(seg_ts)}
            for corr in req.corrections:
                if corr.timestamp not in ts_to_offset:
                    raise ServiceError(422, "correction_outside_segment",
                                       f"timestamp {corr.timestamp} is outside the pending segment")
                if corr.label not in (0, 1):
                    raise ServiceError(422, "bad_label", "labels must be 0 or 1")

            seg_globals = pipeline.segment_global_indices(state, segment)
            predicted = (state.train_probs[seg_globals] > 0.5).astype(np.int8)
            labels = predicted.copy()
            sources = [pipeline.SOURCE_INFERRED] * len(labels)
            for corr in req.corrections:
                j = ts_to_offset[corr.timestamp]
                labels[j] = corr.label
                sources[j] = pipeline.SOURCE_ANNOTATED

            session.phase = PHASE_TRAINING
            try:
                pipeline.apply_annotations(state, segment, labels, sources)
            finally:
                session.pending_segment = None
                session.phase = PHASE_IDLE
            return {
                "session_id": session.session_id,
                "iteration": state.iteration,
                "labeled_count": len(state.labeled_set),
                "metrics": _metrics_payload(session)["history"][-1:]
            }

    @app.get("/sessions/{session_id}/metrics")
    def metrics(session_id: str):
        return _metrics_payload(get_session(session_id))

    @app.get("/sessions/{session_id}/series/{series_id}")
    def series_window(session_id: str, series_id: str,
                      start: int | None = None, end: int | None = None):
        session = get_session(session_id)
        try:
            series = session.state.train.series_by_id(series_id)
        except KeyError:
            raise ServiceError(404, "unknown_series", f"no series {series_id!r}")
        ts = series.timestamps
        lo = 0 if start is None else int(np.searchsorted(ts, start, side="left"))
        hi = len(ts) if end is None else int(np.searchsorted(ts, end, side="right"))
        return {
            "series_id": series_id,
            "points": [
                {"timestamp": int(ts[i]), "value": float(series.values[i])}
                for i in range(lo, hi)
            ],
        }

    return app
