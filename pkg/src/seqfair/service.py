"""HTTP session API for live sequential allocation.

An operator creates a session from an instance config, posts each observed
demand as it is revealed, and receives the committed recommendation of the
session's chosen policy plus what-if recommendations from every other
policy.  Sessions live in memory behind an LRU cap; requests to the same
session are serialized; what-if evaluation never mutates state.
"""

from __future__ import annotations

import threading
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .core import Instance, utility
from .harness import instance_from_config
from .metrics import METRIC_NAMES, compute_record
from .policies import STEP_POLICY_IDS, PolicyState, get_policy
from .presets import PRESET_NAMES, preset_config
from .solvers import offline_optimal

DEFAULT_SESSION_CAP = 256


@dataclass
class Session:
    id: str
    instance: Instance
    policy_id: str
    policy_ids: tuple
    created: str
    remaining: tuple
    observed: tuple = ()
    committed: tuple = ()  # one (K,) tuple per served agent
    thresholds: tuple = ()
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def index(self) -> int:
        return len(self.observed)

    @property
    def complete(self) -> bool:
        return self.index >= self.instance.n

    def state(self) -> PolicyState:
        """Policy-agnostic state rebuilt from the committed history."""
        floor = 1.0
        for theta, x in zip(self.observed, self.committed):
            floor = min(floor, utility(x, theta, self.instance.family))
        return PolicyState(self.instance, self.index, self.remaining, self.observed, floor)


class SessionStore:
    """In-memory LRU map of sessions; no persistence by design."""

    def __init__(self, cap: int = DEFAULT_SESSION_CAP):
        self.cap = cap
        self._sessions: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def add(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.id] = session
            self._sessions.move_to_end(session.id)
            while len(self._sessions) > self.cap:
                self._sessions.popitem(last=False)

    def get(self, session_id: str) -> Session:
        with self._lock:
            if session_id not in self._sessions:
                raise HTTPException(404, f"no session {session_id!r}")
            self._sessions.move_to_end(session_id)
            return self._sessions[session_id]

    def delete(self, session_id: str) -> None:
        with self._lock:
            if session_id not in self._sessions:
                raise HTTPException(404, f"no session {session_id!r}")
            del self._sessions[session_id]


def _parse_type(raw, session: Session):
    if raw is None:
        raise HTTPException(422, "missing 'type' field")
    if isinstance(raw, (list, tuple)):
        theta = tuple(float(v) for v in raw)
    else:
        theta = float(raw)
    agent = session.instance.agents[session.index]
    if theta not in agent.distribution.support:
        raise HTTPException(
            422,
            f"type {raw!r} is not in agent {session.index}'s support "
            f"{[list(t) if isinstance(t, tuple) else t for t in agent.distribution.support]}",
        )
    return theta


def _whatif_block(session: Session, theta) -> dict:
    """Hypothetical next-step allocation of every configured policy.

    Each policy is evaluated on a state reconstructed from the committed
    history, so answers reflect the budget actually remaining.
    """
    state = session.state()
    block = {}
    for policy_id in session.policy_ids:
        policy = get_policy(policy_id)
        try:
            policy.check_instance(session.instance)
        except ValueError:
            continue
        result = policy.step(state, theta)
        block[policy_id] = {
            "x": list(result.x),
            "threshold": result.threshold,
        }
    return block


def _session_summary(session: Session) -> dict:
    payload = {
        "id": session.id,
        "policy": session.policy_id,
        "policies": list(session.policy_ids),
        "family": session.instance.family,
        "n": session.instance.n,
        "num_resources": session.instance.num_resources,
        "budgets": list(session.instance.budgets),
        "resource_names": list(session.instance.resources.names),
        "index": session.index,
        "remaining": list(session.remaining),
        "complete": session.complete,
        "created": session.created,
        "steps": [
            {
                "index": i,
                "type": list(t) if isinstance(t, tuple) else t,
                "x": list(x),
                "threshold": session.thresholds[i],
            }
            for i, (t, x) in enumerate(zip(session.observed, session.committed))
        ],
    }
    if session.complete:
        x_alg = np.array(session.committed)
        x_opt = offline_optimal(session.instance, session.observed)
        record = compute_record(
            session.policy_id, 0, x_alg, x_opt, session.observed, session.instance
        )
        payload["hindsight"] = {
            "xopt": x_opt.tolist(),
            "metrics": {name: getattr(record, name) for name in METRIC_NAMES},
        }
    return payload


def create_app(static_dir: Optional[str] = None, session_cap: int = DEFAULT_SESSION_CAP) -> FastAPI:
    app = FastAPI(title="seqfair allocation service")
    store = SessionStore(session_cap)

    @app.exception_handler(HTTPException)
    async def _http_error(request: Request, exc: HTTPException):
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": exc.__class__.__name__ if exc.status_code >= 500 else _reason(exc.status_code), "detail": exc.detail},
        )

    def _reason(code: int) -> str:
        return {
            400: "invalid config",
            404: "not found",
            409: "conflict",
            422: "unprocessable",
        }.get(code, "error")

    @app.get("/presets")
    def list_presets():
        return {name: preset_config(name) for name in PRESET_NAMES}

    @app.post("/sessions")
    def create_session(body: dict):
        if "preset" in body and body.get("preset"):
            try:
                config = preset_config(body["preset"])
            except KeyError as exc:
                raise HTTPException(400, str(exc))
            instance_cfg = config["instance"]
        elif "instance" in body:
            instance_cfg = body["instance"]
        else:
            raise HTTPException(400, "config must carry 'instance' or 'preset'")

        if body.get("budgets") is not None:
            instance_cfg = dict(instance_cfg)
            instance_cfg["budgets"] = body["budgets"]

        try:
            instance = instance_from_config(instance_cfg)
        except (KeyError, TypeError) as exc:
            raise HTTPException(400, f"malformed instance config: {exc}")
        except ValueError as exc:
            raise HTTPException(400, str(exc))

        policy_id = body.get("policy", "hope_online")
        if policy_id not in STEP_POLICY_IDS:
            raise HTTPException(
                400, f"policy must be one of {list(STEP_POLICY_IDS)}, got {policy_id!r}"
            )
        policy_ids = tuple(body.get("policies", STEP_POLICY_IDS))
        bad = [p for p in policy_ids if p not in STEP_POLICY_IDS]
        if bad or policy_id not in policy_ids:
            raise HTTPException(400, f"invalid what-if policy list {list(policy_ids)}")
        try:
            get_policy(policy_id).check_instance(instance)
        except ValueError as exc:
            raise HTTPException(400, str(exc))

        session = Session(
            id=uuid.uuid4().hex[:12],
            instance=instance,
            policy_id=policy_id,
            policy_ids=policy_ids,
            created=datetime.now(timezone.utc).isoformat(),
            remaining=tuple(instance.budgets),
        )
        store.add(session)
        return {
            "id": session.id,
            "n": instance.n,
            "num_resources": instance.num_resources,
            "budgets": list(instance.budgets),
            "resource_names": list(instance.resources.names),
            "policy": policy_id,
            "policies": list(policy_ids),
            "family": instance.family,
        }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return _session_summary(session)

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        store.delete(session_id)
        return {"ok": True}

    @app.post("/sessions/{session_id}/observe")
    def observe(session_id: str, body: dict):
        session = store.get(session_id)
        with session.lock:
            if session.complete:
                raise HTTPException(409, f"all {session.instance.n} agents already served")
            theta = _parse_type(body.get("type"), session)
            whatif = _whatif_block(session, theta)

            policy = get_policy(session.policy_id)
            result = policy.step(session.state(), theta)
            session.observed += (theta,)
            session.committed += (result.x,)
            session.thresholds += (result.threshold,)
            session.remaining = result.state.remaining
            return {
                "index": session.index - 1,
                "type": body.get("type"),
                "x": list(result.x),
                "threshold": result.threshold,
                "remaining": list(session.remaining),
                "complete": session.complete,
                "whatif": whatif,
            }

    @app.post("/sessions/{session_id}/whatif")
    def whatif(session_id: str, body: dict):
        session = store.get(session_id)
        with session.lock:
            if session.complete:
                raise HTTPException(409, f"all {session.instance.n} agents already served")
            theta = _parse_type(body.get("type"), session)
            return {
                "index": session.index,
                "type": body.get("type"),
                "whatif": _whatif_block(session, theta),
            }

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app
