"""HTTP session service for humans on either side of a training dialogue.

A human_user session pairs a real user with the machine agent (route ha,
cost 1); a human_agent session pairs a human demonstrator with the simulated
user (route hh, cost 2). Sessions are charged against the ledger at creation,
transcripts persist as JSONL, and finished experiences flow into the real
replay buffer once the explicit success/failure feedback (or the idle
timeout) settles the outcome.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
import time
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .agent import DQNAgent, ReplayBuffer
from .domain import (
    AGENT,
    DONT_CARE,
    MAX_TURNS,
    USER,
    DialogueAct,
    DialogueOutcome,
    DialogueState,
    Experience,
    SlotSchema,
    UserGoal,
    judge_outcome,
    turn_reward,
)
from .kb import KnowledgeBase
from .render import render_act
from .usersim import UserSimState, sim_init, sim_step

HUMAN_USER = "human_user"
HUMAN_AGENT = "human_agent"
ROLE_ROUTE = {HUMAN_USER: "ha", HUMAN_AGENT: "hh"}

DEFAULT_TIMEOUT = 600.0  # seconds of inactivity before a session fails


class SessionError(Exception):
    def __init__(self, status: int, reason: str):
        super().__init__(reason)
        self.status = status
        self.reason = reason


@dataclass
class Session:
    id: str
    role: str
    goal: UserGoal
    state: DialogueState
    rng: np.random.Generator
    sim: UserSimState | None = None
    transcript: list[DialogueAct] = field(default_factory=list)
    status: str = "open"  # open | success | failure
    experiences: list[Experience] = field(default_factory=list)
    pending: dict | None = None  # half-built experience awaiting the user's reply
    outcome: DialogueOutcome | None = None
    feedback: bool | None = None
    flushed: bool = False
    last_active: float = 0.0

    def view(self, kb_results: list | None = None) -> dict:
        data = {
            "id": self.id,
            "role": self.role,
            "status": self.status,
            "turn": self.state.turn,
            "transcript": [
                {"act": a.to_json(), "text": render_act(a)} for a in self.transcript
            ],
        }
        if self.role == HUMAN_USER:
            data["goal"] = self.goal.to_json()
        else:
            data["kb_results"] = kb_results or []
        if self.outcome is not None:
            data["outcome"] = self.outcome.to_json()
        if self.feedback is not None:
            data["feedback"] = self.feedback
        return data


class HitlService:
    """Session registry bridging humans, the machine agent, and the buffers.

    With a ledger attached (live-training mode) every created session is
    charged its route cost; standalone mode skips all budget checks. The
    shared buffer and ledger are only touched under the service lock.
    """

    def __init__(self, kb: KnowledgeBase, goals: list[UserGoal],
                 agent: DQNAgent | None = None, schema: SlotSchema | None = None,
                 ledger=None, epoch_budget: int | None = None,
                 real_buffer: ReplayBuffer | None = None, out_dir: str | None = None,
                 max_turns: int = MAX_TURNS, timeout: float = DEFAULT_TIMEOUT,
                 seed: int = 0, clock=time.monotonic):
        from .trainer import RuleAgent  # fallback machine agent

        self.kb = kb
        self.goals = goals
        self.schema = schema or SlotSchema()
        self.agent = agent or RuleAgent(self.schema, max_turns)
        self.ledger = ledger
        self.epoch_budget = epoch_budget
        self.real_buffer = real_buffer if real_buffer is not None else ReplayBuffer(3000, "real")
        self.out_dir = out_dir
        self.max_turns = max_turns
        self.timeout = timeout
        self.clock = clock
        self.sessions: dict[str, Session] = {}
        self._rng = np.random.default_rng(seed)
        self._lock = threading.Lock()

    # -- lifecycle ---------------------------------------------------------

    def create_session(self, role: str, goal: UserGoal | None = None) -> dict:
        if role not in ROLE_ROUTE:
            raise SessionError(400, f"unknown role {role!r}")
        with self._lock:
            self._reap_idle()
            cost = 2 if role == HUMAN_AGENT else 1
            if self.ledger is not None:
                allowed = self.ledger.remaining
                if self.epoch_budget is not None:
                    allowed = min(allowed, self.epoch_budget)
                if cost > allowed:
                    raise SessionError(409, "no real-interaction budget for this route")
                self.ledger.charge(ROLE_ROUTE[role])
                if self.epoch_budget is not None:
                    self.epoch_budget -= cost
            if goal is None:
                goal = self.goals[int(self._rng.integers(len(self.goals)))]
            session = Session(
                id=secrets.token_hex(8), role=role, goal=goal,
                state=DialogueState(kb_match_count=len(self.kb)),
                rng=np.random.default_rng(self._rng.integers(2**31)),
                last_active=self.clock(),
            )
            if role == HUMAN_AGENT:
                session.sim, opening = sim_init(goal, session.rng, self.max_turns)
                self._record_user(session, opening)
            self.sessions[session.id] = session
            return session.view(kb_results=self._kb_rows(session))

    def get_session(self, session_id: str) -> dict:
        with self._lock:
            self._reap_idle()
            session = self._get(session_id)
            return session.view(kb_results=self._kb_rows(session))

    def _get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise SessionError(404, "unknown session")
        return session

    # -- turns ---------------------------------------------------------------

    def post_act(self, session_id: str, act: DialogueAct) -> dict:
        with self._lock:
            self._reap_idle()
            session = self._get(session_id)
            if session.status != "open":
                raise SessionError(409, "session is closed")
            try:
                act.validate(self.schema)
            except ValueError as err:
                raise SessionError(400, str(err))
            expected = USER if session.role == HUMAN_USER else AGENT
            if act.speaker != expected:
                raise SessionError(409, f"session expects {expected} acts")
            session.last_active = self.clock()
            if session.role == HUMAN_USER:
                return self._human_user_turn(session, act)
            return self._human_agent_turn(session, act)

    def _human_user_turn(self, session: Session, act: DialogueAct) -> dict:
        self._record_user(session, act)
        if session.pending is not None:
            self._complete_pending(session, act, terminal=False, success=False)
        if act.intent == "closing":
            self._finish(session, False)
            return self._turn_reply(session, None)

        s_vec = self.agent.encode(session.state)
        action_id, agent_act = self.agent.act(session.state, self.kb, 0.0, session.rng)
        session.state.record_agent_act(agent_act, action_id)
        session.transcript.append(agent_act)
        session.pending = {"state_vec": s_vec, "action_id": action_id}

        booked = "taskcomplete" in agent_act.inform_slots
        capped = session.state.turn >= self.max_turns
        if booked or capped or agent_act.intent == "closing":
            outcome = judge_outcome(session.goal, session.state, self.max_turns)
            closing = DialogueAct(USER, "closing")
            self._complete_pending(session, closing, terminal=True, success=outcome.success)
            self._finish(session, outcome.success)
        return self._turn_reply(session, agent_act)

    def _human_agent_turn(self, session: Session, act: DialogueAct) -> dict:
        s_vec = self.agent.encode(session.state)
        session.state.record_agent_act(act, None)
        session.transcript.append(act)
        user_act, terminal, success = sim_step(session.sim, act)
        self._record_user(session, user_act)
        reward = -1.0 + (turn_reward(True, success, self.max_turns) if terminal else 0.0)
        session.experiences.append(Experience(
            s_vec, self._closest_action(act), reward, user_act,
            self.agent.encode(session.state), terminal, "human_human"))
        if terminal:
            self._finish(session, success)
        return self._turn_reply(session, user_act)

    def _turn_reply(self, session: Session, counterpart: DialogueAct | None) -> dict:
        reply = {
            "counterpart_act": None if counterpart is None else {
                "act": counterpart.to_json(), "text": render_act(counterpart)},
            "terminal": session.status != "open",
            "turn": session.state.turn,
        }
        if session.outcome is not None:
            reply["outcome"] = session.outcome.to_json()
        return reply

    def _record_user(self, session: Session, act: DialogueAct) -> None:
        session.state.record_user_act(act)
        session.transcript.append(act)
        constraints = {s: v for s, v in session.state.user_informed.items()
                       if s in self.schema.informable_slots and v != DONT_CARE}
        session.state.kb_match_count = self.kb.match_count(constraints)

    def _complete_pending(self, session: Session, user_act: DialogueAct,
                          terminal: bool, success: bool) -> None:
        pending = session.pending
        session.pending = None
        reward = -1.0 + (turn_reward(True, success, self.max_turns) if terminal else 0.0)
        session.experiences.append(Experience(
            pending["state_vec"], pending["action_id"], reward, user_act,
            self.agent.encode(session.state), terminal, "human_agent"))

    def _closest_action(self, act: DialogueAct) -> int:
        """Best action-template id for a human-authored agent act."""
        if "taskcomplete" in act.inform_slots:
            return next(i for i, a in enumerate(self.agent.action_space) if a.booking)
        slot = None
        if act.intent == "request" and act.request_slots:
            slot = sorted(act.request_slots)[0]
        elif act.intent == "inform" and act.inform_slots:
            slot = sorted(act.inform_slots)[0]
        for i, tpl in enumerate(self.agent.action_space):
            if tpl.intent == act.intent and tpl.slot == slot and not tpl.booking:
                return i
        for i, tpl in enumerate(self.agent.action_space):
            if tpl.intent == act.intent and not tpl.booking:
                return i
        return 0

    # -- outcome -------------------------------------------------------------

    def _finish(self, session: Session, success: bool) -> None:
        session.status = "success" if success else "failure"
        total = sum(e.reward for e in session.experiences)
        session.outcome = DialogueOutcome(success=success, turns=session.state.turn,
                                          cumulative_reward=total)

    def post_feedback(self, session_id: str, success: bool) -> dict:
        with self._lock:
            session = self._get(session_id)
            if session.status == "open":
                raise SessionError(409, "session still open; feedback comes after the dialogue")
            if session.feedback is not None:
                return {"ok": True, "outcome": session.outcome.to_json(), "repeated": True}
            session.feedback = success
            if success != (session.status == "success"):
                self._rescore(session, success)
            self._flush(session)
            return {"ok": True, "outcome": session.outcome.to_json()}

    def _rescore(self, session: Session, success: bool) -> None:
        session.status = "success" if success else "failure"
        if session.experiences:
            last = session.experiences[-1]
            if last.terminal:
                reward = -1.0 + turn_reward(True, success, self.max_turns)
                session.experiences[-1] = Experience(
                    last.state_vec, last.action_id, reward, last.user_act,
                    last.next_state_vec, True, last.source)
        total = sum(e.reward for e in session.experiences)
        session.outcome = DialogueOutcome(success=success, turns=session.state.turn,
                                          cumulative_reward=total)

    def _flush(self, session: Session) -> None:
        if session.flushed:
            return
        session.flushed = True
        self.real_buffer.extend(session.experiences)
        if self.out_dir:
            self._write_transcript(session)

    def _reap_idle(self) -> None:
        now = self.clock()
        for session in list(self.sessions.values()):
            if session.flushed or now - session.last_active <= self.timeout:
                continue
            if session.status == "open":
                if session.pending is not None:
                    self._complete_pending(session, DialogueAct(USER, "closing"),
                                           terminal=True, success=False)
                self._finish(session, False)
            self._flush(session)

    def _kb_rows(self, session: Session, constraints: dict | None = None, limit: int = 20) -> list:
        if session.role != HUMAN_AGENT:
            return []
        if constraints is None:
            constraints = {s: v for s, v in session.state.user_informed.items()
                           if s in self.schema.informable_slots and v != DONT_CARE}
        return self.kb.query(constraints)[:limit]

    def kb_search(self, session_id: str, constraints: dict | None) -> list:
        with self._lock:
            session = self._get(session_id)
            for slot in constraints or {}:
                if slot not in self.schema.informable_slots:
                    raise SessionError(400, f"not an informable slot: {slot!r}")
            return self._kb_rows(session, constraints)

    def _write_transcript(self, session: Session) -> None:
        tdir = os.path.join(self.out_dir, "transcripts")
        os.makedirs(tdir, exist_ok=True)
        path = os.path.join(tdir, f"{session.id}.jsonl")
        with open(path, "w") as f:
            for i, act in enumerate(session.transcript):
                f.write(json.dumps({"line": i, "speaker": act.speaker,
                                    "act": act.to_json(), "text": render_act(act)},
                                   sort_keys=True) + "\n")
            meta = {"meta": {
                "session": session.id, "role": session.role,
                "goal": session.goal.to_json(),
                "outcome": session.outcome.to_json() if session.outcome else None,
                "feedback": session.feedback,
            }}
            f.write(json.dumps(meta, sort_keys=True) + "\n")


def replay_transcript(path) -> tuple[DialogueState, dict]:
    """Rebuild the final DialogueState from a transcript JSONL file."""
    state = DialogueState()
    meta: dict = {}
    with open(path) as f:
        for line in f:
            obj = json.loads(line)
            if "meta" in obj:
                meta = obj["meta"]
                continue
            act = DialogueAct.from_json(obj["act"])
            if act.speaker == AGENT:
                state.record_agent_act(act)
            else:
                state.record_user_act(act)
    return state, meta


def create_app(service: HitlService) -> FastAPI:
    """FastAPI wiring for the service; JSON shapes match domain serialization."""
    app = FastAPI(title="budgetdyna hitl", version="0.1.0")

    def _act_from(payload: dict) -> DialogueAct:
        try:
            return DialogueAct.from_json(payload)
        except (KeyError, TypeError) as err:
            raise HTTPException(400, f"malformed act: {err}")

    def _guard(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SessionError as err:
            raise HTTPException(err.status, err.reason)

    @app.post("/sessions")
    async def create_session(request: Request):
        payload = await request.json()
        role = payload.get("role", "")
        goal = UserGoal.from_json(payload["goal"]) if payload.get("goal") else None
        return JSONResponse(_guard(service.create_session, role, goal))

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return JSONResponse(_guard(service.get_session, session_id))

    @app.post("/sessions/{session_id}/act")
    async def post_act(session_id: str, request: Request):
        payload = await request.json()
        act = _act_from(payload.get("act", payload))
        return JSONResponse(_guard(service.post_act, session_id, act))

    @app.post("/sessions/{session_id}/feedback")
    async def post_feedback(session_id: str, request: Request):
        payload = await request.json()
        if "success" not in payload:
            raise HTTPException(400, "feedback needs a boolean 'success'")
        return JSONResponse(_guard(service.post_feedback, session_id, bool(payload["success"])))

    @app.get("/sessions/{session_id}/kb")
    def kb_search(session_id: str, constraints: str = ""):
        parsed: dict[str, str] = {}
        if constraints:
            try:
                parsed = json.loads(constraints)
            except json.JSONDecodeError:
                for pair in constraints.split(","):
                    slot, _, value = pair.partition("=")
                    if not value:
                        raise HTTPException(400, "constraints: JSON object or slot=value,...")
                    parsed[slot.strip()] = value.strip()
        return JSONResponse({"rows": _guard(service.kb_search, session_id, parsed)})

    @app.get("/schema")
    def schema():
        s = service.schema
        return {
            "intents": list(s.intents),
            "slots": list(s.slots),
            "informable_slots": list(s.informable_slots),
            "requestable_slots": list(s.requestable_slots),
        }

    frontend = os.path.join(os.path.dirname(__file__), "..", "..", "frontend", "dist")
    frontend = os.path.abspath(frontend)
    if os.path.isdir(frontend):
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=frontend, html=True), name="ui")

    return app
