"""Agenda-driven simulated user for the ticket-booking task.

The simulated user opens with the movie name plus one more constraint, keeps
a stack of constraints still to mention and requests still unanswered,
answers agent requests from its goal, denies wrong informs with the correct
value, verifies bookings against the goal, and walks away from agents that
repeat themselves, ask irrelevant questions, or let the dialogue drag on.
Its terminal success flag matches judge_outcome on the tracked state for
every reachable dialogue (tested over random rollouts).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import (
    AGENT,
    BOOKED,
    MAX_TURNS,
    NO_MATCH,
    USER,
    DialogueAct,
    SlotSchema,
    UserGoal,
)

DEFAULT_PATIENCE = 4
# Real users walk away from dialogues that drag on: after SOFT_DEADLINE agent
# turns, every further turn risks a hangup (counted as failure).
DEFAULT_SOFT_DEADLINE = 12
DEFAULT_HANGUP_PROB = 0.15
# When the floor is theirs, users volunteer a pending constraint with this
# probability; otherwise they chase one of their unanswered requests, so
# "could you book it?" does not reliably mean the agenda is empty.
DEFAULT_VOLUNTEER_PROB = 0.4
# Asking about a slot the user has no constraint on is irritating; each such
# question risks an immediate hangup on top of the not_sure reply.
DEFAULT_ANNOY_PROB = 0.10


@dataclass
class UserSimState:
    goal: UserGoal
    rng: np.random.Generator
    max_turns: int = MAX_TURNS
    patience: int = DEFAULT_PATIENCE
    soft_deadline: int = DEFAULT_SOFT_DEADLINE
    hangup_prob: float = DEFAULT_HANGUP_PROB
    volunteer_prob: float = DEFAULT_VOLUNTEER_PROB
    annoy_prob: float = DEFAULT_ANNOY_PROB
    informed_so_far: dict[str, str] = field(default_factory=dict)
    pending_informs: list[str] = field(default_factory=list)
    remaining_requests: set[str] = field(default_factory=set)
    agent_turns: int = 0
    last_agent_signature: tuple | None = None
    repeat_count: int = 0
    terminal: bool = False
    success: bool = False


def first_user_act(goal: UserGoal, rng: np.random.Generator) -> tuple[dict[str, str], str]:
    """Pick the opening informs (1-3 constraints, movie first) and request."""
    slots = sorted(goal.constraints)
    opening = []
    if "moviename" in goal.constraints:
        opening.append("moviename")
    others = [s for s in slots if s not in opening]
    if others:
        # Openings name the movie plus one more detail ("creed at around noon").
        n_extra = 1 if opening else min(2, len(others))
        idx = rng.permutation(len(others))[:n_extra]
        opening.extend(others[i] for i in sorted(int(j) for j in idx))
    informs = {s: goal.constraints[s] for s in opening}
    non_ticket = sorted(goal.requests - {"ticket"})
    if non_ticket:
        request = non_ticket[int(rng.integers(len(non_ticket)))]
    else:
        request = "ticket"
    return informs, request


def sim_init(goal: UserGoal, seed, max_turns: int = MAX_TURNS,
             patience: int = DEFAULT_PATIENCE, soft_deadline: int = DEFAULT_SOFT_DEADLINE,
             hangup_prob: float = DEFAULT_HANGUP_PROB,
             volunteer_prob: float = DEFAULT_VOLUNTEER_PROB,
             annoy_prob: float = DEFAULT_ANNOY_PROB) -> tuple[UserSimState, DialogueAct]:
    """Start a dialogue; returns the state and the user's opening act."""
    goal.validate()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    informs, request = first_user_act(goal, rng)
    state = UserSimState(goal=goal, rng=rng, max_turns=max_turns, patience=patience,
                         soft_deadline=soft_deadline, hangup_prob=hangup_prob,
                         volunteer_prob=volunteer_prob, annoy_prob=annoy_prob)
    state.informed_so_far.update(informs)
    state.pending_informs = [s for s in sorted(goal.constraints) if s not in informs]
    state.rng.shuffle(state.pending_informs)
    state.remaining_requests = set(goal.requests)
    act = DialogueAct(USER, "request", informs, frozenset({request}))
    return state, act


def _continue_agenda(state: UserSimState) -> DialogueAct:
    """Next move when the agent said nothing that demands a direct answer."""
    volunteer = state.pending_informs and (
        not state.remaining_requests or state.rng.random() < state.volunteer_prob)
    if volunteer:
        slot = state.pending_informs.pop()
        value = state.goal.constraints[slot]
        state.informed_so_far[slot] = value
        return DialogueAct(USER, "inform", {slot: value})
    if state.remaining_requests:
        pending = sorted(state.remaining_requests)
        slot = pending[int(state.rng.integers(len(pending)))]
        return DialogueAct(USER, "request", {}, frozenset({slot}))
    return DialogueAct(USER, "thanks")


def _verify_booking(state: UserSimState, act: DialogueAct) -> bool:
    informs = act.inform_slots
    if informs.get("ticket") in (None, NO_MATCH):
        return False
    if any(informs.get(s) != v for s, v in state.goal.constraints.items()):
        return False
    return not state.remaining_requests


def sim_step(state: UserSimState, agent_act: DialogueAct) -> tuple[DialogueAct, bool, bool]:
    """Advance one exchange: agent act in, (user act, terminal, success) out."""
    if state.terminal:
        raise ValueError("dialogue already terminated")
    if agent_act.speaker != AGENT:
        raise ValueError("sim_step expects an agent act")
    agent_act.validate(SlotSchema())

    state.agent_turns += 1

    sig = agent_act.signature()
    if sig == state.last_agent_signature:
        state.repeat_count += 1
    else:
        state.repeat_count = 1
        state.last_agent_signature = sig

    # Any agent inform answers matching open requests; booking grants the ticket.
    if agent_act.inform_slots:
        state.remaining_requests -= set(agent_act.inform_slots)

    def close(success: bool) -> tuple[DialogueAct, bool, bool]:
        state.terminal = True
        state.success = success
        return DialogueAct(USER, "closing"), True, success

    if "taskcomplete" in agent_act.inform_slots:
        return close(_verify_booking(state, agent_act))

    if agent_act.intent == "closing":
        return close(False)

    if state.repeat_count >= state.patience:
        return close(False)
    if state.agent_turns >= state.max_turns:
        return close(False)
    if state.agent_turns > state.soft_deadline and state.rng.random() < state.hangup_prob:
        return close(False)

    if agent_act.intent == "request" and agent_act.request_slots:
        slot = sorted(agent_act.request_slots)[0]
        if slot in state.goal.constraints:
            value = state.goal.constraints[slot]
            state.informed_so_far[slot] = value
            if slot in state.pending_informs:
                state.pending_informs.remove(slot)
            return DialogueAct(USER, "inform", {slot: value}), False, False
        if slot in state.informed_so_far:
            return DialogueAct(USER, "inform", {slot: state.informed_so_far[slot]}), False, False
        if state.rng.random() < state.annoy_prob:
            return close(False)
        return DialogueAct(USER, "not_sure"), False, False

    if agent_act.intent == "inform" and agent_act.inform_slots:
        mismatched = [
            s for s, v in agent_act.inform_slots.items()
            if s in state.goal.constraints and state.goal.constraints[s] != v
        ]
        if mismatched:
            slot = sorted(mismatched)[0]
            value = state.goal.constraints[slot]
            state.informed_so_far[slot] = value
            return DialogueAct(USER, "deny", {slot: value}), False, False
        return _continue_agenda(state), False, False

    return _continue_agenda(state), False, False


class UserSimulator:
    """Convenience wrapper binding schema-wide settings for dialogue loops."""

    def __init__(self, max_turns: int = MAX_TURNS, patience: int = DEFAULT_PATIENCE,
                 soft_deadline: int = DEFAULT_SOFT_DEADLINE,
                 hangup_prob: float = DEFAULT_HANGUP_PROB,
                 volunteer_prob: float = DEFAULT_VOLUNTEER_PROB,
                 annoy_prob: float = DEFAULT_ANNOY_PROB):
        self.max_turns = max_turns
        self.patience = patience
        self.soft_deadline = soft_deadline
        self.hangup_prob = hangup_prob
        self.volunteer_prob = volunteer_prob
        self.annoy_prob = annoy_prob
        self._state: UserSimState | None = None

    def reset(self, goal: UserGoal, rng: np.random.Generator) -> DialogueAct:
        self._state, act = sim_init(goal, rng, self.max_turns, self.patience,
                                    self.soft_deadline, self.hangup_prob,
                                    self.volunteer_prob, self.annoy_prob)
        return act

    def step(self, agent_act: DialogueAct) -> tuple[DialogueAct, bool, bool]:
        assert self._state is not None, "reset() first"
        return sim_step(self._state, agent_act)
