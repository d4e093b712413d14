"""Act-level vocabulary for the movie-ticket booking dialogue domain.

Defines the annotation schema (intents and slots), dialogue acts, user goals,
tracked dialogue state, experience tuples, the per-turn reward scheme, and the
end-of-dialogue success judgment shared by every other module. Everything here
is plain data plus pure functions; natural-language strings only appear via
the template renderer (see render.py) and are never parsed back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

INTENTS = (
    "request",
    "inform",
    "deny",
    "confirm_question",
    "confirm_answer",
    "greeting",
    "closing",
    "not_sure",
    "multiple_choice",
    "thanks",
    "welcome",
)

SLOTS = (
    "city",
    "closing",
    "date",
    "distanceconstraints",
    "greeting",
    "moviename",
    "numberofpeople",
    "price",
    "starttime",
    "state",
    "taskcomplete",
    "theater",
    "theater_chain",
    "ticket",
    "video_format",
    "zip",
)

# Slots that are attributes of a bookable show (one column per KB row).
INFORMABLE_SLOTS = (
    "city",
    "date",
    "distanceconstraints",
    "moviename",
    "numberofpeople",
    "price",
    "starttime",
    "theater",
    "theater_chain",
    "video_format",
    "zip",
)

# Slots a user goal may ask the agent for.
REQUESTABLE_SLOTS = ("ticket", "theater", "starttime", "price")

MAX_TURNS = 40

# Sentinel values used by the booking action. Only the booking action writes
# "taskcomplete", so judge_outcome cannot mistake an availability inform for a
# booked ticket.
BOOKED = "booked"
NO_MATCH = "no match available"
# A user answering not_sure to request(slot) has no constraint on that slot;
# the tracker records it so the policy can see which slots are resolved.
DONT_CARE = "dontcare"

AGENT = "agent"
USER = "user"


@dataclass(frozen=True)
class SlotSchema:
    """Fixed intent/slot inventory; the orderings define encoding indices."""

    intents: tuple[str, ...] = INTENTS
    slots: tuple[str, ...] = SLOTS
    informable_slots: tuple[str, ...] = INFORMABLE_SLOTS
    requestable_slots: tuple[str, ...] = REQUESTABLE_SLOTS

    def __post_init__(self):
        unknown = (set(self.informable_slots) | set(self.requestable_slots)) - set(self.slots)
        if unknown:
            raise ValueError(f"slots outside the schema: {sorted(unknown)}")

    def intent_index(self, intent: str) -> int:
        return self.intents.index(intent)

    def slot_index(self, slot: str) -> int:
        return self.slots.index(slot)


@dataclass(frozen=True)
class DialogueAct:
    """One utterance at the act level: intent plus slot/value payload."""

    speaker: str
    intent: str
    inform_slots: Mapping[str, str] = field(default_factory=dict)
    request_slots: frozenset[str] = frozenset()

    def validate(self, schema: SlotSchema) -> None:
        if self.speaker not in (AGENT, USER):
            raise ValueError(f"bad speaker {self.speaker!r}")
        if self.intent not in schema.intents:
            raise ValueError(f"unknown intent {self.intent!r}")
        for slot in list(self.inform_slots) + sorted(self.request_slots):
            if slot not in schema.slots:
                raise ValueError(f"unknown slot {slot!r}")

    def signature(self) -> tuple:
        """Content identity used for repeat detection and act lookup."""
        return (
            self.speaker,
            self.intent,
            tuple(sorted(self.inform_slots.items())),
            tuple(sorted(self.request_slots)),
        )

    def to_json(self) -> dict:
        return {
            "speaker": self.speaker,
            "intent": self.intent,
            "inform_slots": {k: self.inform_slots[k] for k in sorted(self.inform_slots)},
            "request_slots": sorted(self.request_slots),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DialogueAct":
        return cls(
            speaker=obj["speaker"],
            intent=obj["intent"],
            inform_slots=dict(obj.get("inform_slots", {})),
            request_slots=frozenset(obj.get("request_slots", ())),
        )


@dataclass(frozen=True)
class UserGoal:
    """A task instance: constraint slots to satisfy plus slots to ask about."""

    constraints: Mapping[str, str]
    requests: frozenset[str]

    def validate(self) -> None:
        if not self.constraints:
            raise ValueError("goal needs at least one constraint")
        if not self.requests:
            raise ValueError("goal needs at least one request")
        if "ticket" not in self.requests:
            raise ValueError("every goal requests a ticket")

    def key(self) -> tuple:
        return (tuple(sorted(self.constraints.items())), tuple(sorted(self.requests)))

    def signature(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        """Slot-level signature (values ignored); the category grouping key."""
        return (tuple(sorted(self.constraints)), tuple(sorted(self.requests)))

    def to_json(self) -> dict:
        return {
            "constraints": {k: self.constraints[k] for k in sorted(self.constraints)},
            "requests": sorted(self.requests),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "UserGoal":
        return cls(constraints=dict(obj["constraints"]), requests=frozenset(obj["requests"]))


class DialogueState:
    """Tracked dialogue state; one instance per dialogue, single-threaded use.

    ``turn`` counts agent turns taken. ``kb_match_count`` is maintained by the
    dialogue loop from the knowledge base under the user's informed
    constraints.
    """

    def __init__(self, kb_match_count: int = 0):
        self.turn = 0
        self.history: list[DialogueAct] = []
        self.user_informed: dict[str, str] = {}
        self.user_requested: set[str] = set()
        self.agent_informed: dict[str, str] = {}
        self.kb_match_count = kb_match_count
        self.last_user_intent: str | None = None
        self.last_agent_action_id: int | None = None

    def record_user_act(self, act: DialogueAct) -> None:
        if act.intent == "not_sure" and self.history:
            prev = self.history[-1]
            if prev.speaker == AGENT and prev.intent == "request":
                for slot in prev.request_slots:
                    self.user_informed.setdefault(slot, DONT_CARE)
        self.history.append(act)
        self.last_user_intent = act.intent
        self.user_informed.update(act.inform_slots)
        self.user_requested.update(act.request_slots)

    def record_agent_act(self, act: DialogueAct, action_id: int | None = None) -> None:
        self.history.append(act)
        self.turn += 1
        self.agent_informed.update(act.inform_slots)
        self.last_agent_action_id = action_id

    def copy(self) -> "DialogueState":
        dup = DialogueState(self.kb_match_count)
        dup.turn = self.turn
        dup.history = list(self.history)
        dup.user_informed = dict(self.user_informed)
        dup.user_requested = set(self.user_requested)
        dup.agent_informed = dict(self.agent_informed)
        dup.last_user_intent = self.last_user_intent
        dup.last_agent_action_id = self.last_agent_action_id
        return dup


@dataclass(frozen=True)
class Experience:
    """One transition; ``source`` decides which replay buffer it lands in."""

    state_vec: np.ndarray
    action_id: int
    reward: float
    user_act: DialogueAct
    next_state_vec: np.ndarray
    terminal: bool
    source: str  # human_human | human_agent | simulated


@dataclass(frozen=True)
class DialogueOutcome:
    success: bool
    turns: int
    cumulative_reward: float

    def to_json(self) -> dict:
        return {
            "success": self.success,
            "turns": self.turns,
            "cumulative_reward": self.cumulative_reward,
        }


def turn_reward(is_terminal: bool, success: bool, max_turns: int) -> float:
    """Reward component for one turn.

    Non-terminal turns cost -1. The terminal turn additionally earns 2L on
    success or -L on failure; the dialogue loop adds that to the ordinary -1,
    so a completed dialogue always totals -turns + (2L | -L).
    """
    if max_turns <= 0:
        raise ValueError("max_turns must be positive")
    if not is_terminal:
        return -1.0
    return 2.0 * max_turns if success else -float(max_turns)


def judge_outcome(goal: UserGoal, final_state: DialogueState, max_turns: int = MAX_TURNS) -> DialogueOutcome:
    """Decide success from the final tracked state.

    Success means the booking action fired ("taskcomplete" == booked), every
    goal constraint matches what the agent informed, and the dialogue stayed
    within the turn cap. Deterministic in (goal, final_state).
    """
    booked = final_state.agent_informed.get("taskcomplete") == BOOKED
    matched = all(final_state.agent_informed.get(s) == v for s, v in goal.constraints.items())
    success = booked and matched and final_state.turn <= max_turns
    turns = final_state.turn
    reward = -float(turns) + turn_reward(True, success, max_turns)
    return DialogueOutcome(success=success, turns=turns, cumulative_reward=reward)


def acts_to_jsonl(acts: Iterable[DialogueAct]) -> str:
    return "\n".join(json.dumps(a.to_json(), sort_keys=True) for a in acts)
