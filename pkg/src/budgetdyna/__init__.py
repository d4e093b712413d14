"""Budget-conscious Dyna-Q dialogue policy learning at desk scale."""

from .domain import (
    DialogueAct,
    DialogueOutcome,
    DialogueState,
    Experience,
    SlotSchema,
    UserGoal,
    judge_outcome,
    turn_reward,
)
from .kb import KnowledgeBase, categorize_goals, enumerate_goals, generate_kb, kb_query
from .trainer import RunConfig, RuleAgent, evaluate, run_training

__version__ = "0.1.0"

__all__ = [
    "DialogueAct",
    "DialogueOutcome",
    "DialogueState",
    "Experience",
    "KnowledgeBase",
    "RuleAgent",
    "RunConfig",
    "SlotSchema",
    "UserGoal",
    "categorize_goals",
    "enumerate_goals",
    "evaluate",
    "generate_kb",
    "judge_outcome",
    "kb_query",
    "run_training",
    "turn_reward",
]
