import os

import numpy as np
import pytest

from budgetdyna.domain import SlotSchema
from budgetdyna.kb import KnowledgeBase, categorize_goals, enumerate_goals, generate_kb
from budgetdyna.trainer import RunConfig, build_expert

ARTIFACTS = os.path.join(os.path.dirname(__file__), "artifacts")
EXPERT_PATH = os.path.join(ARTIFACTS, "expert.ckpt")


@pytest.fixture(scope="session")
def schema():
    return SlotSchema()


@pytest.fixture(scope="session")
def kb():
    return KnowledgeBase(generate_kb(7, 8, 6, 4))


@pytest.fixture(scope="session")
def goals(kb):
    return enumerate_goals(kb.rows, 19, 400)


@pytest.fixture(scope="session")
def categories(goals):
    return categorize_goals(goals, 128)


@pytest.fixture(scope="session")
def expert_path():
    """The frozen demonstration expert, built once and cached on disk."""
    os.makedirs(ARTIFACTS, exist_ok=True)
    if not os.path.exists(EXPERT_PATH):
        path, success = build_expert(EXPERT_PATH, seed=0, target=0.85)
        assert success >= 0.8, f"expert build fell short: {success:.3f}"
    return EXPERT_PATH


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


def base_config(**overrides) -> RunConfig:
    defaults = dict(agent_kind="dqn", budget=50, epochs=5, seed=0,
                    eval_dialogues=10, goal_cap_per_epoch=6, estimate_rollouts=4,
                    rbs_steps=100, wm_pretrain_steps=50, pretrain_dialogues=6)
    defaults.update(overrides)
    return RunConfig(**defaults)
