"""Q-network dialogue policy: state encoding, action space, replay, training.

Actions are act templates (request per informable slot, inform per requestable
slot, the plain conversational intents, and the booking act). Inform actions
are instantiated with the top KB row matching what the user has said so far;
an empty match informs "no match available". Replay buffers pool real and
simulated experience for Eq.-style TD training with a periodically synced
target network; Replay Buffer Spiking pre-trains on demonstration transitions.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import nnet
from .domain import (
    AGENT,
    BOOKED,
    DONT_CARE,
    MAX_TURNS,
    NO_MATCH,
    DialogueAct,
    DialogueState,
    Experience,
    SlotSchema,
)
from .kb import KnowledgeBase
from .nnet import DenseNet, OptimizerState

PLAIN_INTENTS = (
    "greeting", "confirm_question", "confirm_answer", "multiple_choice",
    "not_sure", "deny", "thanks", "closing",
)

KB_BUCKETS = 4  # match counts bucketed as 0, 1, 2-4, >=5


@dataclass(frozen=True)
class ActionTemplate:
    intent: str
    slot: str | None = None  # requested or informed slot; None for plain acts
    booking: bool = False

    def label(self) -> str:
        if self.booking:
            return "inform(taskcomplete)"
        if self.slot:
            return f"{self.intent}({self.slot})"
        return self.intent


def build_action_space(schema: SlotSchema) -> tuple[ActionTemplate, ...]:
    actions = [ActionTemplate("request", s) for s in schema.informable_slots]
    actions += [ActionTemplate("inform", s) for s in schema.requestable_slots]
    actions += [ActionTemplate(i) for i in PLAIN_INTENTS]
    actions.append(ActionTemplate("inform", "taskcomplete", booking=True))
    return tuple(actions)


@dataclass
class AgentConfig:
    hidden_size: int = 80
    gamma: float = 0.9
    epsilon: float = 0.1
    batch_size: int = 16
    buffer_capacity: int = 3000
    learning_rate: float = 5e-4
    weight_init: str = "paper"
    max_turns: int = MAX_TURNS

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")


class ReplayBuffer:
    """Ring of experiences, oldest evicted first; tracks per-source counts."""

    def __init__(self, capacity: int, label: str):
        self.capacity = capacity
        self.label = label  # "real" or "simulated"
        self.items: deque[Experience] = deque(maxlen=capacity)
        self.added_by_source: dict[str, int] = {}
        self.read_count = 0  # training-isolation audits

    def add(self, exp: Experience) -> None:
        self.items.append(exp)
        self.added_by_source[exp.source] = self.added_by_source.get(exp.source, 0) + 1

    def extend(self, exps) -> None:
        for e in exps:
            self.add(e)

    def __len__(self) -> int:
        return len(self.items)

    def sample(self, n: int, rng: np.random.Generator) -> list[Experience]:
        if not self.items:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self.items), size=n)
        self.read_count += 1
        return [self.items[int(i)] for i in idx]


def state_dim(schema: SlotSchema, n_actions: int) -> int:
    return len(schema.intents) + 3 * len(schema.slots) + n_actions + KB_BUCKETS + 1


def _kb_bucket(count: int) -> int:
    if count <= 0:
        return 0
    if count == 1:
        return 1
    if count <= 4:
        return 2
    return 3


def encode_state(state: DialogueState, schema: SlotSchema, n_actions: int,
                 max_turns: int = MAX_TURNS) -> np.ndarray:
    """Fixed-length features: last user intent, slot bags, last action, KB bucket, turn."""
    n_int, n_slot = len(schema.intents), len(schema.slots)
    vec = np.zeros(state_dim(schema, n_actions))
    off = 0
    if state.last_user_intent is not None:
        vec[off + schema.intent_index(state.last_user_intent)] = 1.0
    off += n_int
    for slot in state.user_informed:
        vec[off + schema.slot_index(slot)] = 1.0
    off += n_slot
    for slot in state.user_requested:
        vec[off + schema.slot_index(slot)] = 1.0
    off += n_slot
    for slot in state.agent_informed:
        vec[off + schema.slot_index(slot)] = 1.0
    off += n_slot
    if state.last_agent_action_id is not None:
        vec[off + state.last_agent_action_id] = 1.0
    off += n_actions
    vec[off + _kb_bucket(state.kb_match_count)] = 1.0
    off += KB_BUCKETS
    vec[off] = state.turn / max_turns
    return vec


def select_action(q_net: DenseNet, state_vec: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy over Q-values; greedy ties break to the lowest index."""
    n_actions = q_net.dims[-1]
    if rng.random() < epsilon:
        return int(rng.integers(n_actions))
    q, _ = nnet.forward(q_net, state_vec)
    return int(np.argmax(q))


def td_targets(batch: list[Experience], target_net: DenseNet, gamma: float) -> np.ndarray:
    """y = r for terminals, else r + gamma * max_a' Q'(s', a')."""
    if not batch:
        raise ValueError("empty batch")
    targets = np.array([e.reward for e in batch], dtype=float)
    live = [i for i, e in enumerate(batch) if not e.terminal]
    if live and gamma > 0.0:
        nxt = np.stack([batch[i].next_state_vec for i in live])
        q_next, _ = nnet.forward(target_net, nxt)
        targets[live] += gamma * q_next.max(axis=1)
    return targets


def _pooled_sample(buffers: list[ReplayBuffer], n: int, rng: np.random.Generator) -> list[Experience]:
    sizes = [len(b) for b in buffers]
    total = sum(sizes)
    if total == 0:
        raise ValueError("all replay buffers are empty")
    flat = rng.integers(0, total, size=n)
    out = []
    for j in flat:
        j = int(j)
        for b, size in zip(buffers, sizes):
            if j < size:
                b.read_count += 1
                out.append(b.items[j])
                break
            j -= size
    return out


def train_batch(q_net: DenseNet, target_net: DenseNet, buffers, config: AgentConfig,
                opt: OptimizerState, rng: np.random.Generator) -> float:
    """One pooled minibatch: MSE to TD targets at taken actions, one RMSProp step."""
    pool = buffers if isinstance(buffers, list) else [buffers]
    pool = [b for b in pool if len(b) > 0]
    batch = _pooled_sample(pool, config.batch_size, rng)
    states = np.stack([e.state_vec for e in batch])
    actions = np.array([e.action_id for e in batch])
    q_all, cache = nnet.forward(q_net, states)
    taken = q_all[np.arange(len(batch)), actions]
    targets = td_targets(batch, target_net, config.gamma)
    loss, dq = nnet.mse_loss(taken, targets)
    grad_out = np.zeros_like(q_all)
    grad_out[np.arange(len(batch)), actions] = dq
    grads, _ = nnet.backward(q_net, cache, grad_out)
    nnet.rmsprop_step(q_net, grads, opt)
    return loss


def sync_target(q_net: DenseNet) -> DenseNet:
    """Deep copy; later q_net updates leave the returned target untouched."""
    return q_net.copy()


class DQNAgent:
    """Policy wrapper owning the Q-net, target net, optimizer, and action space."""

    def __init__(self, schema: SlotSchema, config: AgentConfig, seed: int):
        self.schema = schema
        self.config = config
        self.action_space = build_action_space(schema)
        dims = [state_dim(schema, len(self.action_space)), config.hidden_size, len(self.action_space)]
        self.q_net = nnet.init_params(dims, seed, weight_init=config.weight_init)
        self.target_net = sync_target(self.q_net)
        self.opt = OptimizerState.for_net(self.q_net, learning_rate=config.learning_rate)

    @property
    def n_actions(self) -> int:
        return len(self.action_space)

    def encode(self, state: DialogueState) -> np.ndarray:
        return encode_state(state, self.schema, self.n_actions, self.config.max_turns)

    def select(self, state_vec: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
        return select_action(self.q_net, state_vec, epsilon, rng)

    def instantiate(self, action_id: int, state: DialogueState, kb: KnowledgeBase) -> DialogueAct:
        """Fill an action template against the KB under the user's constraints."""
        tpl = self.action_space[action_id]
        if tpl.intent == "request":
            return DialogueAct(AGENT, "request", {}, frozenset({tpl.slot}))
        if tpl.booking:
            row = kb.top_match(self._user_constraints(state))
            if row is None:
                return DialogueAct(AGENT, "inform", {"taskcomplete": NO_MATCH, "ticket": NO_MATCH})
            informs = dict(row)
            informs["taskcomplete"] = BOOKED
            informs["ticket"] = BOOKED
            return DialogueAct(AGENT, "inform", informs)
        if tpl.intent == "inform":
            if tpl.slot == "ticket":
                n = kb.match_count(self._user_constraints(state))
                return DialogueAct(AGENT, "inform", {"ticket": "available" if n else NO_MATCH})
            row = kb.top_match(self._user_constraints(state))
            value = row[tpl.slot] if row else NO_MATCH
            return DialogueAct(AGENT, "inform", {tpl.slot: value})
        return DialogueAct(AGENT, tpl.intent)

    def _user_constraints(self, state: DialogueState) -> dict[str, str]:
        return {s: v for s, v in state.user_informed.items()
                if s in self.schema.informable_slots and v != DONT_CARE}

    def act(self, state: DialogueState, kb: KnowledgeBase, epsilon: float,
            rng: np.random.Generator) -> tuple[int, DialogueAct]:
        action_id = self.select(self.encode(state), epsilon, rng)
        return action_id, self.instantiate(action_id, state, kb)

    def train_step(self, buffers, rng: np.random.Generator) -> float:
        return train_batch(self.q_net, self.target_net, buffers, self.config, self.opt, rng)

    def sync(self) -> None:
        self.target_net = sync_target(self.q_net)

    def save(self, path) -> None:
        extra = {
            "kind": "dqn-agent",
            "actions": [a.label() for a in self.action_space],
            "config": {
                "hidden_size": self.config.hidden_size,
                "gamma": self.config.gamma,
                "epsilon": self.config.epsilon,
                "batch_size": self.config.batch_size,
                "buffer_capacity": self.config.buffer_capacity,
                "learning_rate": self.config.learning_rate,
                "weight_init": self.config.weight_init,
                "max_turns": self.config.max_turns,
            },
        }
        nnet.save_net(path, self.q_net, extra)

    @classmethod
    def load(cls, path, schema: SlotSchema | None = None) -> "DQNAgent":
        net, extra = nnet.load_net(path)
        schema = schema or SlotSchema()
        config = AgentConfig(**extra["config"])
        agent = cls(schema, config, seed=0)
        if extra["actions"] != [a.label() for a in agent.action_space]:
            raise ValueError("checkpoint action manifest does not match the schema")
        agent.q_net = net
        agent.target_net = sync_target(net)
        agent.opt = OptimizerState.for_net(net, learning_rate=config.learning_rate)
        return agent


def rbs_pretrain(agent: DQNAgent, real_buffer: ReplayBuffer, demonstrations: list[Experience],
                 steps: int, rng: np.random.Generator, sync_every: int = 100) -> list[float]:
    """Replay Buffer Spiking: inject demonstrations, then train on them.

    The target net syncs every sync_every steps so bootstrapped values can
    propagate backwards through multi-turn demonstrations.
    """
    if not demonstrations:
        raise ValueError("no demonstrations to spike with")
    real_buffer.extend(demonstrations)
    losses = []
    for step in range(steps):
        losses.append(agent.train_step([real_buffer], rng))
        if sync_every and (step + 1) % sync_every == 0:
            agent.sync()
    return losses
