"""Multi-task user model: predicts the user's response, reward, and termination.

A shared tanh trunk reads (state, one-hot agent action); three task heads
(each with its own hidden layer) emit a softmax over user-act templates, a
linear reward, and a sigmoid termination probability. Trained supervised on
real experiences only; drives planning rollouts that fill the simulated
buffer at zero budget cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nnet
from .agent import DQNAgent
from .domain import (
    DONT_CARE,
    USER,
    DialogueAct,
    DialogueOutcome,
    DialogueState,
    Experience,
    SlotSchema,
    UserGoal,
)
from .kb import KnowledgeBase
from .nnet import DenseNet, OptimizerState
from .usersim import first_user_act


@dataclass(frozen=True)
class UserActTemplate:
    intent: str
    slot: str | None = None

    def label(self) -> str:
        return f"{self.intent}({self.slot})" if self.slot else self.intent


def build_user_act_vocab(schema: SlotSchema) -> tuple[UserActTemplate, ...]:
    """Response-shaped user acts: informs/denies per informable slot,
    re-requests per requestable slot, plus not_sure/thanks/closing."""
    vocab = [UserActTemplate("inform", s) for s in schema.informable_slots]
    vocab += [UserActTemplate("deny", s) for s in schema.informable_slots]
    vocab += [UserActTemplate("request", s) for s in schema.requestable_slots]
    vocab += [UserActTemplate("not_sure"), UserActTemplate("thanks"), UserActTemplate("closing")]
    return tuple(vocab)


def encode_user_act(act: DialogueAct, vocab: tuple[UserActTemplate, ...]) -> int:
    """Map an observed user act to a template id, degrading gracefully."""
    index = {(t.intent, t.slot): i for i, t in enumerate(vocab)}
    if act.intent in ("inform", "deny"):
        slots = sorted(act.inform_slots)
    else:
        slots = sorted(act.request_slots)
    primary = slots[0] if slots else None
    for key in ((act.intent, primary), (act.intent, None)):
        if key in index:
            return index[key]
    return index[("not_sure", None)]


def instantiate_user_act(idx: int, goal: UserGoal, vocab: tuple[UserActTemplate, ...]) -> DialogueAct:
    """Fill a template with values from the active goal."""
    tpl = vocab[idx]
    if tpl.intent in ("inform", "deny"):
        value = goal.constraints.get(tpl.slot, "dontcare")
        return DialogueAct(USER, tpl.intent, {tpl.slot: value})
    if tpl.intent == "request":
        return DialogueAct(USER, "request", {}, frozenset({tpl.slot}))
    return DialogueAct(USER, tpl.intent)


@dataclass
class WorldModel:
    trunk: DenseNet
    reward_head: DenseNet
    act_head: DenseNet
    term_head: DenseNet
    vocab: tuple[UserActTemplate, ...]
    n_actions: int
    state_size: int

    def nets(self) -> list[DenseNet]:
        return [self.trunk, self.reward_head, self.act_head, self.term_head]

    def copy(self) -> "WorldModel":
        return WorldModel(self.trunk.copy(), self.reward_head.copy(), self.act_head.copy(),
                          self.term_head.copy(), self.vocab, self.n_actions, self.state_size)


def init_world_model(state_size: int, n_actions: int, vocab: tuple[UserActTemplate, ...],
                     seed: int, hidden: int = 80, weight_init: str = "paper") -> WorldModel:
    rng = np.random.default_rng(seed)
    seeds = [int(rng.integers(2**31)) for _ in range(4)]
    in_dim = state_size + n_actions
    return WorldModel(
        trunk=nnet.init_params([in_dim, hidden], seeds[0], ["tanh"], weight_init),
        reward_head=nnet.init_params([hidden, hidden, 1], seeds[1], ["tanh", "linear"], weight_init),
        act_head=nnet.init_params([hidden, hidden, len(vocab)], seeds[2], ["tanh", "softmax"], weight_init),
        term_head=nnet.init_params([hidden, hidden, 1], seeds[3], ["tanh", "sigmoid"], weight_init),
        vocab=vocab,
        n_actions=n_actions,
        state_size=state_size,
    )


def _wm_input(wm: WorldModel, state_vecs: np.ndarray, action_ids) -> np.ndarray:
    states = np.atleast_2d(np.asarray(state_vecs, dtype=float))
    ids = np.atleast_1d(action_ids)
    onehot = np.zeros((states.shape[0], wm.n_actions))
    onehot[np.arange(states.shape[0]), ids] = 1.0
    return np.concatenate([states, onehot], axis=1)


def wm_forward(wm: WorldModel, state_vec: np.ndarray, action_id: int) -> tuple[np.ndarray, float, float]:
    """Single-step prediction: (user-act distribution, reward, termination prob)."""
    x = _wm_input(wm, state_vec, action_id)
    h, _ = nnet.forward(wm.trunk, x)
    probs, _ = nnet.forward(wm.act_head, h)
    reward, _ = nnet.forward(wm.reward_head, h)
    term, _ = nnet.forward(wm.term_head, h)
    return probs[0], float(reward[0, 0]), float(term[0, 0])


def wm_train(wm: WorldModel, real_buffer, steps: int, opts: dict[str, OptimizerState],
             rng: np.random.Generator, batch_size: int = 16) -> dict[str, list[float]]:
    """Joint supervised training on the real buffer: CE(a^u) + MSE(r) + BCE(t)."""
    if len(real_buffer) == 0:
        raise ValueError("real buffer is empty")
    if real_buffer.label != "real":
        raise ValueError("world model trains on real experience only")
    history: dict[str, list[float]] = {"act": [], "reward": [], "term": []}
    for _ in range(steps):
        batch = real_buffer.sample(batch_size, rng)
        states = np.stack([e.state_vec for e in batch])
        ids = np.array([e.action_id for e in batch])
        x = _wm_input(wm, states, ids)
        act_targets = np.array([encode_user_act(e.user_act, wm.vocab) for e in batch])
        reward_targets = np.array([[e.reward] for e in batch])
        term_targets = np.array([[1.0 if e.terminal else 0.0] for e in batch])

        h, trunk_cache = nnet.forward(wm.trunk, x)
        probs, act_cache = nnet.forward(wm.act_head, h)
        rewards, reward_cache = nnet.forward(wm.reward_head, h)
        terms, term_cache = nnet.forward(wm.term_head, h)

        act_loss, d_probs = nnet.cross_entropy_loss(probs, act_targets)
        reward_loss, d_rewards = nnet.mse_loss(rewards, reward_targets)
        term_loss, d_terms = nnet.bce_loss(terms, term_targets)

        act_grads, dh_a = nnet.backward(wm.act_head, act_cache, d_probs)
        reward_grads, dh_r = nnet.backward(wm.reward_head, reward_cache, d_rewards)
        term_grads, dh_t = nnet.backward(wm.term_head, term_cache, d_terms)
        trunk_grads, _ = nnet.backward(wm.trunk, trunk_cache, dh_a + dh_r + dh_t)

        nnet.rmsprop_step(wm.act_head, act_grads, opts["act"])
        nnet.rmsprop_step(wm.reward_head, reward_grads, opts["reward"])
        nnet.rmsprop_step(wm.term_head, term_grads, opts["term"])
        nnet.rmsprop_step(wm.trunk, trunk_grads, opts["trunk"])

        history["act"].append(act_loss)
        history["reward"].append(reward_loss)
        history["term"].append(term_loss)
    return history


def make_optimizers(wm: WorldModel, learning_rate: float = 5e-4) -> dict[str, OptimizerState]:
    return {
        "trunk": OptimizerState.for_net(wm.trunk, learning_rate=learning_rate),
        "reward": OptimizerState.for_net(wm.reward_head, learning_rate=learning_rate),
        "act": OptimizerState.for_net(wm.act_head, learning_rate=learning_rate),
        "term": OptimizerState.for_net(wm.term_head, learning_rate=learning_rate),
    }


def wm_rollout(wm: WorldModel, agent: DQNAgent, kb: KnowledgeBase, goal: UserGoal,
               max_turns: int, rng: np.random.Generator,
               epsilon: float = 0.0) -> tuple[list[Experience], DialogueOutcome]:
    """Simulated dialogue: agent acts, the model answers, terminates, and scores.

    A rollout counts as a success iff the sampled termination fired and the
    predicted reward on that final step is positive. Experiences are tagged
    source="simulated".
    """
    state = DialogueState(kb_match_count=len(kb))
    informs, request = first_user_act(goal, rng)
    state.record_user_act(DialogueAct(USER, "request", informs, frozenset({request})))
    state.kb_match_count = kb.match_count(informs)

    experiences: list[Experience] = []
    total_reward = 0.0
    success = False
    for _ in range(max_turns):
        s_vec = agent.encode(state)
        action_id = agent.select(s_vec, epsilon, rng)
        act = agent.instantiate(action_id, state, kb)
        state.record_agent_act(act, action_id)

        probs, reward, term_prob = wm_forward(wm, s_vec, action_id)
        user_idx = int(rng.choice(len(probs), p=probs / probs.sum()))
        terminal = bool(rng.random() < term_prob)
        user_act = instantiate_user_act(user_idx, goal, wm.vocab)

        state.record_user_act(user_act)
        state.kb_match_count = kb.match_count(
            {s: v for s, v in state.user_informed.items()
             if s in agent.schema.informable_slots and v != DONT_CARE})
        next_vec = agent.encode(state)
        experiences.append(Experience(s_vec, action_id, reward, user_act, next_vec,
                                      terminal, source="simulated"))
        total_reward += reward
        if terminal:
            success = reward > 0.0
            break
    return experiences, DialogueOutcome(success=success, turns=state.turn,
                                        cumulative_reward=total_reward)


def save_world_model(path, wm: WorldModel) -> None:
    import json

    header = {
        "kind": "world-model",
        "vocab": [t.label() for t in wm.vocab],
        "n_actions": wm.n_actions,
        "state_size": wm.state_size,
        "nets": [{"dims": n.dims, "activations": n.activations} for n in wm.nets()],
    }
    blob = b"".join(
        arr.astype("<f8").tobytes()
        for net in wm.nets()
        for w, b in zip(net.weights, net.biases)
        for arr in (w, b)
    )
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode())
        f.write(b"\n")
        f.write(blob)


def load_world_model(path, schema: SlotSchema | None = None) -> WorldModel:
    import json

    schema = schema or SlotSchema()
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode())
        flat = np.frombuffer(f.read(), dtype="<f8")
    vocab = build_user_act_vocab(schema)
    if [t.label() for t in vocab] != header["vocab"]:
        raise ValueError("user-act vocabulary manifest does not match the schema")
    nets = []
    pos = 0
    for spec in header["nets"]:
        dims = spec["dims"]
        weights, biases = [], []
        for d_in, d_out in zip(dims[:-1], dims[1:]):
            weights.append(flat[pos:pos + d_out * d_in].reshape(d_out, d_in).copy())
            pos += d_out * d_in
            biases.append(flat[pos:pos + d_out].copy())
            pos += d_out
        nets.append(DenseNet(dims=list(dims), activations=list(spec["activations"]),
                             weights=weights, biases=biases))
    if pos != flat.size:
        raise ValueError("checkpoint size mismatch")
    return WorldModel(nets[0], nets[1], nets[2], nets[3], vocab,
                      header["n_actions"], header["state_size"])
