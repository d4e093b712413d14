"""Experiment harness: budgeted training loops, baselines, ablations, metrics.

Implements the iterative budgeted training procedure (scheduler -> active goal
sampling -> controller routing -> buffer updates -> pooled Q-learning with
planning) plus the SL/DQN/DDQ baselines and the two scheduler/sampler
ablations, with per-epoch greedy evaluation and reproducible CSV/JSON run
artifacts.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import bcs as bcs_mod
from . import worldmodel as wm_mod
from .agent import AgentConfig, DQNAgent, ReplayBuffer, rbs_pretrain
from .bcs import BudgetLedger, CategoryStats, controller_route
from .domain import (
    AGENT,
    DONT_CARE,
    MAX_TURNS,
    DialogueAct,
    DialogueOutcome,
    DialogueState,
    Experience,
    SlotSchema,
    UserGoal,
    turn_reward,
)
from .kb import KnowledgeBase, categorize_goals, enumerate_goals, generate_kb
from .usersim import UserSimulator
from .worldmodel import WorldModel, build_user_act_vocab, wm_rollout

AGENT_KINDS = ("sl", "dqn", "ddq", "bcs_ddq", "bcs_var1", "bcs_var2")
BCS_KINDS = ("bcs_ddq", "bcs_var1", "bcs_var2")

CURVE_HEADER = ("epoch", "success_rate", "avg_reward", "avg_turns",
                "spent_cumulative", "spent_hh", "spent_ha", "spent_sim")
ROUTES_HEADER = ("epoch", "lambda_k", "b_k_drawn", "b_k_clamped", "goals_sampled",
                 "route", "cost", "S_gu", "category_id")


@dataclass
class RunConfig:
    agent_kind: str
    budget: int
    epochs: int
    seed: int
    planning_steps: int = 5
    eval_dialogues: int = 50
    max_turns: int = MAX_TURNS
    goal_cap_per_epoch: int = 30
    estimate_rollouts: int = 10  # rollouts behind each S_gu estimate
    l_max: int = 128
    hidden_size: int = 80
    gamma: float = 0.9
    epsilon: float = 0.1
    learning_rate: float = 5e-4
    batch_size: int = 16
    buffer_capacity: int = 3000
    rbs_steps: int = 3000
    pretrain_dialogues: int = 10
    wm_pretrain_steps: int = 200
    wm_train_batches: int = 60
    max_train_batches: int = 120
    replay_passes: int = 2  # training updates per new transition, Dyna-style
    patience: int = 4
    soft_deadline: int = 12
    hangup_prob: float = 0.15
    corpus_novice_frac: float = 0.5  # share of flailing-novice dialogues in the logged corpus
    weight_init: str = "paper"
    demo_source: str = "rule"  # "rule" or "expert"
    expert_path: str | None = None
    kb_seed: int = 7
    kb_movies: int = 8
    kb_theaters: int = 6
    kb_cities: int = 4
    goal_seed: int = 19
    max_goals: int = 400
    out_dir: str | None = None

    def __post_init__(self):
        if self.agent_kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent kind {self.agent_kind!r}")
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if self.epochs < 1:
            raise ValueError("need at least one epoch")
        if self.planning_steps < 0:
            raise ValueError("planning steps must be non-negative")

    def agent_config(self) -> AgentConfig:
        return AgentConfig(
            hidden_size=self.hidden_size, gamma=self.gamma, epsilon=self.epsilon,
            batch_size=self.batch_size, buffer_capacity=self.buffer_capacity,
            learning_rate=self.learning_rate, weight_init=self.weight_init,
            max_turns=self.max_turns,
        )


@dataclass
class EpochMetrics:
    epoch: int
    success_rate: float
    avg_reward: float
    avg_turns: float
    spent_cumulative: int
    spent_hh: int
    spent_ha: int
    spent_sim: int

    def row(self) -> list[str]:
        return [str(self.epoch), f"{self.success_rate:.4f}", f"{self.avg_reward:.2f}",
                f"{self.avg_turns:.2f}", str(self.spent_cumulative), str(self.spent_hh),
                str(self.spent_ha), str(self.spent_sim)]


@dataclass
class RunResult:
    config: RunConfig
    metrics: list[EpochMetrics]
    ledger: BudgetLedger
    route_log: list[dict]
    agent: DQNAgent
    world_model: WorldModel | None

    @property
    def final(self) -> EpochMetrics:
        return self.metrics[-1]


class RuleAgent:
    """Scripted near-optimal policy: answer the user's question, otherwise ask
    about slots that surviving goal archetypes could still constrain, and book
    once every candidate slot is resolved.

    Used to bootstrap the expert checkpoint, as the fallback demonstration
    source, and as the known-good oracle in tests; shares the learner's
    action space so its experiences feed the same networks.
    """

    def __init__(self, schema: SlotSchema | None = None, max_turns: int = MAX_TURNS):
        from .agent import build_action_space, encode_state

        self.schema = schema or SlotSchema()
        self.action_space = build_action_space(self.schema)
        self.max_turns = max_turns
        self._index = {(a.intent, a.slot): i for i, a in enumerate(self.action_space)}
        self._encode = encode_state

    @property
    def n_actions(self) -> int:
        return len(self.action_space)

    def encode(self, state: DialogueState) -> np.ndarray:
        return self._encode(state, self.schema, self.n_actions, self.max_turns)

    def _action_id(self, state: DialogueState) -> int:
        from .kb import GOAL_ARCHETYPES

        last = state.history[-1] if state.history else None
        if last is not None and last.speaker != AGENT and last.request_slots:
            asked = sorted(last.request_slots)[0]
            if asked != "ticket" and ("inform", asked) in self._index:
                return self._index[("inform", asked)]
        # Track which user shapes are still consistent with what we know and
        # only ask about slots those shapes could constrain.
        confirmed = {s for s, v in state.user_informed.items()
                     if v != DONT_CARE and s != "moviename"}
        ruled_out = {s for s, v in state.user_informed.items() if v == DONT_CARE}
        candidates = [set(a) for a in GOAL_ARCHETYPES
                      if confirmed <= set(a) and not (ruled_out & set(a))]
        if not candidates:
            candidates = [set(a) for a in GOAL_ARCHETYPES]
        unresolved: dict[str, int] = {}
        for arch in candidates:
            for slot in arch - set(state.user_informed):
                unresolved[slot] = unresolved.get(slot, 0) + 1
        if unresolved:
            slot = max(sorted(unresolved), key=lambda s: unresolved[s])
            return self._index[("request", slot)]
        return self._index[("inform", "taskcomplete")]

    def act(self, state: DialogueState, kb: KnowledgeBase, epsilon: float,
            rng: np.random.Generator) -> tuple[int, DialogueAct]:
        action_id = self._action_id(state)
        return action_id, self.instantiate(action_id, state, kb)


# Scripted policies share the learner's KB-backed template instantiation.
RuleAgent.instantiate = DQNAgent.instantiate
RuleAgent._user_constraints = DQNAgent._user_constraints


class NovicePolicy:
    """Flailing prototype agent for the logged corpus: acts at random and
    books far too eagerly, supplying the premature-booking failures a
    demonstration-only corpus never contains."""

    def __init__(self, schema: SlotSchema | None = None, max_turns: int = MAX_TURNS,
                 booking_prob: float = 0.4):
        from .agent import build_action_space, encode_state

        self.schema = schema or SlotSchema()
        self.action_space = build_action_space(self.schema)
        self.max_turns = max_turns
        self.booking_prob = booking_prob
        self._booking_id = next(i for i, a in enumerate(self.action_space) if a.booking)
        self._encode = encode_state

    @property
    def n_actions(self) -> int:
        return len(self.action_space)

    def encode(self, state: DialogueState) -> np.ndarray:
        return self._encode(state, self.schema, self.n_actions, self.max_turns)

    def act(self, state: DialogueState, kb: KnowledgeBase, epsilon: float,
            rng: np.random.Generator) -> tuple[int, DialogueAct]:
        if rng.random() < self.booking_prob:
            action_id = self._booking_id
        else:
            action_id = int(rng.integers(self.n_actions))
        return action_id, self.instantiate(action_id, state, kb)


NovicePolicy.instantiate = DQNAgent.instantiate
NovicePolicy._user_constraints = DQNAgent._user_constraints


def run_dialogue(policy, kb: KnowledgeBase, goal: UserGoal, rng: np.random.Generator,
                 epsilon: float, source: str, max_turns: int = MAX_TURNS,
                 patience: int = 4, soft_deadline: int = 12,
                 hangup_prob: float = 0.15,
                 annoy_prob: float | None = None) -> tuple[list[Experience], DialogueOutcome, DialogueState]:
    """One complete dialogue between a policy and the simulated user."""
    user = UserSimulator(max_turns=max_turns, patience=patience,
                         soft_deadline=soft_deadline, hangup_prob=hangup_prob,
                         **({} if annoy_prob is None else {"annoy_prob": annoy_prob}))
    state = DialogueState(kb_match_count=len(kb))
    opening = user.reset(goal, rng)
    state.record_user_act(opening)
    state.kb_match_count = kb.match_count(_constraints_of(policy, state))

    experiences: list[Experience] = []
    success = False
    for _ in range(max_turns):
        s_vec = policy.encode(state)
        action_id, act = policy.act(state, kb, epsilon, rng)
        state.record_agent_act(act, action_id)
        user_act, terminal, success = user.step(act)
        state.record_user_act(user_act)
        state.kb_match_count = kb.match_count(_constraints_of(policy, state))
        reward = -1.0 + (turn_reward(True, success, max_turns) if terminal else 0.0)
        experiences.append(Experience(s_vec, action_id, reward, user_act,
                                      policy.encode(state), terminal, source))
        if terminal:
            break
    total = sum(e.reward for e in experiences)
    outcome = DialogueOutcome(success=success, turns=state.turn, cumulative_reward=total)
    return experiences, outcome, state


def _constraints_of(policy, state: DialogueState) -> dict[str, str]:
    informable = set(policy.schema.informable_slots)
    return {s: v for s, v in state.user_informed.items()
            if s in informable and v != DONT_CARE}


def _sim_params(config: RunConfig) -> dict:
    return {"max_turns": config.max_turns, "patience": config.patience,
            "soft_deadline": config.soft_deadline, "hangup_prob": config.hangup_prob}


def evaluate(policy, kb: KnowledgeBase, goals: list[UserGoal], n_dialogues: int,
             rng: np.random.Generator, max_turns: int = MAX_TURNS,
             patience: int = 4, soft_deadline: int = 12,
             hangup_prob: float = 0.15, annoy_prob: float | None = None,
             details: list | None = None) -> tuple[float, float, float]:
    """Greedy evaluation on freshly sampled goals; returns (success, reward, turns).

    When a list is passed as ``details``, (goal, outcome) pairs are appended
    so callers can reuse the evaluation as a validation pass.
    """
    wins, rewards, turns = 0, 0.0, 0
    for _ in range(n_dialogues):
        goal = goals[int(rng.integers(len(goals)))]
        _, outcome, _ = run_dialogue(policy, kb, goal, rng, 0.0, "human_agent",
                                     max_turns, patience, soft_deadline, hangup_prob,
                                     annoy_prob)
        if details is not None:
            details.append((goal, outcome))
        wins += int(outcome.success)
        rewards += outcome.cumulative_reward
        turns += outcome.turns
    n = max(n_dialogues, 1)
    return wins / n, rewards / n, turns / n


def build_setup(config: RunConfig) -> tuple[KnowledgeBase, list[UserGoal], list]:
    kb = KnowledgeBase(generate_kb(config.kb_seed, config.kb_movies,
                                   config.kb_theaters, config.kb_cities))
    goals = enumerate_goals(kb.rows, config.goal_seed, config.max_goals)
    categories = categorize_goals(goals, config.l_max)
    return kb, goals, categories


def _load_demo_policy(config: RunConfig, schema: SlotSchema):
    if config.demo_source == "expert":
        if not config.expert_path:
            raise ValueError("demo_source='expert' needs expert_path")
        return DQNAgent.load(config.expert_path, schema)
    if config.demo_source == "rule":
        return RuleAgent(schema, config.max_turns)
    raise ValueError(f"unknown demo source {config.demo_source!r}")


def _collect_demos(demo_policy, kb, goals, n_dialogues, rng, config) -> list[Experience]:
    demos: list[Experience] = []
    for _ in range(n_dialogues):
        goal = goals[int(rng.integers(len(goals)))]
        exps, _, _ = run_dialogue(demo_policy, kb, goal, rng, 0.0, "human_human",
                                  **_sim_params(config))
        demos.extend(exps)
    return demos


def _baseline_spend(budget: int, epochs: int, k: int) -> int:
    """floor(b/m) per epoch, remainder given to the earliest epochs."""
    return budget // epochs + (1 if k <= budget % epochs else 0)


def run_training(config: RunConfig, kb: KnowledgeBase | None = None,
                 goals: list[UserGoal] | None = None) -> RunResult:
    """Train one agent kind under one budget; writes artifacts if out_dir set."""
    schema = SlotSchema()
    if kb is None or goals is None:
        kb, goals, categories = build_setup(config)
    else:
        categories = categorize_goals(goals, config.l_max)

    ss = np.random.SeedSequence(config.seed)
    (init_rng, demo_rng, sample_rng, probe_rng, dialogue_rng,
     planning_rng, train_rng, wm_rng, eval_rng) = [np.random.default_rng(c) for c in ss.spawn(9)]

    agent = DQNAgent(schema, config.agent_config(), seed=int(init_rng.integers(2**31)))
    world_model = None
    wm_opts = None
    if config.agent_kind in ("ddq",) + BCS_KINDS:
        vocab = build_user_act_vocab(schema)
        world_model = wm_mod.init_world_model(
            agent.encode(DialogueState()).size, agent.n_actions, vocab,
            seed=int(init_rng.integers(2**31)), weight_init=config.weight_init)
        wm_opts = wm_mod.make_optimizers(world_model, config.learning_rate)

    real_buffer = ReplayBuffer(config.buffer_capacity, "real")
    sim_buffer = ReplayBuffer(config.buffer_capacity, "simulated")
    ledger = BudgetLedger(total_b=config.budget)
    stats = CategoryStats.fresh(len(categories))
    category_of = {g.key(): c.id for c in categories for g in c.goals}

    demo_policy = None
    if config.agent_kind == "sl" or config.agent_kind in BCS_KINDS or config.pretrain_dialogues > 0:
        demo_policy = _load_demo_policy(config, schema)

    # Warm start: the budget-free pre-collected corpus (a logged mixture of
    # competent demonstrations and flailing-novice dialogues, like any real
    # corpus), plus SL's purchased demonstrations.
    n_novice = round(config.pretrain_dialogues * config.corpus_novice_frac)
    pretrain = _collect_demos(demo_policy, kb, goals,
                              config.pretrain_dialogues - n_novice, demo_rng, config)
    novice = NovicePolicy(schema, config.max_turns)
    for _ in range(n_novice):
        goal = goals[int(demo_rng.integers(len(goals)))]
        exps, _, _ = run_dialogue(novice, kb, goal, demo_rng, 1.0, "human_human",
                                  **_sim_params(config))
        pretrain += exps
    route_log: list[dict] = []
    if config.agent_kind == "sl":
        # Purchased demonstrations are commissioned, so coverage is curated:
        # cycle goal categories rather than sampling the goal list blindly.
        n_paid = config.budget // 2
        for i in range(n_paid):
            ledger.charge("hh")
            route_log.append(_route_row(0, None, None, None, i + 1, "hh", 2, None, None))
            category = categories[i % len(categories)]
            goal = category.goals[int(demo_rng.integers(len(category.goals)))]
            exps, _, _ = run_dialogue(demo_policy, kb, goal, demo_rng, 0.0, "human_human",
                                      **_sim_params(config))
            pretrain += exps
    if pretrain:
        # Pretraining steps scale with corpus size so a larger demonstration
        # set (SL buys b/2 extra dialogues) is actually trained to the same
        # per-dialogue convergence.
        n_dialogues = config.pretrain_dialogues
        if config.agent_kind == "sl":
            n_dialogues += config.budget // 2
        scale = max(1.0, n_dialogues / max(config.pretrain_dialogues, 1))
        rbs_pretrain(agent, real_buffer, pretrain, int(config.rbs_steps * scale), train_rng)
        agent.sync()
    if world_model is not None and len(real_buffer) > 0 and config.wm_pretrain_steps > 0:
        wm_mod.wm_train(world_model, real_buffer, config.wm_pretrain_steps, wm_opts, wm_rng,
                        config.batch_size)

    metrics: list[EpochMetrics] = []
    for k in range(1, config.epochs + 1):
        # B^s holds only the current world model's rollouts; stale fantasies
        # from earlier model versions would otherwise linger for ~20 epochs.
        sim_buffer.items.clear()
        n_real = 0
        new_real = 0
        new_sim = 0
        if config.agent_kind in ("dqn", "ddq"):
            for i in range(_baseline_spend(config.budget, config.epochs, k)):
                goal = goals[int(sample_rng.integers(len(goals)))]
                exps, _, _ = run_dialogue(agent, kb, goal, dialogue_rng, config.epsilon,
                                          "human_agent", **_sim_params(config))
                real_buffer.extend(exps)
                new_real += len(exps)
                ledger.charge("ha")
                n_real += 1
                route_log.append(_route_row(k, None, None, None, i + 1, "ha", 1, None, None))
        elif config.agent_kind in BCS_KINDS:
            lam_k = (bcs_mod.flat_lambda(config.budget, config.epochs)
                     if config.agent_kind in ("bcs_var1", "bcs_var2")
                     else bcs_mod.decayed_lambda(config.budget, config.epochs, k))
            drawn = int(sample_rng.poisson(lam_k)) if config.budget > 0 else 0
            clamped = min(drawn, ledger.remaining)
            b_k = clamped
            samples = 0
            while samples < config.goal_cap_per_epoch:
                if config.agent_kind == "bcs_var2":
                    goal, cid = bcs_mod.uniform_sample_goal(categories, sample_rng)
                else:
                    goal, cid = bcs_mod.sample_goal(categories, stats, len(categories), sample_rng)
                probe_outcomes = []
                for _ in range(config.estimate_rollouts):
                    _, oc = wm_rollout(world_model, agent, kb, goal, config.max_turns,
                                       probe_rng, epsilon=config.epsilon)
                    probe_outcomes.append(oc)
                s_gu = sum(o.success for o in probe_outcomes) / max(len(probe_outcomes), 1)
                route, cost = controller_route(s_gu, b_k)
                if route == "sim":
                    exps, _ = wm_rollout(world_model, agent, kb, goal, config.max_turns,
                                         dialogue_rng, epsilon=config.epsilon)
                    sim_buffer.extend(exps)
                    new_sim += len(exps)
                elif route == "ha":
                    exps, _, _ = run_dialogue(agent, kb, goal, dialogue_rng, config.epsilon,
                                              "human_agent", **_sim_params(config))
                    real_buffer.extend(exps)
                    new_real += len(exps)
                    n_real += 1
                else:
                    exps, _, _ = run_dialogue(demo_policy, kb, goal, dialogue_rng, 0.0,
                                              "human_human", **_sim_params(config))
                    real_buffer.extend(exps)
                    new_real += len(exps)
                    n_real += 1
                ledger.charge(route)
                b_k -= cost
                samples += 1
                route_log.append(_route_row(k, lam_k, drawn, clamped, samples,
                                            route, cost, s_gu, cid))
                if b_k <= 0 and cost > 0:
                    break

        # Planning: fresh-goal rollouts through the world model into B^s.
        if world_model is not None and config.planning_steps > 0 and config.agent_kind != "sl":
            for _ in range(config.planning_steps * max(1, n_real)):
                goal = goals[int(planning_rng.integers(len(goals)))]
                exps, _ = wm_rollout(world_model, agent, kb, goal, config.max_turns,
                                     planning_rng, epsilon=config.epsilon)
                sim_buffer.extend(exps)
                new_sim += len(exps)

        if config.agent_kind != "sl":
            fresh = new_real + new_sim
            if fresh > 0:
                n_batches = min(math.ceil(fresh * config.replay_passes / config.batch_size),
                                config.max_train_batches)
                for _ in range(n_batches):
                    agent.train_step([real_buffer, sim_buffer], train_rng)
            if world_model is not None and len(real_buffer) > 0:
                steps = min(config.wm_train_batches,
                            math.ceil(max(new_real * config.replay_passes,
                                          len(real_buffer) // 4) / config.batch_size))
                wm_mod.wm_train(world_model, real_buffer, steps, wm_opts, wm_rng,
                                config.batch_size)
            agent.sync()

        eval_details: list = []
        success, reward, turns = evaluate(agent, kb, goals, config.eval_dialogues,
                                          eval_rng, details=eval_details,
                                          **_sim_params(config))
        if config.agent_kind in BCS_KINDS:
            by_cat: dict[int, list] = {}
            for goal, outcome in eval_details:
                cid = category_of.get(goal.key())
                if cid is not None:
                    by_cat.setdefault(cid, []).append(outcome)
            for cid, outcomes in sorted(by_cat.items()):
                bcs_mod.update_category_stats(stats, cid, outcomes)
        metrics.append(EpochMetrics(
            epoch=k, success_rate=success, avg_reward=reward, avg_turns=turns,
            spent_cumulative=ledger.spent_total,
            spent_hh=ledger.spent_by_route["hh"], spent_ha=ledger.spent_by_route["ha"],
            spent_sim=ledger.spent_by_route["sim"]))

    result = RunResult(config=config, metrics=metrics, ledger=ledger,
                       route_log=route_log, agent=agent, world_model=world_model)
    if config.out_dir:
        write_artifacts(result, config.out_dir)
    return result


def _route_row(epoch, lam_k, drawn, clamped, sampled, route, cost, s_gu, cid) -> dict:
    return {
        "epoch": str(epoch),
        "lambda_k": "" if lam_k is None else f"{lam_k:.6f}",
        "b_k_drawn": "" if drawn is None else str(drawn),
        "b_k_clamped": "" if clamped is None else str(clamped),
        "goals_sampled": str(sampled),
        "route": route,
        "cost": str(cost),
        "S_gu": "" if s_gu is None else f"{s_gu:.4f}",
        "category_id": "" if cid is None else str(cid),
    }


def write_artifacts(result: RunResult, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "curve.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CURVE_HEADER)
        for row in result.metrics:
            writer.writerow(row.row())
    with open(os.path.join(out_dir, "routes.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(ROUTES_HEADER)
        for row in result.route_log:
            writer.writerow([row[c] for c in ROUTES_HEADER])
    final = result.final
    payload = {
        "config": asdict(result.config),
        "final": {
            "success_rate": round(final.success_rate, 4),
            "avg_reward": round(final.avg_reward, 2),
            "avg_turns": round(final.avg_turns, 2),
        },
        "budget": result.ledger.snapshot(),
        "seed": result.config.seed,
    }
    with open(os.path.join(out_dir, "result.json"), "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
    result.agent.save(os.path.join(out_dir, "agent.ckpt"))
    if result.world_model is not None:
        wm_mod.save_world_model(os.path.join(out_dir, "worldmodel.ckpt"), result.world_model)


def _run_for_sweep(config: RunConfig) -> dict:
    result = run_training(config)
    return {"agent": config.agent_kind, "budget": config.budget, "seed": config.seed,
            "final_success": result.final.success_rate, "out_dir": config.out_dir}


def sweep(base: RunConfig, agents: list[str], budgets: list[int], runs: int,
          out_root: str, jobs: int = 1) -> list[dict]:
    """Run the full agents x budgets x seeds grid, one directory per run."""
    configs = []
    for agent_kind in agents:
        for budget in budgets:
            for seed in range(runs):
                out = os.path.join(out_root, f"{agent_kind}_b{budget}_s{seed}")
                configs.append(replace(base, agent_kind=agent_kind, budget=budget,
                                       seed=seed, out_dir=out))
    if jobs <= 1:
        return [_run_for_sweep(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_for_sweep, configs))


def aggregate_runs(run_dirs: list[str]) -> tuple[list[dict], list[dict]]:
    """Aggregate result.json/curve.csv across runs into mean/std tables."""
    by_cell: dict[tuple, list[dict]] = {}
    for run_dir in run_dirs:
        with open(os.path.join(run_dir, "result.json")) as f:
            payload = json.load(f)
        key = (payload["config"]["agent_kind"], payload["config"]["budget"])
        curve = []
        with open(os.path.join(run_dir, "curve.csv")) as f:
            for row in csv.DictReader(f):
                curve.append(row)
        by_cell.setdefault(key, []).append({"result": payload, "curve": curve})

    final_rows, curve_rows = [], []
    for (agent_kind, budget), runs_data in sorted(by_cell.items()):
        finals = np.array([r["result"]["final"]["success_rate"] for r in runs_data])
        rewards = np.array([r["result"]["final"]["avg_reward"] for r in runs_data])
        turns = np.array([r["result"]["final"]["avg_turns"] for r in runs_data])
        final_rows.append({
            "agent": agent_kind, "budget": budget, "n_runs": len(runs_data),
            "success_mean": f"{finals.mean():.4f}", "success_std": f"{finals.std():.4f}",
            "reward_mean": f"{rewards.mean():.2f}", "reward_std": f"{rewards.std():.2f}",
            "turns_mean": f"{turns.mean():.2f}", "turns_std": f"{turns.std():.2f}",
        })
        n_epochs = min(len(r["curve"]) for r in runs_data)
        for i in range(n_epochs):
            success = np.array([float(r["curve"][i]["success_rate"]) for r in runs_data])
            curve_rows.append({
                "agent": agent_kind, "budget": budget,
                "epoch": runs_data[0]["curve"][i]["epoch"], "n_runs": len(runs_data),
                "success_mean": f"{success.mean():.4f}", "success_std": f"{success.std():.4f}",
            })
    return final_rows, curve_rows


def write_plotdata(run_dirs: list[str], out_dir: str) -> None:
    final_rows, curve_rows = aggregate_runs(run_dirs)
    os.makedirs(out_dir, exist_ok=True)
    for name, rows in (("final.csv", final_rows), ("curves.csv", curve_rows)):
        with open(os.path.join(out_dir, name), "w", newline="") as f:
            if rows:
                writer = csv.DictWriter(f, fieldnames=list(rows[0]))
                writer.writeheader()
                writer.writerows(rows)


def build_expert(out_path: str, seed: int = 0, target: float = 0.85,
                 max_epochs: int = 60, config: RunConfig | None = None,
                 verbose: bool = False) -> tuple[str, float]:
    """Train the frozen demonstration expert: RBS on scripted-rule dialogues,
    then unbudgeted DQN epochs against the simulator until the target greedy
    success rate holds. Demonstrations stay in their own never-evicted buffer
    so the policy cannot drift away from them. Saved in the standard
    checkpoint format; returns (path, confirmation success over 200 dialogues).
    """
    config = config or RunConfig(agent_kind="dqn", budget=0, epochs=1, seed=seed)
    schema = SlotSchema()
    kb, goals, _ = build_setup(config)
    ss = np.random.SeedSequence(seed)
    demo_rng, dlg_rng, train_rng, eval_rng = [np.random.default_rng(c) for c in ss.spawn(4)]

    agent = DQNAgent(schema, config.agent_config(), seed=seed)
    rule = RuleAgent(schema, config.max_turns)
    demos = _collect_demos(rule, kb, goals, 400, demo_rng, config)
    demo_buffer = ReplayBuffer(len(demos), "real")
    rl_buffer = ReplayBuffer(8000, "real")
    # Random-policy dialogues first: they book early and fail, giving the
    # negative examples the all-success demonstrations cannot provide.
    for _ in range(150):
        goal = goals[int(dlg_rng.integers(len(goals)))]
        exps, _, _ = run_dialogue(agent, kb, goal, dlg_rng, 1.0, "human_agent",
                                  **_sim_params(config))
        rl_buffer.extend(exps)
    rbs_pretrain(agent, demo_buffer, demos, 1500, train_rng)
    for _ in range(1500):
        agent.train_step([demo_buffer, rl_buffer], train_rng)
    agent.sync()

    best_success, best_net = -1.0, agent.q_net.copy()
    confirmed = 0.0
    for epoch in range(max_epochs):
        success, _, _ = evaluate(agent, kb, goals, 100, eval_rng, **_sim_params(config))
        if success > best_success:
            best_success, best_net = success, agent.q_net.copy()
            if best_success >= target + 0.02:
                confirmed, _, _ = evaluate(agent, kb, goals, 200, eval_rng, **_sim_params(config))
                if verbose:
                    print(f"expert epoch {epoch}: candidate {best_success:.3f}, "
                          f"confirmed {confirmed:.3f}")
                if confirmed >= target:
                    break
        if verbose:
            print(f"expert epoch {epoch}: greedy success {success:.3f} (best {best_success:.3f})")
        epsilon = max(0.05, 0.3 - epoch * 0.01)
        for _ in range(40):
            goal = goals[int(dlg_rng.integers(len(goals)))]
            exps, _, _ = run_dialogue(agent, kb, goal, dlg_rng, epsilon, "human_agent",
                                      **_sim_params(config))
            rl_buffer.extend(exps)
        pool = len(demo_buffer) + len(rl_buffer)
        for _ in range(min(math.ceil(pool / config.batch_size), 300)):
            agent.train_step([demo_buffer, rl_buffer], train_rng)
        agent.sync()
    else:
        agent.q_net = best_net
        agent.sync()
        confirmed, _, _ = evaluate(agent, kb, goals, 200, eval_rng, **_sim_params(config))

    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    agent.save(out_path)
    return out_path, confirmed
