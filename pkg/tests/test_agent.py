import numpy as np
import pytest

from budgetdyna import nnet
from budgetdyna.agent import (
    AgentConfig,
    DQNAgent,
    ReplayBuffer,
    build_action_space,
    encode_state,
    rbs_pretrain,
    select_action,
    state_dim,
    sync_target,
    td_targets,
    train_batch,
)
from budgetdyna.domain import (
    BOOKED,
    NO_MATCH,
    USER,
    DialogueAct,
    DialogueState,
    Experience,
)
from budgetdyna.trainer import RuleAgent, _collect_demos, evaluate


def _exp(reward=-1.0, terminal=False, action=0, dim=6, source="human_agent", rng=None):
    rng = rng or np.random.default_rng(0)
    return Experience(rng.normal(size=dim), action, reward,
                      DialogueAct(USER, "thanks"), rng.normal(size=dim), terminal, source)


def test_action_space_structure(schema):
    actions = build_action_space(schema)
    labels = [a.label() for a in actions]
    assert len(labels) == len(set(labels))
    assert sum(a.intent == "request" for a in actions) == len(schema.informable_slots)
    assert sum(a.intent == "inform" and not a.booking for a in actions) == len(schema.requestable_slots)
    assert sum(a.booking for a in actions) == 1
    assert "closing" in labels and "greeting" in labels


def test_encode_state_dimension(schema):
    n_actions = len(build_action_space(schema))
    # one-hot intents + three slot bags + last action + 4 kb buckets + turn scalar
    expected = 11 + 16 + 16 + 16 + n_actions + 4 + 1
    assert state_dim(schema, n_actions) == expected
    assert encode_state(DialogueState(), schema, n_actions).size == expected


def test_encode_initial_state(schema):
    n_actions = len(build_action_space(schema))
    vec = encode_state(DialogueState(kb_match_count=100), schema, n_actions)
    bucket_base = 11 + 48 + n_actions
    assert vec[bucket_base + 3] == 1.0  # the ">=5 rows" bucket
    assert vec.sum() == 1.0  # everything else zero, turn scalar 0


def test_encode_turn_scalar_only_difference(schema):
    n_actions = len(build_action_space(schema))
    s1, s2 = DialogueState(kb_match_count=9), DialogueState(kb_match_count=9)
    s2.turn = 10
    v1 = encode_state(s1, schema, n_actions, max_turns=40)
    v2 = encode_state(s2, schema, n_actions, max_turns=40)
    diff = np.nonzero(v1 != v2)[0]
    assert list(diff) == [v1.size - 1]
    assert v2[-1] == pytest.approx(0.25)


def test_encode_kb_buckets(schema):
    n_actions = len(build_action_space(schema))
    base = 11 + 48 + n_actions
    for count, bucket in [(0, 0), (1, 1), (2, 2), (4, 2), (5, 3), (50, 3)]:
        vec = encode_state(DialogueState(kb_match_count=count), schema, n_actions)
        assert vec[base + bucket] == 1.0


def test_select_action_greedy_and_ties():
    net = nnet.init_params([4, 3], seed=0, activations=["linear"])
    net.weights[0][:] = 0.0
    rng = np.random.default_rng(0)
    net.biases[0][:] = [1.0, 5.0, 2.0]
    assert select_action(net, np.zeros(4), 0.0, rng) == 1
    net.biases[0][:] = [5.0, 5.0, 0.0]
    assert select_action(net, np.zeros(4), 0.0, rng) == 0  # lowest index wins ties


def test_select_action_uniform_when_fully_random():
    net = nnet.init_params([4, 24], seed=1)
    rng = np.random.default_rng(7)
    counts = np.zeros(24)
    n = 10000
    for _ in range(n):
        counts[select_action(net, np.zeros(4), 1.0, rng)] += 1
    p = 1 / 24
    sigma = np.sqrt(n * p * (1 - p))
    assert (np.abs(counts - n * p) <= 3 * sigma).all()


def test_td_targets_terminal_and_discount():
    net = nnet.init_params([6, 3], seed=0, activations=["linear"])
    net.weights[0][:] = 0.0
    net.biases[0][:] = [0.0, 10.0, 4.0]
    terminal = _exp(reward=80.0, terminal=True)
    assert td_targets([terminal], net, 0.9)[0] == pytest.approx(80.0)
    live = _exp(reward=-1.0, terminal=False)
    assert td_targets([live], net, 0.9)[0] == pytest.approx(-1.0 + 0.9 * 10.0)
    assert td_targets([live], net, 0.0)[0] == pytest.approx(-1.0)
    assert td_targets([_exp(reward=3.0, terminal=True)], net, 0.9)[0] == 3.0


def test_td_targets_terminal_batch_ignores_target_net():
    batch = [_exp(reward=r, terminal=True) for r in (80.0, -40.0, -1.0)]
    n1 = nnet.init_params([6, 3], seed=1)
    n2 = nnet.init_params([6, 3], seed=2)
    assert (td_targets(batch, n1, 0.9) == td_targets(batch, n2, 0.9)).all()


def test_replay_buffer_capacity_and_eviction():
    buf = ReplayBuffer(5, "real")
    for i in range(8):
        buf.add(_exp(reward=float(i)))
    assert len(buf) == 5
    assert [e.reward for e in buf.items] == [3.0, 4.0, 5.0, 6.0, 7.0]
    with pytest.raises(ValueError):
        ReplayBuffer(2, "real").sample(1, np.random.default_rng(0))


def test_train_batch_errors_when_empty(schema):
    agent = DQNAgent(schema, AgentConfig(), seed=0)
    with pytest.raises(ValueError):
        train_batch(agent.q_net, agent.target_net, [ReplayBuffer(5, "real")],
                    agent.config, agent.opt, np.random.default_rng(0))


def test_train_batch_drives_single_transition_loss_down(schema):
    agent = DQNAgent(schema, AgentConfig(), seed=0)
    buf = ReplayBuffer(10, "real")
    vec = agent.encode(DialogueState(kb_match_count=7))
    buf.add(Experience(vec, 3, -1.0, DialogueAct(USER, "thanks"), vec, True, "human_agent"))
    rng = np.random.default_rng(1)
    losses = [agent.train_step([buf], rng) for _ in range(300)]
    assert losses[-1] < 1e-3
    assert all(l >= 0 for l in losses)


def test_train_batch_matches_closed_form_for_gamma_zero(schema):
    config = AgentConfig(gamma=0.0, batch_size=16)
    agent = DQNAgent(schema, config, seed=0)
    dim = agent.encode(DialogueState()).size
    rng = np.random.default_rng(2)
    buf = ReplayBuffer(4, "real")
    exps = [_exp(reward=5.0, terminal=False, action=1, dim=dim, rng=rng),
            _exp(reward=-3.0, terminal=True, action=2, dim=dim, rng=rng)]
    for e in exps:
        buf.add(e)
    sample_rng = np.random.default_rng(3)
    picked = [buf.items[int(i)] for i in
              np.random.default_rng(3).integers(0, 2, size=16)]
    expected = 0.0
    for e in picked:
        q, _ = nnet.forward(agent.q_net, e.state_vec)
        expected += (e.reward - q[e.action_id]) ** 2
    expected /= 16
    loss = train_batch(agent.q_net, agent.target_net, [buf], config, agent.opt,
                       np.random.default_rng(3))
    assert loss == pytest.approx(expected)


def test_sync_target_is_deep_copy(schema):
    agent = DQNAgent(schema, AgentConfig(), seed=0)
    target = sync_target(agent.q_net)
    q_before, _ = nnet.forward(target, np.zeros(agent.q_net.dims[0]))
    agent.q_net.weights[0][:] += 1.0
    q_after, _ = nnet.forward(target, np.zeros(agent.q_net.dims[0]))
    assert (q_before == q_after).all()


def test_rbs_pretrain_zero_steps_no_change(schema):
    agent = DQNAgent(schema, AgentConfig(), seed=0)
    before = [w.copy() for w in agent.q_net.weights]
    dim = agent.encode(DialogueState()).size
    rbs_pretrain(agent, ReplayBuffer(50, "real"), [_exp(dim=dim)], 0,
                 np.random.default_rng(0))
    assert all((w == b).all() for w, b in zip(agent.q_net.weights, before))
    with pytest.raises(ValueError):
        rbs_pretrain(agent, ReplayBuffer(5, "real"), [], 10, np.random.default_rng(0))


def test_rbs_pretrain_beats_untrained_agent(schema, kb, goals):
    # pretraining on 50 expert dialogues lifts greedy success above untrained
    from budgetdyna.trainer import RunConfig

    config = RunConfig(agent_kind="sl", budget=0, epochs=1, seed=0)
    rng = np.random.default_rng(5)
    demos = _collect_demos(RuleAgent(schema), kb, goals, 50, rng, config)
    goal_pool = goals[:80]
    untrained = DQNAgent(schema, AgentConfig(), seed=0)
    base, _, _ = evaluate(untrained, kb, goal_pool, 100, np.random.default_rng(6))
    trained = DQNAgent(schema, AgentConfig(), seed=0)
    rbs_pretrain(trained, ReplayBuffer(3000, "real"), demos, 3000, rng)
    trained.sync()
    lifted, _, _ = evaluate(trained, kb, goal_pool, 100, np.random.default_rng(6))
    assert lifted > base


def test_instantiate_actions_against_kb(schema, kb):
    agent = DQNAgent(schema, AgentConfig(), seed=0)
    state = DialogueState(kb_match_count=len(kb))
    row = kb.rows[0]
    state.record_user_act(DialogueAct(USER, "request",
                                      {"moviename": row["moviename"]}, frozenset({"ticket"})))
    book_id = next(i for i, a in enumerate(agent.action_space) if a.booking)
    act = agent.instantiate(book_id, state, kb)
    assert act.inform_slots["taskcomplete"] == BOOKED
    assert act.inform_slots["moviename"] == row["moviename"]
    state2 = DialogueState()
    state2.record_user_act(DialogueAct(USER, "inform", {"moviename": "no such film"}))
    act2 = agent.instantiate(book_id, state2, kb)
    assert act2.inform_slots["taskcomplete"] == NO_MATCH
    req_id = next(i for i, a in enumerate(agent.action_space)
                  if a.intent == "request" and a.slot == "theater")
    act3 = agent.instantiate(req_id, state, kb)
    assert act3.request_slots == frozenset({"theater"})


def test_agent_checkpoint_round_trip(tmp_path, schema):
    agent = DQNAgent(schema, AgentConfig(epsilon=0.25), seed=4)
    path = tmp_path / "agent.ckpt"
    agent.save(path)
    loaded = DQNAgent.load(path)
    assert loaded.config.epsilon == 0.25
    x = np.zeros(agent.q_net.dims[0])
    assert (nnet.forward(loaded.q_net, x)[0] == nnet.forward(agent.q_net, x)[0]).all()


def test_greedy_policy_is_deterministic(schema, kb, rng):
    agent = DQNAgent(schema, AgentConfig(), seed=1)
    state = DialogueState(kb_match_count=len(kb))
    vec = agent.encode(state)
    picks = {agent.select(vec, 0.0, np.random.default_rng(i)) for i in range(10)}
    assert len(picks) == 1
