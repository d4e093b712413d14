import numpy as np
import pytest

from budgetdyna import nnet
from budgetdyna.agent import AgentConfig, DQNAgent, ReplayBuffer
from budgetdyna.domain import USER, DialogueAct, DialogueState, Experience
from budgetdyna.trainer import RuleAgent, RunConfig, _collect_demos, run_dialogue
from budgetdyna.worldmodel import (
    build_user_act_vocab,
    encode_user_act,
    init_world_model,
    instantiate_user_act,
    load_world_model,
    make_optimizers,
    save_world_model,
    wm_forward,
    wm_rollout,
    wm_train,
)


@pytest.fixture()
def wm(schema):
    vocab = build_user_act_vocab(schema)
    agent = DQNAgent(schema, AgentConfig(), seed=0)
    dim = agent.encode(DialogueState()).size
    return init_world_model(dim, agent.n_actions, vocab, seed=5)


@pytest.fixture()
def trained_agent(schema):
    return DQNAgent(schema, AgentConfig(), seed=0)


def _real_buffer(kb, goals, config, n_dialogues=60, seed=3):
    rng = np.random.default_rng(seed)
    buf = ReplayBuffer(3000, "real")
    rule = RuleAgent()
    for i in range(n_dialogues):
        goal = goals[int(rng.integers(len(goals)))]
        eps = 0.0 if i % 2 == 0 else 0.6
        exps, _, _ = run_dialogue(rule, kb, goal, rng, eps, "human_agent")
        buf.extend(exps)
    return buf


def test_vocab_covers_simulator_responses(schema):
    vocab = build_user_act_vocab(schema)
    labels = {t.label() for t in vocab}
    assert len(labels) == len(vocab)
    n_inf = len(schema.informable_slots)
    assert len(vocab) == 2 * n_inf + len(schema.requestable_slots) + 3
    for slot in schema.informable_slots:
        assert f"inform({slot})" in labels and f"deny({slot})" in labels
    for slot in schema.requestable_slots:
        assert f"request({slot})" in labels
    assert {"not_sure", "thanks", "closing"} <= labels


def test_encode_user_act_round_trip(schema, goals):
    vocab = build_user_act_vocab(schema)
    goal = goals[0]
    for idx in range(len(vocab)):
        act = instantiate_user_act(idx, goal, vocab)
        assert encode_user_act(act, vocab) == idx


def test_encode_user_act_graceful_fallbacks(schema):
    vocab = build_user_act_vocab(schema)
    multi = DialogueAct(USER, "inform", {"date": "tonight", "city": "boston"})
    idx = encode_user_act(multi, vocab)
    assert vocab[idx].intent == "inform" and vocab[idx].slot == "city"  # primary slot
    odd = DialogueAct(USER, "welcome")
    assert vocab[encode_user_act(odd, vocab)].intent == "not_sure"


def test_wm_forward_zero_heads(schema, wm):
    for net in wm.nets():
        for w in net.weights:
            w[:] = 0.0
    probs, reward, term = wm_forward(wm, np.zeros(wm.state_size), 0)
    assert np.allclose(probs, 1.0 / len(wm.vocab))
    assert reward == 0.0
    assert term == pytest.approx(0.5)


def test_wm_forward_distribution_valid(wm, rng):
    for _ in range(200):
        probs, reward, term = wm_forward(wm, rng.normal(size=wm.state_size),
                                         int(rng.integers(wm.n_actions)))
        assert abs(probs.sum() - 1.0) < 1e-9
        assert (probs >= 0).all()
        assert 0.0 < term < 1.0
        assert np.isfinite(reward)


def test_wm_forward_deterministic(wm):
    x = np.ones(wm.state_size)
    a = wm_forward(wm, x, 2)
    b = wm_forward(wm, x, 2)
    assert (a[0] == b[0]).all() and a[1] == b[1] and a[2] == b[2]


def test_wm_train_rejects_bad_buffers(wm):
    with pytest.raises(ValueError):
        wm_train(wm, ReplayBuffer(5, "real"), 1, make_optimizers(wm), np.random.default_rng(0))
    with pytest.raises(ValueError):
        wm_train(wm, ReplayBuffer(5, "simulated"), 1, make_optimizers(wm),
                 np.random.default_rng(0))


def test_wm_train_zero_steps_no_change(wm, kb, goals):
    config = RunConfig(agent_kind="ddq", budget=0, epochs=1, seed=0)
    buf = _real_buffer(kb, goals, config, n_dialogues=5)
    before = [w.copy() for net in wm.nets() for w in net.weights]
    wm_train(wm, buf, 0, make_optimizers(wm), np.random.default_rng(0))
    after = [w for net in wm.nets() for w in net.weights]
    assert all((a == b).all() for a, b in zip(after, before))


def _full_losses(wm, buf):
    from budgetdyna.worldmodel import _wm_input

    batch = list(buf.items)
    states = np.stack([e.state_vec for e in batch])
    ids = np.array([e.action_id for e in batch])
    x = _wm_input(wm, states, ids)
    h, _ = nnet.forward(wm.trunk, x)
    probs, _ = nnet.forward(wm.act_head, h)
    rew, _ = nnet.forward(wm.reward_head, h)
    term, _ = nnet.forward(wm.term_head, h)
    act_t = np.array([encode_user_act(e.user_act, wm.vocab) for e in batch])
    r_t = np.array([[e.reward] for e in batch])
    t_t = np.array([[1.0 if e.terminal else 0.0] for e in batch])
    return {"act": nnet.cross_entropy_loss(probs, act_t)[0],
            "reward": nnet.mse_loss(rew, r_t)[0],
            "term": nnet.bce_loss(term, t_t)[0]}


def test_wm_train_reduces_each_loss_term(schema, kb, goals, wm):
    config = RunConfig(agent_kind="ddq", budget=0, epochs=1, seed=0)
    buf = _real_buffer(kb, goals, config, n_dialogues=25)
    # freeze a 100-transition buffer as the fixed training set
    buf.items = type(buf.items)(list(buf.items)[:100], maxlen=buf.capacity)
    before = _full_losses(wm, buf)
    wm_train(wm, buf, 200, make_optimizers(wm), np.random.default_rng(1))
    after = _full_losses(wm, buf)
    for term in ("act", "reward", "term"):
        assert after[term] <= 0.5 * before[term], (term, before[term], after[term])


def test_wm_train_memorizes_single_transition(schema, wm, kb, goals):
    config = RunConfig(agent_kind="ddq", budget=0, epochs=1, seed=0)
    buf = _real_buffer(kb, goals, config, n_dialogues=2)
    single = list(buf.items)[3]
    buf.items.clear()
    buf.add(single)
    wm_train(wm, buf, 300, make_optimizers(wm), np.random.default_rng(2))
    probs, reward, term = wm_forward(wm, single.state_vec, single.action_id)
    assert int(np.argmax(probs)) == encode_user_act(single.user_act, wm.vocab)


def test_wm_never_reads_simulated_buffer(wm, kb, goals):
    config = RunConfig(agent_kind="ddq", budget=0, epochs=1, seed=0)
    real = _real_buffer(kb, goals, config, n_dialogues=5)
    sim = ReplayBuffer(100, "simulated")
    sim.add(list(real.items)[0])
    reads_before = sim.read_count
    wm_train(wm, real, 10, make_optimizers(wm), np.random.default_rng(0))
    assert sim.read_count == reads_before


def test_wm_rollout_basics(schema, wm, trained_agent, kb, goals, rng):
    exps, outcome = wm_rollout(wm, trained_agent, kb, goals[0], 1, rng, epsilon=0.1)
    assert len(exps) <= 1
    for _ in range(30):
        exps, outcome = wm_rollout(wm, trained_agent, kb, goals[1], 40, rng, epsilon=0.1)
        assert len(exps) <= 40
        assert all(e.source == "simulated" for e in exps)
        assert outcome.turns == len(exps)


def test_wm_rollout_success_rule(schema, wm, trained_agent, kb, goals, rng):
    # success iff the sampled termination fired and the final predicted reward
    # is positive, checked over 100 rollouts
    for i in range(100):
        exps, outcome = wm_rollout(wm, trained_agent, kb, goals[i % len(goals)],
                                   40, rng, epsilon=0.2)
        if not exps:
            assert not outcome.success
            continue
        last = exps[-1]
        expected = bool(last.terminal and last.reward > 0.0)
        assert outcome.success == expected
        assert outcome.cumulative_reward == pytest.approx(sum(e.reward for e in exps))


def test_wm_checkpoint_round_trip(tmp_path, wm):
    path = tmp_path / "wm.ckpt"
    save_world_model(path, wm)
    loaded = load_world_model(path)
    x = np.ones(wm.state_size)
    a, b = wm_forward(wm, x, 1), wm_forward(loaded, x, 1)
    assert (a[0] == b[0]).all() and a[1] == b[1] and a[2] == b[2]
    save_world_model(tmp_path / "wm2.ckpt", loaded)
    assert (tmp_path / "wm.ckpt").read_bytes() == (tmp_path / "wm2.ckpt").read_bytes()


def test_wm_gradients_match_finite_differences(schema, kb, goals):
    # joint loss gradients on the production-shaped net, sampled coordinates
    from tests.test_nnet import finite_difference, rel_err

    config = RunConfig(agent_kind="ddq", budget=0, epochs=1, seed=0)
    agent = DQNAgent(schema, AgentConfig(), seed=1)
    vocab = build_user_act_vocab(schema)
    wm = init_world_model(agent.encode(DialogueState()).size, agent.n_actions, vocab, seed=9)
    buf = _real_buffer(kb, goals, config, n_dialogues=3)
    batch = list(buf.items)[:4]
    states = np.stack([e.state_vec for e in batch])
    ids = np.array([e.action_id for e in batch])
    act_t = np.array([encode_user_act(e.user_act, vocab) for e in batch])
    r_t = np.array([[e.reward] for e in batch])
    t_t = np.array([[1.0 if e.terminal else 0.0] for e in batch])

    from budgetdyna.worldmodel import _wm_input

    def joint_loss():
        x = _wm_input(wm, states, ids)
        h, _ = nnet.forward(wm.trunk, x)
        probs, _ = nnet.forward(wm.act_head, h)
        rew, _ = nnet.forward(wm.reward_head, h)
        term, _ = nnet.forward(wm.term_head, h)
        return (nnet.cross_entropy_loss(probs, act_t)[0]
                + nnet.mse_loss(rew, r_t)[0]
                + nnet.bce_loss(term, t_t)[0])

    x = _wm_input(wm, states, ids)
    h, trunk_cache = nnet.forward(wm.trunk, x)
    probs, act_cache = nnet.forward(wm.act_head, h)
    rew, rew_cache = nnet.forward(wm.reward_head, h)
    term, term_cache = nnet.forward(wm.term_head, h)
    _, d_probs = nnet.cross_entropy_loss(probs, act_t)
    _, d_rew = nnet.mse_loss(rew, r_t)
    _, d_term = nnet.bce_loss(term, t_t)
    act_grads, dh_a = nnet.backward(wm.act_head, act_cache, d_probs)
    rew_grads, dh_r = nnet.backward(wm.reward_head, rew_cache, d_rew)
    term_grads, dh_t = nnet.backward(wm.term_head, term_cache, d_term)
    trunk_grads, _ = nnet.backward(wm.trunk, trunk_cache, dh_a + dh_r + dh_t)

    rng = np.random.default_rng(3)
    nets = [(wm.trunk, trunk_grads), (wm.act_head, act_grads),
            (wm.reward_head, rew_grads), (wm.term_head, term_grads)]
    for net, grads in nets:
        arrays = [a for w, b in zip(net.weights, net.biases) for a in (w, b)]
        analytic = [a for dw, db in grads for a in (dw, db)]
        numeric = finite_difference(joint_loss, arrays, sample=8, rng=rng)
        for ana, num in zip(analytic, numeric):
            flat = ana.reshape(-1)
            for i, g in num:
                assert rel_err(flat[i], g) < 1e-4, (flat[i], g)
