import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from chain_env import ChainEnv
from disrc import DISRCAgent, DQNAgent, LatentEncoder, nn
from disrc import gridworld as gw
from disrc.exceptions import ConfigurationError, UsageError
from disrc.replay import ReplayBuffer, Transition
from disrc.surprise import SurpriseState, beta_at, beta_schedule, deviation, shape_reward, update_setpoint
from env_fixtures import grid

vectors = st.lists(st.floats(-1e6, 1e6), min_size=64, max_size=64).map(np.array)


# -- controller pieces -------------------------------------------------------


def test_deviation_examples():
    e1, e2 = np.eye(64)[0], np.eye(64)[1]
    v = np.linspace(-1, 1, 64)
    assert deviation(v, v) == 0.0
    assert deviation(3 * v, v) == pytest.approx(0.0, abs=1e-15)
    assert deviation(e1, -e1) == 2.0
    assert deviation(e1, e2) == pytest.approx(np.sqrt(2), abs=1e-15)
    assert deviation(e1, np.zeros(64)) == 1.0  # guarded zero setpoint
    assert deviation(np.zeros(64), np.zeros(64)) == 0.0
    with pytest.raises(ValueError):
        deviation(np.zeros(3), np.zeros(4))


@settings(max_examples=200, deadline=None)
@given(vectors, vectors)
def test_deviation_in_range(a, b):
    d = deviation(a, b)
    assert 0.0 <= d <= 2.0 + 1e-12


def test_setpoint_update_examples():
    s = SurpriseState.zeros(64, 10)
    v = np.arange(64.0)
    update_setpoint(s, v)
    np.testing.assert_allclose(s.mu, 0.005 * v, rtol=1e-15)
    before = s.mu.copy()
    update_setpoint(s, before)
    np.testing.assert_allclose(s.mu, before, rtol=1e-15)


def test_setpoint_geometric_convergence():
    s = SurpriseState.zeros(64, 10)
    s.mu = np.ones(64)
    v = np.full(64, 3.0)
    gap0 = np.linalg.norm(s.mu - v)
    for _ in range(200):
        update_setpoint(s, v)
    assert np.linalg.norm(s.mu - v) == pytest.approx(gap0 * 0.995**200, rel=1e-9)


def test_beta_schedule_examples():
    s = SurpriseState.zeros(64, 100, beta0=0.2)
    assert beta_at(0, s) == 0.2
    assert beta_at(100, s) == 0.0
    assert beta_at(50, s) == pytest.approx(0.2 * (1 - 0.5**1.2), abs=1e-15)
    assert beta_at(50, s) == pytest.approx(0.11294, abs=1e-5)
    assert beta_schedule(150, 100, 0.2) == 0.0  # progress is clamped


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 2000), st.floats(0.0, 5.0))
def test_beta_nonincreasing(total, beta0):
    betas = [beta_schedule(k, total, beta0) for k in range(total + 1)]
    assert all(a >= b for a, b in zip(betas, betas[1:]))
    assert betas[-1] == 0.0


def test_shape_reward_examples():
    s = SurpriseState.zeros(64, 10, lam=1.0, rho_r=0.99)
    assert shape_reward(1.0, 0.5, 0.1, s) == pytest.approx(0.95, abs=1e-15)
    assert s.reward_mag_ema == 1.0

    s = SurpriseState.zeros(64, 10)
    assert shape_reward(0.0, 0.0, 0.2, s) == 0.0

    s = SurpriseState.zeros(64, 10, rho_r=0.5)
    r = shape_reward(0.6, 1.7, 0.0, s)  # final-episode beta: pure normalisation
    assert s.reward_mag_ema == pytest.approx(0.8)
    assert r == pytest.approx(0.6 / 0.8)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 2), st.floats(0, 1)), min_size=1, max_size=300),
       st.floats(0.0, 1.0))
def test_reward_ema_floor_and_finite_output(steps, rho_r):
    s = SurpriseState.zeros(64, 10, rho_r=rho_r)
    for r, dev, beta in steps:
        out = shape_reward(r, dev, beta, s)
        assert s.reward_mag_ema >= s.norm_eps
        assert np.isfinite(out)


# -- encoder -----------------------------------------------------------------


def test_encoder_shape_and_purity():
    enc = LatentEncoder(random_state=0).initialize(147)
    obs = gw.observe(gw.reset_doorkey(0))
    z = enc.encode(obs)
    assert z.shape == (64,) and np.all(np.isfinite(z))
    assert enc.encode(obs).tobytes() == z.tobytes()
    assert enc.net_.layers[-1].W.shape == (64, 128)
    assert enc.decoder_.layers[-1].W.shape == (147, 64)


def test_frozen_encoder_does_not_change():
    enc = LatentEncoder(mode="frozen", random_state=0)
    X = np.random.default_rng(0).random((16, 147))
    enc.fit(X)
    z = enc.transform(X)
    enc.partial_fit(X)
    np.testing.assert_array_equal(enc.transform(X), z)
    assert not hasattr(enc, "decoder_")


def test_reconstruction_training_reduces_error():
    X = np.random.default_rng(1).random((32, 20))
    enc = LatentEncoder(hidden=(16,), latent_dim=8, lr=1e-2, max_iter=1, random_state=0).fit(X)
    first = enc.reconstruction_loss_
    enc.set_params(max_iter=200).fit(X)
    assert enc.reconstruction_loss_ < 0.5 * first
    assert enc.inverse_transform(enc.transform(X)).shape == X.shape
    assert enc.fit_transform(X).shape == (32, 8)


def test_encoder_rejects_bad_input_and_mode():
    enc = LatentEncoder(hidden=(4,), latent_dim=2).fit(np.zeros((3, 5)))
    with pytest.raises(ValueError):
        enc.transform(np.zeros((3, 6)))
    with pytest.raises(ConfigurationError):
        LatentEncoder(mode="learned").fit(np.zeros((3, 5)))
    assert clone(enc).get_params() == enc.get_params()


# -- agent -------------------------------------------------------------------

SMALL = dict(hidden=(16,), batch_size=16, buffer_capacity=2000)


def test_degenerate_disrc_matches_dqn_bitwise():
    base = DQNAgent(random_state=4, **SMALL).fit("doorkey8", total_episodes=2)
    twin = DISRCAgent(random_state=4, beta0=0.0, encoder_mode="frozen", rho_r=1.0, **SMALL)
    twin.fit("doorkey8", total_episodes=2)
    assert twin.history_ == base.history_
    assert twin.losses_ == base.losses_
    for a, b in zip(twin.q_net_.params(), base.q_net_.params()):
        assert a.tobytes() == b.tobytes()


def test_surprise_log_properties_over_a_run():
    agent = DISRCAgent(random_state=2, **SMALL).fit("lavacrossing9", total_episodes=4)
    log = agent.surprise_log_
    n = sum(r.steps for r in agent.history_)
    assert all(len(v) == n for v in log.values())
    assert all(b <= 0.0 for b in log["bonus"])
    assert all(0.0 <= d <= 2.0 for d in log["deviation"])
    betas = log["beta"]
    assert all(a >= b for a, b in zip(betas, betas[1:]))
    last = [b for e, b in zip(log["episode"], betas) if e == 4]
    assert last and all(b == 0.0 for b in last)
    assert agent.surprise_.reward_mag_ema >= agent.norm_eps


def test_shaped_and_raw_rewards_are_kept_apart():
    agent = DISRCAgent(random_state=0, **SMALL).fit("lavacrossing9", total_episodes=3)
    for r in agent.history_:
        assert r.raw_reward == 0.0 or 0.1 < r.raw_reward <= 1.0
    assert any(r.shaped_reward_sum != r.raw_reward for r in agent.history_)


class FixedEnv:
    """Resets to a copy of one hand-built state."""

    name = "fixed"
    obs_dim = 147
    n_actions = 7

    def __init__(self, state):
        self.template = state

    def reset(self, seed):
        self.state = self.template.copy()
        return gw.observe(self.state)

    def step(self, action):
        return gw.step(self.state, action)


def test_goal_step_keeps_raw_reward_and_terminal_flag():
    env = FixedEnv(grid("####\n#>G#\n####", max_steps=640, step_count=63))
    agent = DISRCAgent(random_state=0, **SMALL).initialize(147, 7, total_episodes=10)
    agent.q_net_ = nn.Mlp([nn.Dense(np.zeros((7, 147)), np.eye(7)[gw.Action.FORWARD])])
    obs = env.reset(0)
    _, info = agent.collect_step(env, obs, 1, 10, epsilon=0.0)
    assert info.terminated and info.raw_reward == pytest.approx(0.91, abs=1e-12)
    stored = agent.buffer_[0]
    assert stored.done and stored.reward == info.stored_reward
    ema = 0.99 * 1.0 + 0.01 * 0.91
    expected = 0.91 / ema - 1.0 * beta_at(1, agent.surprise_) * stored.deviation
    assert stored.reward == pytest.approx(expected, abs=1e-12)


def test_zero_beta_stores_normalised_reward():
    env = FixedEnv(grid("####\n#>G#\n####", max_steps=640, step_count=63))
    agent = DISRCAgent(random_state=0, beta0=0.0, **SMALL).initialize(147, 7, total_episodes=10)
    agent.q_net_ = nn.Mlp([nn.Dense(np.zeros((7, 147)), np.eye(7)[gw.Action.FORWARD])])
    agent.collect_step(env, env.reset(0), 1, 10, epsilon=0.0)
    assert agent.buffer_[0].reward == pytest.approx(0.91 / (0.99 + 0.01 * 0.91), abs=1e-15)


class FixedIndices:
    """Stand-in generator that always samples the given replay slots."""

    def __init__(self, idx):
        self.idx = np.asarray(idx)

    def integers(self, low, high, size):
        return self.idx[:size]


def _scaling_agent(**kw):
    agent = DISRCAgent(modulation="update_scaling", hidden=(4,), batch_size=2, buffer_capacity=4,
                       **kw).initialize(3, 2, total_episodes=2)
    agent.q_net_ = nn.Mlp([nn.Dense(np.zeros((2, 3)), np.zeros(2))])
    agent.optimizer_ = nn.AdamState.for_params(agent.q_net_, lr=1e-3)
    return agent


def test_update_scaling_weighted_loss_example():
    beta1 = beta_schedule(1, 2, 0.2)
    agent = _scaling_agent(beta0=0.2, lam=1.0 / beta1)
    buf = ReplayBuffer(4, 3)
    buf.push(Transition(np.zeros(3), 0, 1.0, np.zeros(3), True, deviation=0.0))
    buf.push(Transition(np.zeros(3), 1, 1.0, np.zeros(3), True, deviation=1.0))
    # TD errors are both -1; weights are 1 and 2
    loss = agent.train_step(buf, rng=FixedIndices([0, 1]), episode=1)
    assert loss == pytest.approx(1.5, abs=1e-12)


def test_update_scaling_with_zero_deviation_matches_baseline():
    agent = _scaling_agent()
    base = DQNAgent(hidden=(4,), batch_size=2, buffer_capacity=4).initialize(3, 2)
    base.q_net_ = agent.q_net_.copy()
    base.target_net_ = agent.target_net_.copy()
    base.optimizer_ = nn.AdamState.for_params(base.q_net_, lr=1e-3)
    buf = ReplayBuffer(4, 3)
    for k in range(4):
        buf.push(Transition(np.full(3, k / 4), k % 2, 0.5 * k, np.ones(3), k == 3))
    la = agent.train_step(buf, rng=np.random.default_rng(9), episode=1)
    lb = base.train_step(buf, rng=np.random.default_rng(9))
    assert la == lb


def test_update_scaling_needs_episode():
    agent = _scaling_agent()
    buf = ReplayBuffer(4, 3)
    for _ in range(2):
        buf.push(Transition(np.zeros(3), 0, 1.0, np.zeros(3), True))
    with pytest.raises(UsageError):
        agent.train_step(buf)


def test_reconstruction_mode_trains_encoder_during_fit():
    agent = DISRCAgent(random_state=0, **SMALL).initialize(2, 2, total_episodes=30)
    before = agent.encoder_.net_.params()[0].copy()
    agent.fit(ChainEnv(), total_episodes=30)
    assert not np.array_equal(before, agent.encoder_.net_.params()[0])
    assert agent.transform(np.eye(2)).shape == (2, 64)


@pytest.mark.parametrize("bad", [dict(beta0=-0.1), dict(lam=-1.0), dict(rho_mu=1.5), dict(rho_r=-0.1),
                                 dict(encoder_mode="x"), dict(modulation="both"), dict(norm_eps=0.0),
                                 dict(latent_dim=0)])
def test_invalid_disrc_parameters(bad):
    with pytest.raises(ConfigurationError):
        DISRCAgent(**bad).initialize(3, 7)
