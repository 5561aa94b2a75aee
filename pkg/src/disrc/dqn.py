"""Baseline DQN: replay, soft target updates, linear epsilon decay.

The TD target takes the greedy action under the online network and evaluates
it with the target network (``target_rule="double"``); ``"vanilla"`` uses the
target network for both.

Random draws come from three independent streams spawned from
``random_state``: Q-network initialisation, exploration/replay sampling, and
an auxiliary stream reserved for subclasses (the DISRC encoder). Per
environment step the exploration stream is used as: one uniform draw for the
epsilon test, one integer draw if exploring, then one batch of replay
indices if an update runs.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import nn
from .exceptions import ConfigurationError, NumericError
from .gridworld import make_env
from .metrics import EpisodeRecord
from .replay import Batch, ReplayBuffer, Transition
from .validation import check_choice, check_interval, check_observations

log = logging.getLogger(__name__)

DEFAULT_EPISODES = {"doorkey8": 700, "lavacrossing9": 1200}
DEFAULT_GRAD_CLIP = {"doorkey8": 0.3, "lavacrossing9": 0.2}


def epsilon_at(episode, total_episodes, eps_start=1.0, eps_min=0.1, decay_fraction=0.8) -> float:
    """Exploration rate for 0-based ``episode``: linear decay, then flat at ``eps_min``."""
    horizon = decay_fraction * total_episodes
    if episode >= horizon:
        return float(eps_min)
    return float(eps_start - (eps_start - eps_min) * (episode / horizon))


@dataclass
class StepInfo:
    """What one environment step contributed to the episode telemetry."""

    raw_reward: float
    stored_reward: float
    terminated: bool
    truncated: bool


class DQNAgent(BaseEstimator):
    """Deep Q-network agent for the gridworld environments.

    Parameters
    ----------
    gamma, q_lr, tau, batch_size : float, float, float, int
        Discount, Adam learning rate, Polyak rate and mini-batch size.
    eps_start, eps_min, eps_decay_fraction : float
        Epsilon decays linearly from ``eps_start`` to ``eps_min`` over the first
        ``eps_decay_fraction`` of the episodes.
    grad_clip_max_norm : float or None
        Global gradient-norm cap. ``None`` picks the environment default
        (0.3 on DoorKey, 0.2 on LavaCrossing).
    hidden : tuple of int
        Hidden widths; each hidden layer is Dense, LayerNorm, ReLU.
    buffer_capacity : int
    target_rule : {"double", "vanilla"}
    random_state : int
    """

    kind = "dqn"

    def __init__(
        self,
        *,
        gamma=0.99,
        q_lr=1e-4,
        tau=0.005,
        batch_size=128,
        eps_start=1.0,
        eps_min=0.1,
        eps_decay_fraction=0.8,
        grad_clip_max_norm=None,
        hidden=(256, 256),
        buffer_capacity=50_000,
        target_rule="double",
        random_state=0,
    ):
        self.gamma = gamma
        self.q_lr = q_lr
        self.tau = tau
        self.batch_size = batch_size
        self.eps_start = eps_start
        self.eps_min = eps_min
        self.eps_decay_fraction = eps_decay_fraction
        self.grad_clip_max_norm = grad_clip_max_norm
        self.hidden = hidden
        self.buffer_capacity = buffer_capacity
        self.target_rule = target_rule
        self.random_state = random_state

    # -- setup -----------------------------------------------------------------

    def _validate_params(self):
        check_interval("gamma", self.gamma, 0, 1, low_open=True)
        check_interval("tau", self.tau, 0, 1, low_open=True)
        check_interval("q_lr", self.q_lr, 0, low_open=True)
        check_interval("eps_start", self.eps_start, 0, 1)
        check_interval("eps_min", self.eps_min, 0, self.eps_start)
        check_interval("eps_decay_fraction", self.eps_decay_fraction, 0, 1, low_open=True)
        if self.grad_clip_max_norm is not None:
            check_interval("grad_clip_max_norm", self.grad_clip_max_norm, 0, low_open=True)
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be a positive integer, got {self.batch_size!r}")
        if int(self.buffer_capacity) != self.buffer_capacity or self.buffer_capacity < self.batch_size:
            raise ConfigurationError("buffer_capacity must be an integer >= batch_size")
        if not len(self.hidden) or any(int(h) < 1 for h in self.hidden):
            raise ConfigurationError(f"hidden widths must be positive, got {self.hidden!r}")
        check_choice("target_rule", self.target_rule, ("double", "vanilla"))

    def initialize(self, obs_dim: int, n_actions: int, env_name: str | None = None,
                   total_episodes: int = 1):
        """Build networks, optimizer, buffer and random streams; returns self."""
        self._validate_params()
        self.total_episodes_ = int(total_episodes)
        self.obs_dim_ = int(obs_dim)
        self.n_actions_ = int(n_actions)
        clip = self.grad_clip_max_norm
        if clip is None:
            clip = DEFAULT_GRAD_CLIP.get(env_name, 0.3)
        self.clip_norm_ = float(clip)

        init_seq, explore_seq, aux_seq = np.random.SeedSequence(self.random_state).spawn(3)
        self.rng_ = np.random.default_rng(explore_seq)
        dims = (self.obs_dim_, *[int(h) for h in self.hidden], self.n_actions_)
        self.q_net_ = nn.init_mlp(dims, np.random.default_rng(init_seq))
        self.target_net_ = self.q_net_.copy()
        self.optimizer_ = nn.AdamState.for_params(self.q_net_.params(), lr=self.q_lr)
        self.buffer_ = ReplayBuffer(int(self.buffer_capacity), self.obs_dim_)
        self.history_: list[EpisodeRecord] = []
        self.losses_: list[float] = []
        self._init_extra(np.random.default_rng(aux_seq))
        return self

    def _init_extra(self, rng):
        """Hook for subclasses that need more state; receives the auxiliary stream."""

    # -- acting ----------------------------------------------------------------

    def select_action(self, obs, epsilon: float, rng=None) -> int:
        """Epsilon-greedy action; greedy ties go to the lowest action index."""
        rng = self.rng_ if rng is None else rng
        if rng.random() < epsilon:
            return int(rng.integers(self.n_actions_))
        return int(np.argmax(self.q_net_(obs)))

    def collect_step(self, env, obs, episode: int, total_episodes: int, epsilon: float):
        """Act once in ``env`` and store the transition.

        ``episode`` is 1-based. Returns ``(next_obs, StepInfo)``.
        """
        action = self.select_action(obs, epsilon)
        res = env.step(action)
        self.buffer_.push(Transition(obs, action, res.reward, res.obs, res.terminated))
        return res.obs, StepInfo(res.reward, res.reward, res.terminated, res.truncated)

    # -- learning --------------------------------------------------------------

    def compute_targets(self, batch: Batch) -> np.ndarray:
        """Bootstrapped one-step targets ``r + gamma * Q'(s', a*) * (1 - d)``."""
        q_target_next = self.target_net_(batch.next_obs)
        if self.target_rule == "double":
            a_star = np.argmax(self.q_net_(batch.next_obs), axis=1)
        else:
            a_star = np.argmax(q_target_next, axis=1)
        bootstrap = q_target_next[np.arange(len(a_star)), a_star]
        return np.where(batch.dones, batch.rewards, batch.rewards + self.gamma * bootstrap)

    def _sample_weights(self, batch: Batch, episode: int | None):
        return None

    def train_step(self, buffer=None, rng=None, episode: int | None = None) -> float | None:
        """One gradient step on the mean squared TD error.

        Returns the loss, or ``None`` when the buffer cannot fill a batch yet.
        ``episode`` (1-based) is only used by subclasses that weight samples.
        """
        buffer = self.buffer_ if buffer is None else buffer
        rng = self.rng_ if rng is None else rng
        if len(buffer) < self.batch_size:
            return None
        batch = buffer.sample(self.batch_size, rng)
        y = self.compute_targets(batch)
        q, cache = nn.forward(self.q_net_, batch.obs)
        rows = np.arange(len(batch))
        td = q[rows, batch.actions] - y
        w = self._sample_weights(batch, episode)
        sq = td * td if w is None else w * td * td
        loss = float(sq.mean())
        if not np.isfinite(loss):
            raise NumericError(f"non-finite TD loss ({loss}) after {self.optimizer_.t} updates")
        d_q = np.zeros_like(q)
        d_q[rows, batch.actions] = (2.0 / len(batch)) * (td if w is None else w * td)
        grads, _ = nn.backward(self.q_net_, cache, d_q)
        nn.clip_grad_norm(grads, self.clip_norm_)
        nn.adam_step(self.q_net_, grads, self.optimizer_)
        self._after_update(batch)
        return loss

    def _after_update(self, batch: Batch):
        """Hook run after each Q update with the batch that was used."""

    def soft_update(self):
        """Polyak-average the online parameters into the target network."""
        tau = self.tau
        for tp, p in zip(self.target_net_.params(), self.q_net_.params()):
            tp[...] = tau * p + (1.0 - tau) * tp
        self.target_net_.version += 1

    # -- training loop ---------------------------------------------------------

    def run_episode(self, env, episode: int, total_episodes: int, env_seed: int) -> EpisodeRecord:
        """Roll out one episode (0-based ``episode``) with one update per step."""
        epsilon = epsilon_at(
            episode, total_episodes, self.eps_start, self.eps_min, self.eps_decay_fraction
        )
        obs = env.reset(env_seed)
        raw_total = stored_total = 0.0
        steps = 0
        ep_losses = []
        while True:
            obs, info = self.collect_step(env, obs, episode + 1, total_episodes, epsilon)
            steps += 1
            raw_total += info.raw_reward
            stored_total += info.stored_reward
            loss = self.train_step(episode=episode + 1)
            if loss is not None:
                self.soft_update()
                ep_losses.append(loss)
                self.losses_.append(loss)
            if info.terminated or info.truncated:
                break
        record = EpisodeRecord(
            episode=episode + 1,
            raw_reward=raw_total,
            shaped_reward_sum=stored_total,
            steps=steps,
            mean_loss=float(np.mean(ep_losses)) if ep_losses else None,
            epsilon=epsilon,
        )
        self.history_.append(record)
        return record

    def fit(self, env="doorkey8", total_episodes: int | None = None, callback=None):
        """Train from scratch for ``total_episodes`` episodes.

        ``env`` is an environment id (``"doorkey8"``, ``"lavacrossing9"``) or any
        object with ``reset(seed) -> obs``, ``step(action)``, ``obs_dim`` and
        ``n_actions``. Episode ``k`` (0-based) is reset with seed
        ``random_state ^ k``. ``callback(record, env)`` runs after each episode.
        """
        env_name = env if isinstance(env, str) else getattr(env, "name", None)
        env = make_env(env)
        if total_episodes is None:
            total_episodes = DEFAULT_EPISODES.get(env_name)
        if total_episodes is None or int(total_episodes) != total_episodes or total_episodes < 1:
            raise ConfigurationError(f"total_episodes must be a positive integer, got {total_episodes!r}")
        total_episodes = int(total_episodes)
        self.initialize(env.obs_dim, env.n_actions, env_name, total_episodes)
        for k in range(total_episodes):
            record = self.run_episode(env, k, total_episodes, int(self.random_state) ^ k)
            if callback is not None:
                callback(record, env)
            if record.episode % 50 == 0:
                log.info("episode %d: reward %.3f steps %d eps %.3f",
                         record.episode, record.raw_reward, record.steps, record.epsilon)
        return self

    # -- estimator API ---------------------------------------------------------

    def q_values(self, X) -> np.ndarray:
        check_is_fitted(self, "q_net_")
        return self.q_net_(check_observations(X, self.obs_dim_))

    def predict(self, X) -> np.ndarray:
        """Greedy action for each observation row."""
        return np.argmax(self.q_values(X), axis=1)

    def save_checkpoint(self, directory):
        check_is_fitted(self, "q_net_")
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        nn.save_mlp(self.q_net_, directory / "q_net.bin")
        nn.save_mlp(self.target_net_, directory / "target_net.bin")
