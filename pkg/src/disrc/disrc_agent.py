"""DQN augmented with latent-space surprise (DISRC).

Two modulation modes are available:

``"reward_shaping"`` (default)
    Every stored reward is replaced by ``r / EMA(|r|) + lam * b`` where
    ``b = -beta * deviation``, using the beta of the episode in which the
    transition was collected. The Q update itself is the baseline's.
``"update_scaling"``
    Raw rewards are stored together with the deviation; at update time each
    squared TD error is weighted by ``1 + lam * beta * deviation`` (weights
    carry no gradient).

Setting ``beta0=0``, ``encoder_mode="frozen"`` and ``rho_r=1`` reduces the
agent to the baseline: identical actions, losses and telemetry for the same
``random_state``.
"""
from __future__ import annotations

import numpy as np

from .dqn import DQNAgent, StepInfo
from .exceptions import UsageError
from .replay import Transition
from .surprise import LatentEncoder, SurpriseState, beta_at, deviation, shape_reward, update_setpoint
from .validation import check_choice, check_interval


class DISRCAgent(DQNAgent):
    """DQN with a surprise controller. See :class:`DQNAgent` for the shared parameters.

    Parameters
    ----------
    beta0 : float, default 0.2
        Initial surprise weight.
    lam : float, default 1.0
        Scale applied to the surprise bonus.
    rho_mu, rho_r : float
        Decay of the latent setpoint EMA and of the reward-magnitude EMA.
        ``rho_r=1`` freezes the reward normaliser at 1.
    encoder_mode : {"reconstruction", "frozen"}
    encoder_lr : float, default 3e-4
    latent_dim : int, default 64
    modulation : {"reward_shaping", "update_scaling"}
    norm_eps : float, default 1e-8
    """

    kind = "disrc"

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
        beta0=0.2,
        lam=1.0,
        rho_mu=0.995,
        rho_r=0.99,
        encoder_mode="reconstruction",
        encoder_lr=3e-4,
        latent_dim=64,
        modulation="reward_shaping",
        norm_eps=1e-8,
    ):
        super().__init__(
            gamma=gamma,
            q_lr=q_lr,
            tau=tau,
            batch_size=batch_size,
            eps_start=eps_start,
            eps_min=eps_min,
            eps_decay_fraction=eps_decay_fraction,
            grad_clip_max_norm=grad_clip_max_norm,
            hidden=hidden,
            buffer_capacity=buffer_capacity,
            target_rule=target_rule,
            random_state=random_state,
        )
        self.beta0 = beta0
        self.lam = lam
        self.rho_mu = rho_mu
        self.rho_r = rho_r
        self.encoder_mode = encoder_mode
        self.encoder_lr = encoder_lr
        self.latent_dim = latent_dim
        self.modulation = modulation
        self.norm_eps = norm_eps

    def _validate_params(self):
        super()._validate_params()
        check_interval("beta0", self.beta0, 0)
        check_interval("lam", self.lam, 0)
        check_interval("rho_mu", self.rho_mu, 0, 1)
        check_interval("rho_r", self.rho_r, 0, 1)
        check_interval("encoder_lr", self.encoder_lr, 0, low_open=True)
        check_interval("norm_eps", self.norm_eps, 0, low_open=True)
        check_interval("latent_dim", self.latent_dim, 1)
        check_choice("encoder_mode", self.encoder_mode, ("reconstruction", "frozen"))
        check_choice("modulation", self.modulation, ("reward_shaping", "update_scaling"))

    def _init_extra(self, rng):
        self.encoder_ = LatentEncoder(
            latent_dim=int(self.latent_dim), lr=self.encoder_lr, mode=self.encoder_mode
        ).initialize(self.obs_dim_, rng)
        self.surprise_ = SurpriseState.zeros(
            int(self.latent_dim),
            self.total_episodes_,
            beta0=float(self.beta0),
            lam=float(self.lam),
            rho_mu=float(self.rho_mu),
            rho_r=float(self.rho_r),
            norm_eps=float(self.norm_eps),
        )
        # one entry per environment step
        self.surprise_log_ = {"episode": [], "deviation": [], "beta": [], "bonus": []}

    def collect_step(self, env, obs, episode: int, total_episodes: int, epsilon: float):
        action = self.select_action(obs, epsilon)
        res = env.step(action)
        state = self.surprise_
        latent = self.encoder_.encode(res.obs)
        dev = deviation(latent, state.mu, state.norm_eps)
        update_setpoint(state, latent)
        beta = beta_at(episode, state)
        bonus = -beta * dev
        if self.modulation == "reward_shaping":
            stored = shape_reward(res.reward, dev, beta, state)
        else:
            stored = res.reward
        self.buffer_.push(Transition(obs, action, stored, res.obs, res.terminated, dev))

        log = self.surprise_log_
        log["episode"].append(episode)
        log["deviation"].append(dev)
        log["beta"].append(beta)
        log["bonus"].append(bonus)
        return res.obs, StepInfo(res.reward, stored, res.terminated, res.truncated)

    def _sample_weights(self, batch, episode):
        if self.modulation != "update_scaling":
            return None
        if episode is None:
            raise UsageError("update_scaling needs the current episode to weight samples")
        beta = beta_at(episode, self.surprise_)
        return 1.0 + self.surprise_.lam * beta * batch.deviations

    def _after_update(self, batch):
        if self.encoder_mode == "reconstruction":
            self.encoder_._reconstruction_step(batch.obs)

    def transform(self, X) -> np.ndarray:
        """Latent codes for observations, as seen by the surprise controller."""
        return self.encoder_.transform(X)
