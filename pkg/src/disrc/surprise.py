"""Latent encoder and the surprise controller that shapes DISRC rewards.

The controller keeps a moving setpoint ``mu`` (an EMA of encoded states) and
scores each new latent by its distance from it after both are scaled to unit
length. That deviation, weighted by a coefficient that decays to zero over
training, becomes a non-positive bonus added to the normalised reward::

    deviation = || s / |s| - mu / |mu| ||          in [0, 2]
    beta      = beta0 * (1 - (episode / T) ** 1.2)
    r_hat     = r / EMA(|r|) - lam * beta * deviation
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import nn
from .validation import check_choice, check_observations

BETA_EXPONENT = 1.2


@dataclass
class SurpriseState:
    mu: np.ndarray
    total_episodes: int
    beta0: float = 0.2
    lam: float = 1.0
    rho_mu: float = 0.995
    rho_r: float = 0.99
    reward_mag_ema: float = 1.0
    norm_eps: float = 1e-8

    @classmethod
    def zeros(cls, latent_dim: int, total_episodes: int, **kwargs) -> "SurpriseState":
        return cls(mu=np.zeros(latent_dim), total_episodes=total_episodes, **kwargs)


def _unit(v, norm_eps):
    return v / max(float(np.linalg.norm(v)), norm_eps)


def deviation(latent, mu, norm_eps: float = 1e-8) -> float:
    """L2 distance between unit-normalised ``latent`` and ``mu`` (zero vectors stay zero)."""
    latent = np.asarray(latent, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if latent.shape != mu.shape:
        raise ValueError(f"latent {latent.shape} and setpoint {mu.shape} differ in shape")
    return float(np.linalg.norm(_unit(latent, norm_eps) - _unit(mu, norm_eps)))


def update_setpoint(state: SurpriseState, latent) -> None:
    state.mu = state.rho_mu * state.mu + (1.0 - state.rho_mu) * np.asarray(latent, dtype=np.float64)


def beta_schedule(episode, total_episodes, beta0) -> float:
    progress = min(max(episode / total_episodes, 0.0), 1.0)
    return float(beta0 * (1.0 - progress**BETA_EXPONENT))


def beta_at(episode, state: SurpriseState) -> float:
    """Surprise weight for 1-based ``episode``: ``beta0`` at the start, 0 at the last episode."""
    return beta_schedule(episode, state.total_episodes, state.beta0)


def shape_reward(r: float, dev: float, beta_t: float, state: SurpriseState) -> float:
    """Update the reward-magnitude EMA, then return the normalised reward plus the bonus."""
    state.reward_mag_ema = state.rho_r * state.reward_mag_ema + (1.0 - state.rho_r) * abs(r)
    state.reward_mag_ema = max(state.reward_mag_ema, state.norm_eps)
    bonus = -beta_t * dev
    return r / state.reward_mag_ema + state.lam * bonus


class LatentEncoder(TransformerMixin, BaseEstimator):
    """Maps observations to a latent vector: Dense-LayerNorm-ReLU blocks, linear head.

    In ``"reconstruction"`` mode a linear decoder back to the input space is
    trained jointly on mean squared reconstruction error; the decoder is
    never used for control. ``"frozen"`` keeps the random initial weights.

    Parameters
    ----------
    hidden : tuple of int, default (256, 128)
    latent_dim : int, default 64
    lr : float, default 3e-4
    mode : {"reconstruction", "frozen"}
    max_iter : int, default 100
        Full-batch steps taken by :meth:`fit` (``partial_fit`` always takes one).
    random_state : int or numpy Generator
    """

    def __init__(self, hidden=(256, 128), latent_dim=64, lr=3e-4, mode="reconstruction",
                 max_iter=100, random_state=0):
        self.hidden = hidden
        self.latent_dim = latent_dim
        self.lr = lr
        self.mode = mode
        self.max_iter = max_iter
        self.random_state = random_state

    def initialize(self, n_features: int, rng=None):
        check_choice("mode", self.mode, ("reconstruction", "frozen"))
        rng = np.random.default_rng(self.random_state if rng is None else rng)
        self.n_features_in_ = int(n_features)
        dims = (self.n_features_in_, *[int(h) for h in self.hidden], int(self.latent_dim))
        self.net_ = nn.init_mlp(dims, rng)
        self.reconstruction_loss_ = None
        if self.mode == "reconstruction":
            self.decoder_ = nn.init_mlp((int(self.latent_dim), self.n_features_in_), rng)
            self.optimizer_ = nn.AdamState.for_params(self.net_, lr=self.lr)
            self.decoder_optimizer_ = nn.AdamState.for_params(self.decoder_, lr=self.lr)
        return self

    def fit(self, X, y=None):
        X = check_observations(X, np.asarray(X).shape[-1])
        self.initialize(X.shape[1])
        if self.mode == "reconstruction":
            for _ in range(int(self.max_iter)):
                self._reconstruction_step(X)
        return self

    def partial_fit(self, X, y=None):
        if not hasattr(self, "net_"):
            X = check_observations(X, np.asarray(X).shape[-1])
            self.initialize(X.shape[1])
        else:
            X = check_observations(X, self.n_features_in_)
        if self.mode == "reconstruction":
            self._reconstruction_step(X)
        return self

    def _reconstruction_step(self, X):
        latent, enc_cache = nn.forward(self.net_, X)
        recon, dec_cache = nn.forward(self.decoder_, latent)
        err = recon - X
        self.reconstruction_loss_ = float(np.mean(err * err))
        d_recon = err * (2.0 / err.size)
        dec_grads, d_latent = nn.backward(self.decoder_, dec_cache, d_recon)
        enc_grads, _ = nn.backward(self.net_, enc_cache, d_latent, need_input_grad=False)
        nn.adam_step(self.decoder_, dec_grads, self.decoder_optimizer_)
        nn.adam_step(self.net_, enc_grads, self.optimizer_)

    def encode(self, obs) -> np.ndarray:
        """Latent for a single observation vector (no input validation)."""
        return self.net_(obs)

    def transform(self, X):
        check_is_fitted(self, "net_")
        return self.net_(check_observations(X, self.n_features_in_))

    def inverse_transform(self, Z):
        """Decoder output for latents (reconstruction mode only)."""
        check_is_fitted(self, "decoder_")
        return self.decoder_(np.asarray(Z, dtype=np.float64))
