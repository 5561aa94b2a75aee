"""Learning-curve metrics over per-episode telemetry.

All functions take raw environment rewards; shaped rewards never enter here.
Variances and standard deviations are population statistics (divide by N).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .exceptions import UsageError


@dataclass
class EpisodeRecord:
    episode: int  # 1-based
    raw_reward: float
    shaped_reward_sum: float
    steps: int
    mean_loss: float | None
    epsilon: float


@dataclass
class RunSummary:
    mean_final_reward: float
    episodes_to_threshold: int | None
    loss_variance: float | None
    reward_std: float
    auc: float
    seed: int
    agent: str
    env: str
    total_episodes: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def _as_array(values, name) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise UsageError(f"{name}: empty sequence")
    return arr


def mean_final_reward(rewards, window: int = 50) -> float:
    """Mean of the last ``window`` rewards (all of them if fewer)."""
    arr = _as_array(rewards, "mean_final_reward")
    return float(arr[-min(window, arr.size):].mean())


def episodes_to_threshold(rewards, threshold: float = 0.8) -> int | None:
    """1-based index of the first reward strictly above ``threshold``."""
    hits = np.flatnonzero(np.asarray(rewards, dtype=np.float64) > threshold)
    return int(hits[0]) + 1 if hits.size else None


def reward_std(rewards) -> float:
    return float(np.std(_as_array(rewards, "reward_std")))


def loss_variance(losses) -> float:
    return float(np.var(_as_array(losses, "loss_variance")))


def auc(rewards) -> float:
    """Trapezoidal area under the reward curve with unit episode spacing."""
    arr = _as_array(rewards, "auc")
    if arr.size < 2:
        raise UsageError("auc needs at least two episodes")
    return float(np.sum((arr[:-1] + arr[1:]) * 0.5))


def summarize(records, losses, *, seed, agent, env) -> RunSummary:
    rewards = [r.raw_reward for r in records]
    return RunSummary(
        mean_final_reward=mean_final_reward(rewards),
        episodes_to_threshold=episodes_to_threshold(rewards),
        loss_variance=loss_variance(losses) if len(losses) else None,
        reward_std=reward_std(rewards),
        auc=auc(rewards) if len(rewards) >= 2 else 0.0,
        seed=seed,
        agent=agent,
        env=env,
        total_episodes=len(records),
    )
