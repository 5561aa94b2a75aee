"""Fixed-capacity FIFO replay memory with uniform sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientDataError


@dataclass
class Transition:
    obs: np.ndarray
    action: int
    reward: float  # raw for the baseline, shaped for DISRC
    next_obs: np.ndarray
    done: bool  # terminal only; time-limit truncation still bootstraps
    deviation: float = 0.0  # used by update-scaling modulation only


@dataclass
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray
    deviations: np.ndarray
    indices: np.ndarray

    def __len__(self) -> int:
        return len(self.actions)


class ReplayBuffer:
    """Ring buffer backed by preallocated arrays.

    Once ``capacity`` transitions are stored, each push overwrites the oldest.
    """

    def __init__(self, capacity: int = 50_000, obs_dim: int = 147):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs_dim = int(obs_dim)
        self.obs = np.zeros((self.capacity, self.obs_dim))
        self.next_obs = np.zeros((self.capacity, self.obs_dim))
        self.actions = np.zeros(self.capacity, dtype=np.int64)
        self.rewards = np.zeros(self.capacity)
        self.dones = np.zeros(self.capacity, dtype=bool)
        self.deviations = np.zeros(self.capacity)
        self.write_index = 0
        self.count = 0

    def __len__(self) -> int:
        return self.count

    def push(self, t: Transition) -> None:
        i = self.write_index
        self.obs[i] = t.obs
        self.next_obs[i] = t.next_obs
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.dones[i] = t.done
        self.deviations[i] = t.deviation
        self.write_index = (i + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)

    def __getitem__(self, i: int) -> Transition:
        """Transition at storage slot ``i``."""
        if not 0 <= i < self.count:
            raise IndexError(i)
        return Transition(
            self.obs[i].copy(),
            int(self.actions[i]),
            float(self.rewards[i]),
            self.next_obs[i].copy(),
            bool(self.dones[i]),
            float(self.deviations[i]),
        )

    def ordered(self) -> list[Transition]:
        """Live transitions, oldest first."""
        start = self.write_index if self.count == self.capacity else 0
        return [self[(start + k) % self.capacity] for k in range(self.count)]

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self.count < batch_size:
            raise InsufficientDataError(f"{self.count} transitions stored, {batch_size} requested")
        return rng.integers(0, self.count, size=batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Draw ``batch_size`` transitions uniformly, with replacement."""
        idx = self.sample_indices(batch_size, rng)
        return Batch(
            self.obs[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_obs[idx],
            self.dones[idx],
            self.deviations[idx],
            idx,
        )
