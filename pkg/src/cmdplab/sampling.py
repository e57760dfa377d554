"""Seeded trajectory simulation and finite-horizon discounted returns.

A "length H" rollout records H+1 state-action pairs (t = 0..H), matching the
return definition R^H = sum_{t=0}^{H} gamma^t c(s_t, a_t). The batch engine
simulates many independent rollouts of one policy in lockstep; the algorithm
loops use it so a full iteration costs a handful of vectorized sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Cmdp, PolicyTable
from .rng import RngStream


def g_of_h(gamma: float, h: int) -> float:
    """Maximum discounted return over horizon h: (1 - gamma^(h+1)) / (1 - gamma)."""
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (0, 1)")
    if h < 0:
        raise ValueError("horizon must be nonnegative")
    return (1.0 - gamma ** (h + 1)) / (1.0 - gamma)


@dataclass(frozen=True)
class Trajectory:
    """A finite rollout of exactly horizon+1 state-action pairs."""

    states: np.ndarray
    actions: np.ndarray
    horizon: int

    def __post_init__(self):
        if len(self.states) != self.horizon + 1 or len(self.actions) != self.horizon + 1:
            raise ValueError("trajectory must hold exactly horizon+1 pairs")

    @property
    def steps(self) -> list[tuple[int, int]]:
        return list(zip(self.states.tolist(), self.actions.tolist()))


@dataclass(frozen=True)
class TrajectoryBatch:
    """B independent rollouts stored as [B, H+1] state and action arrays."""

    states: np.ndarray
    actions: np.ndarray
    horizon: int

    def returns(self, cmdp: Cmdp, signal: str) -> np.ndarray:
        """Discounted return of every rollout, vectorized."""
        c = cmdp.signal(signal)
        weights = cmdp.gamma ** np.arange(self.horizon + 1)
        return (c[self.states, self.actions] * weights).sum(axis=1)

    def row(self, i: int) -> Trajectory:
        return Trajectory(self.states[i].copy(), self.actions[i].copy(), self.horizon)


def _transition_cdf(cmdp: Cmdp) -> np.ndarray:
    # [S*A, S] cumulative rows; flattening lets one fancy-index pick (s, a) rows.
    return np.cumsum(cmdp.transition.reshape(-1, cmdp.n_states), axis=1)


def sample_batch(
    cmdp: Cmdp,
    pi: PolicyTable,
    init_states: np.ndarray,
    h: int,
    rng: RngStream,
    forced_first_actions: np.ndarray | None = None,
    transition_cdf: np.ndarray | None = None,
) -> TrajectoryBatch:
    """Roll out a batch of trajectories under one policy.

    init_states fixes s_0 per rollout; forced_first_actions, when given,
    overrides a_0 (the state-action-initialized rollouts of the advantage
    estimator). Draw order is fixed: actions for step t across the whole
    batch, then next states, so results do not depend on batch layout tricks.
    """
    if h < 0:
        raise ValueError("horizon must be nonnegative")
    n = len(init_states)
    pi_cdf = np.cumsum(pi.pi, axis=1)
    p_cdf = transition_cdf if transition_cdf is not None else _transition_cdf(cmdp)
    states = np.empty((n, h + 1), dtype=np.int64)
    actions = np.empty((n, h + 1), dtype=np.int64)
    states[:, 0] = init_states
    for t in range(h + 1):
        s_t = states[:, t]
        if t == 0 and forced_first_actions is not None:
            a_t = np.asarray(forced_first_actions, dtype=np.int64)
        else:
            a_t = rng.categorical(pi_cdf, s_t)
        actions[:, t] = a_t
        if t < h:
            states[:, t + 1] = rng.categorical(p_cdf, s_t * cmdp.n_actions + a_t)
    return TrajectoryBatch(states, actions, h)


def sample_trajectory(
    cmdp: Cmdp,
    pi: PolicyTable,
    init,
    h: int,
    rng: RngStream,
) -> Trajectory:
    """Sample one rollout of length h.

    init is ("state", s), ("pair", (s, a)), or ("dist",) to draw s_0 from rho.
    A forced pair fixes a_0 only; every later action follows pi.
    """
    kind = init[0]
    forced = None
    if kind == "dist":
        s0 = int(rng.categorical(np.cumsum(cmdp.rho)[None, :], np.zeros(1, dtype=np.int64))[0])
    elif kind == "state":
        s0 = int(init[1])
    elif kind == "pair":
        s0, a0 = init[1]
        forced = np.array([a0], dtype=np.int64)
    else:
        raise ValueError(f"unknown init {init!r}")
    if not (0 <= s0 < cmdp.n_states):
        raise ValueError("initial state out of range")
    batch = sample_batch(cmdp, pi, np.array([s0]), h, rng, forced_first_actions=forced)
    return batch.row(0)


def discounted_return(traj: Trajectory, cmdp: Cmdp, signal: str) -> float:
    """R^H(tau) = sum_{t=0}^{H} gamma^t c(s_t, a_t)."""
    c = cmdp.signal(signal)
    weights = cmdp.gamma ** np.arange(traj.horizon + 1)
    return float((c[traj.states, traj.actions] * weights).sum())


def finite_horizon_value(cmdp: Cmdp, pi: PolicyTable, signal: str, h: int) -> np.ndarray:
    """Exact V^{pi,H}(s) by backward dynamic programming (H+1 sweeps).

    Reference implementation for truncation-bias and Monte Carlo checks;
    the algorithms never call it.
    """
    c_pi = (pi.pi * cmdp.signal(signal)).sum(axis=1)
    p_pi = np.einsum("sa,sat->st", pi.pi, cmdp.transition)
    v = np.zeros(cmdp.n_states)
    for _ in range(h + 1):
        v = c_pi + cmdp.gamma * (p_pi @ v)
    return v
