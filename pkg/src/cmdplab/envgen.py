"""Random environment generation for the reproduction protocol.

Transitions are Dirichlet rows (dense, hence ergodic), per-step signals are
Unif[0,1] scaled by (1-gamma) so that discounted values land in [0,1] and the
utility threshold b is meaningful, and instances are regenerated until the
constraint is strictly satisfiable with margin.

The gamma variates behind the Dirichlet rows are produced by the
Marsaglia-Tsang squeeze method over Box-Muller normals, all driven by raw
uniform doubles from the owned stream, so generated instances depend on
nothing but the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Cmdp
from .oracles import slater_slack
from .rng import RngStream


@dataclass(frozen=True)
class EnvSpec:
    """Knobs of the random-environment protocol; defaults reproduce it."""

    n_states: int = 10
    n_actions: int = 4
    gamma: float = 0.90
    dirichlet_alpha: float = 5.0
    b: float = 0.55
    seed: int = 0
    min_slack: float = 0.02
    max_regen: int = 50

    def __post_init__(self):
        if self.dirichlet_alpha <= 0:
            raise ValueError("dirichlet_alpha must be positive")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        if self.min_slack < 0:
            raise ValueError("min_slack must be nonnegative")


def _normals(rng: RngStream, n: int) -> np.ndarray:
    # Box-Muller on raw uniforms; 1-u keeps the log argument in (0, 1].
    u1 = 1.0 - rng.random(n)
    u2 = rng.random(n)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _gamma_mt(alpha: np.ndarray, rng: RngStream) -> np.ndarray:
    """Marsaglia-Tsang gamma variates, vectorized rejection, alpha >= 1."""
    alpha = np.asarray(alpha, dtype=float)
    d = alpha - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(alpha.shape)
    todo = np.ones(alpha.shape, dtype=bool)
    while todo.any():
        idx = np.flatnonzero(todo)
        x = _normals(rng, idx.size)
        v = (1.0 + c.flat[idx] * x) ** 3
        u = rng.random(idx.size)
        ok = v > 0
        small = ok & (u < 1.0 - 0.0331 * x**4)
        with np.errstate(divide="ignore", invalid="ignore"):
            squeeze = ok & (np.log(u) < 0.5 * x * x + d.flat[idx] * (1.0 - v + np.log(np.where(ok, v, 1.0))))
        accept = small | squeeze
        take = idx[accept]
        out.flat[take] = d.flat[take] * v[accept]
        todo.flat[take] = False
    return out


def dirichlet_sample(alpha_vec: np.ndarray, rng: RngStream) -> np.ndarray:
    """One draw from Dirichlet(alpha_vec): normalized Gamma(alpha_i, 1) variates."""
    alpha = np.asarray(alpha_vec, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError("Dirichlet parameters must be positive")
    boost = alpha < 1.0
    raw = _gamma_mt(np.where(boost, alpha + 1.0, alpha), rng)
    if boost.any():
        # Gamma(a) = Gamma(a+1) * U^(1/a) for a < 1.
        u = rng.random(alpha.shape)
        raw = np.where(boost, raw * u ** (1.0 / np.where(boost, alpha, 1.0)), raw)
    return raw / raw.sum()


def generate_cmdp(spec: EnvSpec) -> Cmdp:
    """Draw an instance of the protocol environment, regenerating until feasible.

    Deterministic in spec.seed: attempt k uses the derived stream child(k),
    so a regeneration never perturbs later draws.
    """
    root = RngStream(spec.seed)
    alpha = np.full(spec.n_states, spec.dirichlet_alpha)
    rho = np.full(spec.n_states, 1.0 / spec.n_states)
    for attempt in range(spec.max_regen):
        rng = root.child(attempt)
        transition = np.empty((spec.n_states, spec.n_actions, spec.n_states))
        for s in range(spec.n_states):
            for a in range(spec.n_actions):
                transition[s, a] = dirichlet_sample(alpha, rng)
        scale = 1.0 - spec.gamma
        reward = rng.random((spec.n_states, spec.n_actions)) * scale
        utility = rng.random((spec.n_states, spec.n_actions)) * scale
        cmdp = Cmdp(
            transition=transition,
            reward=reward,
            utility=utility,
            b=spec.b,
            gamma=spec.gamma,
            rho=rho,
        )
        if slater_slack(cmdp) >= spec.min_slack:
            return cmdp
    raise RuntimeError(
        f"no feasible instance with slack >= {spec.min_slack} in {spec.max_regen} attempts"
    )
