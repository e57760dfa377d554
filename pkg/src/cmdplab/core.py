"""Finite CMDP environments, policy parameterizations, and exact evaluation.

Everything here is closed form: values come from dense linear solves, never
from simulation. State spaces are desk scale (|S| up to a few hundred), so
direct factorization is both exact and fast.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

ROW_TOL = 1e-10        # simplex tolerance for policy rows
DIST_TOL = 1e-12       # simplex tolerance for transition rows / rho
SOLVE_TOL = 1e-9       # residual tolerance on linear solves

REWARD = "reward"
UTILITY = "utility"


class ParamKind(Enum):
    DIRECT = "direct"
    SOFTMAX = "softmax"


def _check_rows_stochastic(mat: np.ndarray, tol: float, what: str):
    if np.any(mat < -tol):
        raise ValueError(f"{what} has negative entries")
    err = np.abs(mat.sum(axis=-1) - 1.0).max()
    if err > tol:
        raise ValueError(f"{what} rows do not sum to 1 (max error {err:.3e})")


@dataclass(frozen=True)
class Cmdp:
    """Constrained MDP: reward to maximize, utility held above a threshold.

    transition[s, a, s'] is the next-state distribution, reward/utility are
    per-step signals in [0, 1], b the utility floor, gamma the discount,
    rho the initial state distribution.
    """

    transition: np.ndarray
    reward: np.ndarray
    utility: np.ndarray
    b: float
    gamma: float
    rho: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        r = np.asarray(self.reward, dtype=float)
        g = np.asarray(self.utility, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError("transition must have shape [S, A, S]")
        S, A = P.shape[0], P.shape[1]
        if r.shape != (S, A) or g.shape != (S, A):
            raise ValueError("reward/utility must have shape [S, A]")
        if rho.shape != (S,):
            raise ValueError("rho must have shape [S]")
        _check_rows_stochastic(P, DIST_TOL, "transition")
        _check_rows_stochastic(rho[None, :], DIST_TOL, "rho")
        if r.min() < 0 or r.max() > 1 or g.min() < 0 or g.max() > 1:
            raise ValueError("reward and utility must lie in [0, 1]")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        for name, arr in (("transition", P), ("reward", r), ("utility", g), ("rho", rho)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def signal(self, which: str) -> np.ndarray:
        if which == REWARD:
            return self.reward
        if which == UTILITY:
            return self.utility
        raise ValueError(f"unknown signal {which!r}")

    def to_json(self) -> str:
        """Serialize to the published JSON document, full double precision."""
        doc = {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "gamma": self.gamma,
            "b": self.b,
            "rho": self.rho.tolist(),
            "reward": self.reward.tolist(),
            "utility": self.utility.tolist(),
            "transition": self.transition.tolist(),
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json(text: str) -> "Cmdp":
        doc = json.loads(text)
        cmdp = Cmdp(
            transition=np.array(doc["transition"], dtype=float),
            reward=np.array(doc["reward"], dtype=float),
            utility=np.array(doc["utility"], dtype=float),
            b=float(doc["b"]),
            gamma=float(doc["gamma"]),
            rho=np.array(doc["rho"], dtype=float),
        )
        if cmdp.n_states != doc["n_states"] or cmdp.n_actions != doc["n_actions"]:
            raise ValueError("declared dimensions disagree with array shapes")
        return cmdp


@dataclass(frozen=True)
class PolicyParams:
    """Policy parameters: simplex rows (direct) or unconstrained logits (softmax)."""

    kind: ParamKind
    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 2:
            raise ValueError("theta must have shape [S, A]")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta has non-finite entries")
        if self.kind is ParamKind.DIRECT:
            _check_rows_stochastic(theta, ROW_TOL, "direct theta")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class PolicyTable:
    """A stochastic policy as an [S, A] row-stochastic table."""

    pi: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        _check_rows_stochastic(pi, ROW_TOL, "policy")
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)


@dataclass(frozen=True)
class ValueBundle:
    """Exact state values, Q-values, advantages, and the rho-weighted value."""

    v: np.ndarray
    q: np.ndarray
    adv: np.ndarray
    v_rho: float


def make_policy(params: PolicyParams) -> PolicyTable:
    """Realize parameters as a policy table.

    Softmax rows are computed with max-logit subtraction: NPGPD logits grow
    without bound as advantages accumulate, and the shifted form is exact.
    """
    if params.kind is ParamKind.DIRECT:
        return PolicyTable(params.theta)
    z = params.theta - params.theta.max(axis=1, keepdims=True)
    e = np.exp(z)
    return PolicyTable(e / e.sum(axis=1, keepdims=True))


def policy_transition(cmdp: Cmdp, pi: PolicyTable) -> np.ndarray:
    """State-to-state transition matrix induced by pi: P_pi[s, s'] = sum_a pi[s,a] P[s,a,s']."""
    if pi.pi.shape != (cmdp.n_states, cmdp.n_actions):
        raise ValueError("policy shape does not match environment")
    return np.einsum("sa,sat->st", pi.pi, cmdp.transition)


def exact_value(cmdp: Cmdp, pi: PolicyTable, signal: str) -> ValueBundle:
    """Evaluate a policy exactly by solving (I - gamma P_pi) v = c_pi.

    q and adv follow from one Bellman backup; the solve residual is checked
    against SOLVE_TOL, which a healthy system beats by orders of magnitude.
    """
    c = cmdp.signal(signal)
    p_pi = policy_transition(cmdp, pi)
    c_pi = (pi.pi * c).sum(axis=1)
    lhs = np.eye(cmdp.n_states) - cmdp.gamma * p_pi
    v = np.linalg.solve(lhs, c_pi)
    residual = np.abs(lhs @ v - c_pi).max()
    if residual > SOLVE_TOL:
        raise ArithmeticError(f"policy evaluation residual {residual:.3e}; inputs corrupt?")
    q = c + cmdp.gamma * np.einsum("sat,t->sa", cmdp.transition, v)
    adv = q - v[:, None]
    return ValueBundle(v=v, q=q, adv=adv, v_rho=float(cmdp.rho @ v))


def discounted_visitation(cmdp: Cmdp, pi: PolicyTable) -> np.ndarray:
    """Discounted visitation distribution: d = (1-gamma) rho + gamma P_pi^T d."""
    p_pi = policy_transition(cmdp, pi)
    lhs = np.eye(cmdp.n_states) - cmdp.gamma * p_pi.T
    d = np.linalg.solve(lhs, (1.0 - cmdp.gamma) * cmdp.rho)
    if abs(d.sum() - 1.0) > SOLVE_TOL:
        raise ArithmeticError("visitation distribution does not normalize; inputs corrupt?")
    return d


def occupancy_measure(cmdp: Cmdp, pi: PolicyTable) -> np.ndarray:
    """Unnormalized state-action occupancy q[s,a] = d_rho[s] pi[s,a] / (1-gamma)."""
    d = discounted_visitation(cmdp, pi)
    return d[:, None] * pi.pi / (1.0 - cmdp.gamma)


def policy_from_occupancy(q: np.ndarray) -> PolicyTable:
    """Recover the policy that induces an occupancy measure.

    Rows with zero mass carry no information; they recover to uniform,
    the unique symmetric choice.
    """
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise ValueError("occupancy measure must be nonnegative")
    mass = q.sum(axis=1, keepdims=True)
    n_actions = q.shape[1]
    pi = np.where(mass > 0, np.divide(q, mass, where=mass > 0), 1.0 / n_actions)
    return PolicyTable(pi)


def uniform_policy(n_states: int, n_actions: int) -> PolicyTable:
    return PolicyTable(np.full((n_states, n_actions), 1.0 / n_actions))
