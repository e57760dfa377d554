import numpy as np
import pytest

from cmdplab import Cmdp, ParamKind, PolicyParams, PolicyTable, make_policy
from cmdplab.rng import RngStream


def random_cmdp(rng: np.random.Generator, n_states=4, n_actions=3, gamma=0.9,
                b=0.5, scale=1.0) -> Cmdp:
    """A dense random instance for property tests; signals in [0, scale]."""
    raw = rng.random((n_states, n_actions, n_states)) + 1e-3
    transition = raw / raw.sum(axis=2, keepdims=True)
    return Cmdp(
        transition=transition,
        reward=rng.random((n_states, n_actions)) * scale,
        utility=rng.random((n_states, n_actions)) * scale,
        b=b,
        gamma=gamma,
        rho=np.full(n_states, 1.0 / n_states),
    )


def random_policy(rng: np.random.Generator, n_states, n_actions) -> PolicyTable:
    raw = rng.random((n_states, n_actions)) + 1e-3
    return PolicyTable(raw / raw.sum(axis=1, keepdims=True))


def softmax_policy(theta) -> PolicyTable:
    return make_policy(PolicyParams(ParamKind.SOFTMAX, np.asarray(theta, dtype=float)))


def two_state_cycle(gamma=0.5, r0=1.0, r1=0.0) -> Cmdp:
    """Deterministic cycle s0 -> s1 -> s0 with one action; r(s0)=r0, r(s1)=r1."""
    transition = np.zeros((2, 1, 2))
    transition[0, 0, 1] = 1.0
    transition[1, 0, 0] = 1.0
    return Cmdp(
        transition=transition,
        reward=np.array([[r0], [r1]]),
        utility=np.array([[0.5], [0.5]]),
        b=0.1,
        gamma=gamma,
        rho=np.array([1.0, 0.0]),
    )


def one_state_cmdp(n_actions=1, reward=None, utility=None, gamma=0.9, b=0.1) -> Cmdp:
    reward = np.ones((1, n_actions)) if reward is None else np.asarray(reward, float).reshape(1, -1)
    utility = np.full((1, n_actions), 0.5) if utility is None else np.asarray(utility, float).reshape(1, -1)
    return Cmdp(
        transition=np.ones((1, n_actions, 1)),
        reward=reward,
        utility=utility,
        b=b,
        gamma=gamma,
        rho=np.array([1.0]),
    )


def random_two_state_cmdp(rng: np.random.Generator, gamma=0.6) -> Cmdp:
    """2-state 2-action instance with a binding but strictly feasible constraint."""
    from cmdplab import value_iteration

    raw = rng.random((2, 2, 2)) + 0.05
    transition = raw / raw.sum(axis=2, keepdims=True)
    cmdp = Cmdp(transition, rng.random((2, 2)), rng.random((2, 2)),
                0.0, gamma, np.array([0.6, 0.4]))
    v_max, _ = value_iteration(cmdp, (0.0, 1.0))
    v_min, _ = value_iteration(cmdp, (0.0, -1.0))
    hi = float(cmdp.rho @ v_max)
    lo = float(-cmdp.rho @ v_min)
    b = hi - 0.25 * (hi - lo)
    return Cmdp(transition, cmdp.reward, cmdp.utility, b, gamma, cmdp.rho)


def brute_force_constrained_value(cmdp: Cmdp, stages=3, points=100) -> float:
    """Exhaustive search over mixed 2-state 2-action policies.

    Policies are (p0, p1), the probability of action 0 in each state; values
    come from the closed-form 2x2 solve, vectorized over the whole grid, with
    refinement passes around the best feasible cell. Shares no code with the
    dual-search solver it checks.
    """
    gamma, P, r, g, rho, b = (cmdp.gamma, cmdp.transition, cmdp.reward,
                              cmdp.utility, cmdp.rho, cmdp.b)

    def values_on_grid(p0, p1):
        probs = np.stack([
            np.stack([p0, 1.0 - p0], axis=-1),
            np.stack([p1, 1.0 - p1], axis=-1),
        ], axis=-2)                              # [..., 2 states, 2 actions]
        p_pi = np.einsum("...sa,sat->...st", probs, P)
        det = (1 - gamma * p_pi[..., 0, 0]) * (1 - gamma * p_pi[..., 1, 1]) \
            - gamma * p_pi[..., 0, 1] * gamma * p_pi[..., 1, 0]
        out = []
        for c in (r, g):
            c_pi = np.einsum("...sa,sa->...s", probs, c)
            v0 = ((1 - gamma * p_pi[..., 1, 1]) * c_pi[..., 0]
                  + gamma * p_pi[..., 0, 1] * c_pi[..., 1]) / det
            v1 = (gamma * p_pi[..., 1, 0] * c_pi[..., 0]
                  + (1 - gamma * p_pi[..., 0, 0]) * c_pi[..., 1]) / det
            out.append(rho[0] * v0 + rho[1] * v1)
        return out

    lo0, hi0, lo1, hi1 = 0.0, 1.0, 0.0, 1.0
    best = -np.inf
    for _ in range(stages):
        p0 = np.linspace(lo0, hi0, points)
        p1 = np.linspace(lo1, hi1, points)
        g0, g1 = np.meshgrid(p0, p1, indexing="ij")
        v_r, v_g = values_on_grid(g0, g1)
        feasible = v_g >= b
        if not feasible.any():
            break
        masked = np.where(feasible, v_r, -np.inf)
        idx = np.unravel_index(np.argmax(masked), masked.shape)
        best = max(best, masked[idx])
        h0 = (hi0 - lo0) / (points - 1)
        h1 = (hi1 - lo1) / (points - 1)
        lo0, hi0 = max(0.0, g0[idx] - 2 * h0), min(1.0, g0[idx] + 2 * h0)
        lo1, hi1 = max(0.0, g1[idx] - 2 * h1), min(1.0, g1[idx] + 2 * h1)
    return best


@pytest.fixture
def np_rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def stream():
    return RngStream(seed=20240817)
