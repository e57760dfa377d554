"""Ground-truth solvers: value iteration and the constrained optimum via dual search.

Strong duality holds for these problems, so the constrained optimal value
equals min over lambda >= 0 of D(lambda) = max_pi [V_r + lambda (V_g - b)].
D is convex, one-dimensional, and piecewise linear (it kinks where the greedy
policy switches), so a derivative-free golden-section search is the right
tool; each inner evaluation is a value iteration made exact by a final
policy-evaluation solve.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .core import Cmdp, PolicyTable, exact_value

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
_MAX_GOLDEN_ITERS = 200


class InfeasibleEnvironment(ValueError):
    """Raised when no policy can satisfy the utility constraint."""


@dataclass(frozen=True)
class SolveReport:
    """Exact baselines for one environment."""

    v_star_unconstrained: float
    v_star_constrained: float
    lambda_star: float
    slater_slack: float
    iterations: int
    residual: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json(text: str) -> "SolveReport":
        return SolveReport(**json.loads(text))


def value_iteration(
    cmdp: Cmdp, signal_weights: tuple[float, float], tol: float = 1e-9
) -> tuple[np.ndarray, PolicyTable]:
    """Solve the unconstrained MDP with per-step payoff w_r * r + w_g * g.

    Sweeps stop once the sup-norm step falls below tol * (1-gamma) / (2*gamma);
    the returned v is then the exact value of the greedy policy (one linear
    solve), re-checked to still be greedy. Ties break to the lowest action.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    w_r, w_g = signal_weights
    c = w_r * cmdp.reward + w_g * cmdp.utility
    gamma = cmdp.gamma
    stop = tol * (1.0 - gamma) / (2.0 * gamma)
    v = np.zeros(cmdp.n_states)
    for _ in range(100_000):
        q = c + gamma * np.einsum("sat,t->sa", cmdp.transition, v)
        v_next = q.max(axis=1)
        if np.abs(v_next - v).max() < stop:
            v = v_next
            break
        v = v_next
    else:  # pragma: no cover - gamma < 1 contracts, loop always exits
        raise ArithmeticError("value iteration failed to converge")

    # Polish: evaluate the greedy policy exactly; repeat if greediness shifts.
    for _ in range(100):
        q = c + gamma * np.einsum("sat,t->sa", cmdp.transition, v)
        greedy = np.argmax(q, axis=1)
        pi = PolicyTable(np.eye(cmdp.n_actions)[greedy])
        p_pi = cmdp.transition[np.arange(cmdp.n_states), greedy]
        v_exact = np.linalg.solve(np.eye(cmdp.n_states) - gamma * p_pi, c[np.arange(cmdp.n_states), greedy])
        q_exact = c + gamma * np.einsum("sat,t->sa", cmdp.transition, v_exact)
        if np.array_equal(np.argmax(q_exact, axis=1), greedy):
            return v_exact, pi
        v = v_exact
    raise ArithmeticError("greedy policy failed to stabilize")  # pragma: no cover


def slater_slack(cmdp: Cmdp) -> float:
    """max_pi V_g(rho) - b; positive iff the constraint is strictly satisfiable."""
    v, _ = value_iteration(cmdp, (0.0, 1.0))
    return float(cmdp.rho @ v - cmdp.b)


def dual_value(cmdp: Cmdp, lam: float, tol: float = 1e-9) -> float:
    """D(lambda) = max_pi [V_r(rho) + lambda (V_g(rho) - b)]."""
    v, _ = value_iteration(cmdp, (1.0, lam), tol)
    return float(cmdp.rho @ v - lam * cmdp.b)


def constrained_optimum(cmdp: Cmdp, tol: float = 1e-8, inner_tol: float = 1e-9) -> SolveReport:
    """Constrained optimal value by minimizing the scalar dual.

    The optimal multiplier lies in [0, 2 / ((1-gamma) * slack)], so the
    golden-section bracket is finite. Requires strict feasibility.
    """
    slack = slater_slack(cmdp)
    if slack <= 0:
        raise InfeasibleEnvironment(
            f"no policy reaches the utility threshold (slack {slack:.6g})"
        )
    v_unc, _ = value_iteration(cmdp, (1.0, 0.0), inner_tol)
    v_star_unconstrained = float(cmdp.rho @ v_unc)

    lam_hi = 2.0 / ((1.0 - cmdp.gamma) * slack)
    lo, hi = 0.0, lam_hi
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1 = dual_value(cmdp, x1, inner_tol)
    f2 = dual_value(cmdp, x2, inner_tol)
    iterations = 0
    for _ in range(_MAX_GOLDEN_ITERS):
        iterations += 1
        if hi - lo < tol:
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = dual_value(cmdp, x1, inner_tol)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = dual_value(cmdp, x2, inner_tol)
    lambda_star = 0.5 * (lo + hi)
    v_star_constrained = dual_value(cmdp, lambda_star, inner_tol)
    # The dual value at lambda=0 is the unconstrained optimum, an upper bound.
    residual = max(0.0, v_star_constrained - v_star_unconstrained)
    return SolveReport(
        v_star_unconstrained=v_star_unconstrained,
        v_star_constrained=min(v_star_constrained, v_star_unconstrained),
        lambda_star=float(lambda_star),
        slater_slack=float(slack),
        iterations=iterations,
        residual=float(residual),
    )


def best_value_of(cmdp: Cmdp, pi: PolicyTable) -> tuple[float, float]:
    """Convenience: exact (V_r(rho), V_g(rho)) of a policy."""
    return (
        exact_value(cmdp, pi, "reward").v_rho,
        exact_value(cmdp, pi, "utility").v_rho,
    )
