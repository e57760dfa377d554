"""Zeroth-order primal-dual loop: sphere-perturbation gradients from feedback.

Direct parameterization over the product of per-state simplices. Each
iteration perturbs the policy parameters along one uniform unit direction,
compares rollouts of the perturbed and base policies through evaluator
panels, and forms a one-direction gradient estimate scaled by d/mu. The
perturbed parameters are re-projected onto the simplex product before
rollout; without that the perturbation is not a valid policy.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .core import Cmdp, ParamKind, PolicyParams, PolicyTable, exact_value, make_policy
from .feedback import EvaluatorPanel, absolute_scores, inverse_lipschitz, pairwise_scores
from .npgpd import FeedbackLinks, default_links
from .oracles import SolveReport, constrained_optimum
from .rng import RngStream
from .runlog import IterateLog
from .sampling import g_of_h, sample_batch, _transition_cdf

SIMPLEX_TOL = 1e-10


@dataclass(frozen=True)
class ZpgpdConfig:
    """Loop parameters. mu_rule "theorem2" derives the perturbation radius from
    the bias balance mu^2 = max(2 gamma^H / (1-gamma), L sqrt(2 log M / M) + 2 G(H) / M^2);
    "explicit" uses the given mu."""

    iterations: int
    evaluators: int
    horizon: int
    eta1: float
    eta2: float
    rounds: int = 4
    mu: float | None = None
    mu_rule: str = "theorem2"
    lambda_cap: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if min(self.iterations, self.rounds, self.evaluators) < 1 or self.horizon < 1:
            raise ValueError("iterations, rounds, evaluators, horizon must all be >= 1")
        if self.eta1 <= 0 or self.eta2 <= 0 or self.lambda_cap <= 0:
            raise ValueError("step sizes and lambda_cap must be positive")
        if self.mu_rule not in ("explicit", "theorem2"):
            raise ValueError("mu_rule must be 'explicit' or 'theorem2'")
        if self.mu_rule == "explicit" and (self.mu is None or self.mu <= 0):
            raise ValueError("explicit mu_rule requires mu > 0")

    def resolved(self, cmdp: Cmdp, links: FeedbackLinks) -> "ZpgpdConfig":
        if self.mu_rule == "explicit":
            return self
        g_h = g_of_h(cmdp.gamma, self.horizon)
        link_l = inverse_lipschitz(links.reward, g_h)
        mu = mu_from_theorem2(cmdp.gamma, self.horizon, self.evaluators, link_l, g_h)
        return replace(self, mu=mu, mu_rule="explicit")


@dataclass
class ZpgpdState:
    theta: np.ndarray
    lam: float
    iter: int


def sample_unit_sphere(d: int, rng: RngStream) -> np.ndarray:
    """Uniform draw from the unit sphere in R^d: normalized standard normals."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    while True:
        v = rng.standard_normal(d)
        norm = np.linalg.norm(v)
        if norm > 0:
            return v / norm


def project_simplex_product(theta_raw: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row onto the probability simplex.

    Sort-based thresholding; idempotent, and rows already on the simplex
    pass through unchanged.
    """
    x = np.asarray(theta_raw, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("projection input must be finite")
    n_rows, n_cols = x.shape
    u = -np.sort(-x, axis=1)
    css = np.cumsum(u, axis=1)
    k = np.arange(1, n_cols + 1)
    cond = u + (1.0 - css) / k > 0.0
    # Index of the last column where the threshold condition holds.
    rho = n_cols - 1 - np.argmax(cond[:, ::-1], axis=1)
    tau = (css[np.arange(n_rows), rho] - 1.0) / (rho + 1.0)
    return np.maximum(x - tau[:, None], 0.0)


def mu_from_theorem2(gamma: float, h: int, m: int, link_l: float, g_h: float) -> float:
    """Perturbation radius balancing horizon truncation against feedback bias."""
    horizon_branch = 2.0 * gamma**h / (1.0 - gamma)
    feedback_branch = link_l * math.sqrt(2.0 * math.log(m) / m) + 2.0 * g_h / m**2
    return math.sqrt(max(horizon_branch, feedback_branch))


def zpgpd_gradient_estimate(
    cmdp: Cmdp,
    theta: np.ndarray,
    v: np.ndarray,
    mu: float,
    config: ZpgpdConfig,
    rng: RngStream,
    links: FeedbackLinks | None = None,
    transition_cdf: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, float, int, int]:
    """One-direction gradient estimates plus the dual signal.

    Each of the N rounds rolls a base and a perturbed trajectory from the
    same initial state, queries the panels pairwise per channel, and rates
    the base trajectory absolutely. Gradient estimates are collinear with v
    by construction.
    """
    links = links or default_links()
    n_s, n_a = cmdp.n_states, cmdp.n_actions
    n, m, h = config.rounds, config.evaluators, config.horizon
    g_h = g_of_h(cmdp.gamma, h)
    d = n_s * n_a
    p_cdf = transition_cdf if transition_cdf is not None else _transition_cdf(cmdp)

    pi_base = make_policy(PolicyParams(ParamKind.DIRECT, theta))
    theta_pert = project_simplex_product(theta + mu * v.reshape(n_s, n_a))
    pi_pert = make_policy(PolicyParams(ParamKind.DIRECT, theta_pert))

    rho_cdf = np.cumsum(cmdp.rho)[None, :]
    init = rng.child(0).categorical(rho_cdf, np.zeros(n, dtype=np.int64))
    base = sample_batch(cmdp, pi_base, init, h, rng.child(1), transition_cdf=p_cdf)
    pert = sample_batch(cmdp, pi_pert, init, h, rng.child(2), transition_cdf=p_cdf)

    queries = 0
    means = {}
    for channel, link, signal in (("r", links.reward, "reward"), ("g", links.utility, "utility")):
        panel = EvaluatorPanel(m, rng.child(3 if channel == "r" else 4))
        scores = pairwise_scores(link, pert.returns(cmdp, signal), base.returns(cmdp, signal), panel, g_h)
        queries += panel.query_counter
        means[channel] = scores.mean()
    panel_c = EvaluatorPanel(m, rng.child(5))
    scores_c = absolute_scores(links.constraint, base.returns(cmdp, "utility"), cmdp.b, panel_c, g_h)
    queries += panel_c.query_counter

    h_r = (d / mu) * means["r"] * v
    h_g = (d / mu) * means["g"] * v
    return h_r, h_g, float(scores_c.mean()), queries, 2 * n * (h + 1)


def run_zpgpd(
    cmdp: Cmdp,
    config: ZpgpdConfig,
    links: FeedbackLinks | None = None,
    solve_report: SolveReport | None = None,
) -> IterateLog:
    """Execute the full loop from the uniform policy and log every iterate."""
    links = links or default_links()
    config = config.resolved(cmdp, links)
    report = solve_report if solve_report is not None else constrained_optimum(cmdp)
    if report.slater_slack <= 0:
        raise ValueError("environment is infeasible; Slater slack must be positive")

    n_s, n_a = cmdp.n_states, cmdp.n_actions
    d = n_s * n_a
    log = IterateLog(header={
        "algo": "zpgpd",
        "seed": config.seed,
        "M": config.evaluators,
        "N": config.rounds,
        "H": config.horizon,
        "T": config.iterations,
        "eta1": config.eta1,
        "eta2": config.eta2,
        "mu": config.mu,
        "b": cmdp.b,
        "v_star_constrained": report.v_star_constrained,
        "v_star_unconstrained": report.v_star_unconstrained,
        "slater_slack": report.slater_slack,
    })

    p_cdf = _transition_cdf(cmdp)
    root = RngStream(config.seed)
    state = ZpgpdState(theta=np.full((n_s, n_a), 1.0 / n_a), lam=0.0, iter=0)
    sum_gap = 0.0
    sum_vg = 0.0
    cum_queries = 0
    cum_env_steps = 0
    started = time.perf_counter()
    for t in range(config.iterations):
        pi = make_policy(PolicyParams(ParamKind.DIRECT, state.theta))
        v_r = exact_value(cmdp, pi, "reward").v_rho
        v_g = exact_value(cmdp, pi, "utility").v_rho

        direction = sample_unit_sphere(d, root.child(t, 0))
        h_r, h_g, h_c, q, e = zpgpd_gradient_estimate(
            cmdp, state.theta, direction, config.mu, config, root.child(t, 1), links, p_cdf)

        step = (h_r + state.lam * h_g).reshape(n_s, n_a)
        theta = project_simplex_product(state.theta + config.eta1 * step)
        lam = float(min(max(state.lam - config.eta2 * h_c, 0.0), config.lambda_cap))
        state = ZpgpdState(theta=theta, lam=lam, iter=t + 1)

        cum_queries += q
        cum_env_steps += e
        gap = report.v_star_constrained - v_r
        sum_gap += gap
        sum_vg += v_g
        log.append(
            iter=t,
            v_r_exact=v_r,
            v_g_exact=v_g,
            **{"lambda": lam},
            gap_instant=gap,
            gap_running_avg=sum_gap / (t + 1),
            violation_running=max(0.0, cmdp.b - sum_vg / (t + 1)),
            cum_queries=cum_queries,
            cum_env_steps=cum_env_steps,
            wall_ms=(time.perf_counter() - started) * 1e3,
        )
    return log


def theorem2_step_sizes(
    cmdp: Cmdp, xi: float, iterations: int, rho_ratio_sq: float | None = None
) -> tuple[float, float]:
    """The theory step sizes, for reporting and ablations.

    The distribution-mismatch constant needs the optimal policy, which the
    algorithm must not consume; the default proxy 1 / min_s rho[s] upper
    bounds it. At experiment scales these constants are far outside the
    practical range (see README); they are not the shipped defaults.
    """
    if xi <= 0:
        raise ValueError("xi must be positive")
    if rho_ratio_sq is None:
        rho_ratio_sq = float((1.0 / cmdp.rho.min()) ** 2)
    one_minus = 1.0 - cmdp.gamma
    eta1 = one_minus**4 / (2.0 * cmdp.n_actions * (1.0 + 2.0 / xi))
    eta2 = (
        8.0 * cmdp.n_actions * cmdp.n_states * (1.0 + 2.0 / xi)
        / (one_minus**4 * math.sqrt(iterations))
        * rho_ratio_sq
    )
    return eta1, eta2


def lambda_cap_from_slack(gamma: float, xi: float) -> float:
    """Dual cap 2 / ((1-gamma) xi) guaranteeing the optimal multiplier is inside."""
    if xi <= 0:
        raise ValueError("xi must be positive")
    return 2.0 / ((1.0 - gamma) * xi)
