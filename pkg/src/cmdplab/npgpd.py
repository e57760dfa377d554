"""Natural policy gradient primal-dual loop driven by panel feedback.

Softmax parameterization. Each iteration estimates reward and utility
advantages at every state-action pair from pairwise panel comparisons
(rollout with a forced first action vs. a comparator rollout from the same
state), estimates the constraint signal from absolute panel ratings, then
takes the closed-form multiplicative policy step and a projected dual step.

Exact values are logged for diagnostics only; the update consumes nothing
but feedback.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .core import Cmdp, ParamKind, PolicyParams, PolicyTable, exact_value, make_policy
from .feedback import (
    EvaluatorPanel,
    LinkFunction,
    absolute_scores,
    bradley_terry,
    logistic_absolute,
    pairwise_scores,
)
from .oracles import SolveReport, constrained_optimum
from .rng import RngStream
from .runlog import IterateLog
from .sampling import g_of_h, sample_batch, _transition_cdf


@dataclass(frozen=True)
class FeedbackLinks:
    """Link functions per channel; the protocol uses BT pairs and a logistic rater."""

    reward: LinkFunction
    utility: LinkFunction
    constraint: LinkFunction


def default_links() -> FeedbackLinks:
    return FeedbackLinks(bradley_terry(), bradley_terry(), logistic_absolute())


@dataclass(frozen=True)
class NpgpdConfig:
    """Loop parameters. eta1/eta2 of None resolve to the theory prescriptions
    2 log|A| and (1-gamma)/sqrt(T) at run start."""

    iterations: int
    evaluators: int
    horizon: int
    rounds: int = 4
    eta1: float | None = None
    eta2: float | None = None
    lambda_cap: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if min(self.iterations, self.rounds, self.evaluators) < 1 or self.horizon < 1:
            raise ValueError("iterations, rounds, evaluators, horizon must all be >= 1")
        if self.lambda_cap <= 0:
            raise ValueError("lambda_cap must be positive")
        for name in ("eta1", "eta2"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ValueError(f"{name} must be positive")

    def resolved(self, cmdp: Cmdp) -> "NpgpdConfig":
        eta1 = self.eta1 if self.eta1 is not None else 2.0 * math.log(cmdp.n_actions)
        eta2 = self.eta2 if self.eta2 is not None else (1.0 - cmdp.gamma) / math.sqrt(self.iterations)
        return replace(self, eta1=eta1, eta2=eta2)


@dataclass
class NpgpdState:
    theta: np.ndarray
    lam: float
    iter: int


def npgpd_primal_step(
    theta: np.ndarray,
    adv_r: np.ndarray,
    adv_g: np.ndarray,
    lam: float,
    eta1: float,
    gamma: float,
) -> np.ndarray:
    """Additive logit update; equals the multiplicative policy update exactly."""
    return theta + (eta1 / (1.0 - gamma)) * (adv_r + lam * adv_g)


def npgpd_dual_step(lam: float, h_c_hat: float, eta2: float, lambda_cap: float) -> float:
    """Projected subgradient step on the multiplier."""
    return float(min(max(lam - eta2 * h_c_hat, 0.0), lambda_cap))


def estimate_advantages(
    cmdp: Cmdp,
    pi: PolicyTable,
    config: NpgpdConfig,
    rng: RngStream,
    links: FeedbackLinks | None = None,
    transition_cdf: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Panel-based advantage estimates for every (s, a).

    Round n rolls one comparator trajectory per state and one forced-action
    trajectory per (s, a); the comparator is shared across all actions at its
    state within the round. Scores are inverted clipped vote frequencies,
    averaged over rounds.
    """
    links = links or default_links()
    n_s, n_a = cmdp.n_states, cmdp.n_actions
    n, m, h = config.rounds, config.evaluators, config.horizon
    g_h = g_of_h(cmdp.gamma, h)
    p_cdf = transition_cdf if transition_cdf is not None else _transition_cdf(cmdp)

    # Batch layout: comparator index n*S + s, forced index (n*S + s)*A + a.
    comp_init = np.tile(np.arange(n_s), n)
    forced_init = np.repeat(comp_init, n_a)
    forced_actions = np.tile(np.arange(n_a), n * n_s)
    comp = sample_batch(cmdp, pi, comp_init, h, rng.child(0), transition_cdf=p_cdf)
    forced = sample_batch(
        cmdp, pi, forced_init, h, rng.child(1),
        forced_first_actions=forced_actions, transition_cdf=p_cdf,
    )

    adv = {}
    queries = 0
    for channel, link, signal in (("r", links.reward, "reward"), ("g", links.utility, "utility")):
        r1 = forced.returns(cmdp, signal)
        r0 = np.repeat(comp.returns(cmdp, signal), n_a)
        panel = EvaluatorPanel(m, rng.child(2 if channel == "r" else 3))
        scores = pairwise_scores(link, r1, r0, panel, g_h)
        queries += panel.query_counter
        adv[channel] = scores.reshape(n, n_s, n_a).mean(axis=0)

    env_steps = n * (h + 1) * (n_s * n_a + n_s)
    return adv["r"], adv["g"], queries, env_steps


def estimate_dual_signal(
    cmdp: Cmdp,
    pi: PolicyTable,
    config: NpgpdConfig,
    rng: RngStream,
    links: FeedbackLinks | None = None,
    transition_cdf: np.ndarray | None = None,
) -> tuple[float, int, int]:
    """Panel estimate of V_g(rho) - b from absolute ratings of fresh rollouts."""
    links = links or default_links()
    n, m, h = config.rounds, config.evaluators, config.horizon
    g_h = g_of_h(cmdp.gamma, h)
    rho_cdf = np.cumsum(cmdp.rho)[None, :]
    init = rng.child(0).categorical(rho_cdf, np.zeros(n, dtype=np.int64))
    batch = sample_batch(cmdp, pi, init, h, rng.child(1), transition_cdf=transition_cdf)
    panel = EvaluatorPanel(m, rng.child(2))
    scores = absolute_scores(links.constraint, batch.returns(cmdp, "utility"), cmdp.b, panel, g_h)
    return float(scores.mean()), panel.query_counter, n * (h + 1)


def run_npgpd(
    cmdp: Cmdp,
    config: NpgpdConfig,
    links: FeedbackLinks | None = None,
    solve_report: SolveReport | None = None,
) -> IterateLog:
    """Execute the full loop from theta = 0, lambda = 0 and log every iterate.

    Each row records the exact values of the pre-update policy, the
    post-update multiplier, running averages against the constrained optimum,
    and cumulative query/step budgets.
    """
    links = links or default_links()
    config = config.resolved(cmdp)
    report = solve_report if solve_report is not None else constrained_optimum(cmdp)
    if report.slater_slack <= 0:
        raise ValueError("environment is infeasible; Slater slack must be positive")

    log = IterateLog(header={
        "algo": "npgpd",
        "seed": config.seed,
        "M": config.evaluators,
        "N": config.rounds,
        "H": config.horizon,
        "T": config.iterations,
        "eta1": config.eta1,
        "eta2": config.eta2,
        "b": cmdp.b,
        "v_star_constrained": report.v_star_constrained,
        "v_star_unconstrained": report.v_star_unconstrained,
        "slater_slack": report.slater_slack,
    })

    p_cdf = _transition_cdf(cmdp)
    root = RngStream(config.seed)
    state = NpgpdState(theta=np.zeros((cmdp.n_states, cmdp.n_actions)), lam=0.0, iter=0)
    sum_gap = 0.0
    sum_vg = 0.0
    cum_queries = 0
    cum_env_steps = 0
    started = time.perf_counter()
    for t in range(config.iterations):
        pi = make_policy(PolicyParams(ParamKind.SOFTMAX, state.theta))
        v_r = exact_value(cmdp, pi, "reward").v_rho
        v_g = exact_value(cmdp, pi, "utility").v_rho

        adv_r, adv_g, q_adv, e_adv = estimate_advantages(
            cmdp, pi, config, root.child(t, 0), links, p_cdf)
        h_c, q_dual, e_dual = estimate_dual_signal(
            cmdp, pi, config, root.child(t, 1), links, p_cdf)

        theta = npgpd_primal_step(state.theta, adv_r, adv_g, state.lam, config.eta1, cmdp.gamma)
        if not np.all(np.isfinite(theta)):
            raise ArithmeticError(f"non-finite logits at iteration {t}; aborting")
        lam = npgpd_dual_step(state.lam, h_c, config.eta2, config.lambda_cap)
        state = NpgpdState(theta=theta, lam=lam, iter=t + 1)

        cum_queries += q_adv + q_dual
        cum_env_steps += e_adv + e_dual
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
