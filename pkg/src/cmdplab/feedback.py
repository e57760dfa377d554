"""Link functions, simulated evaluator panels, and clipped inverse-link scores.

A panel of m simulated evaluators votes on a trajectory (pair); the empirical
vote frequency is clipped into the link's achievable range [sigma(-G(H)),
sigma(G(H))] and inverted, yielding a score estimate of the underlying return
difference. Clipping keeps every possible vote count invertible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import RngStream

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Acklam's rational approximation of the standard normal quantile
# (~1.15e-9 relative error before refinement).
_ACK_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACK_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_ACK_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACK_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)


def _normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def _normal_quantile(p: float) -> float:
    """Acklam's approximation polished by two Halley steps (~1e-15).

    Upper-half inputs reflect through symmetry first: 1 - p is exact in
    IEEE for p >= 1/2, and the refinement is then evaluated in the lower
    tail where the normal CDF is well scaled.
    """
    if not (0.0 < p < 1.0):
        raise ValueError("quantile requires p in (0, 1)")
    if p > 0.5:
        return -_normal_quantile(1.0 - p)
    a, b, c, d = _ACK_A, _ACK_B, _ACK_C, _ACK_D
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    else:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    for _ in range(2):
        e = _normal_cdf(x) - p
        u = e * _SQRT_2PI * math.exp(0.5 * x * x)
        x = x - u / (1.0 + 0.5 * x * u)
    return x


def _logistic(x):
    # Stable on both tails.
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class LinkFunction:
    """A strictly increasing map from score differences to vote probabilities.

    forward(0) = 1/2 for every shipped kind. inverse is exact on the open
    unit interval; callers clip first.
    """

    BRADLEY_TERRY = "bradley_terry"
    LOGISTIC_ABSOLUTE = "logistic_absolute"
    PROBIT = "probit"

    def __init__(self, kind: str):
        if kind not in (self.BRADLEY_TERRY, self.LOGISTIC_ABSOLUTE, self.PROBIT):
            raise ValueError(f"unknown link kind {kind!r}")
        self.kind = kind

    def forward(self, x):
        if self.kind == self.PROBIT:
            return np.vectorize(_normal_cdf)(x)[()] if np.ndim(x) else _normal_cdf(float(x))
        out = _logistic(x)
        return float(out) if np.ndim(x) == 0 else out

    def inverse(self, p):
        if self.kind == self.PROBIT:
            if np.ndim(p) == 0:
                return _normal_quantile(float(p))
            return np.vectorize(_normal_quantile)(p)
        p = np.asarray(p, dtype=float)
        out = np.log(p) - np.log1p(-p)
        return float(out) if out.ndim == 0 else out

    def inverse_lipschitz(self, g_h: float) -> float:
        return inverse_lipschitz(self, g_h)


def bradley_terry() -> LinkFunction:
    return LinkFunction(LinkFunction.BRADLEY_TERRY)


def logistic_absolute() -> LinkFunction:
    return LinkFunction(LinkFunction.LOGISTIC_ABSOLUTE)


def probit() -> LinkFunction:
    return LinkFunction(LinkFunction.PROBIT)


def bt_forward(x: float) -> float:
    """Bradley-Terry preference probability of a score difference x."""
    return float(_logistic(x))


def clip_probability(p, link: LinkFunction, g_h: float):
    """Clamp an empirical probability into the link's achievable range.

    The range endpoints are pulled inside (0, 1) by one ulp when the link
    saturates there in double precision (the probit does for g_h beyond
    ~8), so every clipped value stays finitely invertible.
    """
    lo = max(link.forward(-g_h), np.nextafter(0.0, 1.0))
    hi = min(link.forward(g_h), np.nextafter(1.0, 0.0))
    out = np.minimum(np.maximum(p, lo), hi)
    return float(out) if np.ndim(out) == 0 else out


def inverse_lipschitz(link: LinkFunction, g_h: float) -> float:
    """Lipschitz constant of the inverse link on [sigma(-g_h), sigma(g_h)].

    The inverse derivative of both shipped families is monotone away from
    p = 1/2, so the supremum sits at the clip endpoints.
    """
    if link.kind == LinkFunction.PROBIT:
        # d/dp of the quantile is 1/phi(quantile(p)), maximal at p = sigma(+-g_h).
        return _SQRT_2PI * math.exp(0.5 * g_h * g_h)
    p_min = bt_forward(-g_h)
    return 1.0 / (p_min * (1.0 - p_min))


@dataclass(frozen=True)
class FeedbackEstimate:
    """One panel query: clipped vote frequency, inverted score, raw positive votes."""

    p_hat: float
    score: float
    raw_count: int


@dataclass
class EvaluatorPanel:
    """m simulated evaluators voting i.i.d. on whatever they are shown.

    query_counter accumulates one-bit answers: exactly m per query. The
    panel owns its RngStream and must not be shared across tasks.
    """

    m: int
    rng: RngStream
    query_counter: int = field(default=0)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("panel needs at least one evaluator")

    def votes(self, p) -> np.ndarray:
        """[n_queries, m] Bernoulli votes for query probabilities p."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        draws = self.rng.random((p.shape[0], self.m))
        self.query_counter += self.m * p.shape[0]
        return draws < p[:, None]


def _scores_from_votes(link: LinkFunction, votes: np.ndarray, g_h: float):
    counts = votes.sum(axis=1)
    p_hat = clip_probability(counts / votes.shape[1], link, g_h)
    return np.asarray(p_hat, dtype=float), link.inverse(p_hat), counts


def pairwise_query(
    link: LinkFunction, r1: float, r0: float, panel: EvaluatorPanel, g_h: float
) -> FeedbackEstimate:
    """Panel comparison of two returns; score estimates r1 - r0."""
    votes = panel.votes(link.forward(r1 - r0))
    p_hat, score, counts = _scores_from_votes(link, votes, g_h)
    return FeedbackEstimate(float(p_hat[0]), float(np.atleast_1d(score)[0]), int(counts[0]))


def absolute_query(
    link_c: LinkFunction, r_g: float, b: float, panel: EvaluatorPanel, g_h: float
) -> FeedbackEstimate:
    """Panel rating of a single return against the threshold; score estimates r_g - b."""
    votes = panel.votes(link_c.forward(r_g - b))
    p_hat, score, counts = _scores_from_votes(link_c, votes, g_h)
    return FeedbackEstimate(float(p_hat[0]), float(np.atleast_1d(score)[0]), int(counts[0]))


def pairwise_scores(
    link: LinkFunction, r1: np.ndarray, r0: np.ndarray, panel: EvaluatorPanel, g_h: float
) -> np.ndarray:
    """Vectorized pairwise queries: one inverted score per (r1, r0) pair."""
    votes = panel.votes(link.forward(np.asarray(r1) - np.asarray(r0)))
    _, scores, _ = _scores_from_votes(link, votes, g_h)
    return np.atleast_1d(scores)


def absolute_scores(
    link_c: LinkFunction, r_g: np.ndarray, b: float, panel: EvaluatorPanel, g_h: float
) -> np.ndarray:
    """Vectorized absolute queries: one inverted score per trajectory return."""
    votes = panel.votes(link_c.forward(np.asarray(r_g) - b))
    _, scores, _ = _scores_from_votes(link_c, votes, g_h)
    return np.atleast_1d(scores)
