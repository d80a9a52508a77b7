"""Single-stage free-utility machinery.

The central object is the exponential tilt of a prior by a utility vector:
``policy ∝ prior · exp(t·gain)``. Every solver in the package — the Gibbs
constructor, KL-regularized control, certainty equivalents, and the tree
recursion — is this one primitive at some inverse temperature ``t``, including
its three limits (t → 0 returns the prior, t → ±∞ concentrate uniformly on
the arg-max/arg-min over the prior's support). Funnelling everything through
one code path is what makes the exact-equality identities between solvers
hold bit-for-bit rather than approximately.

Temperatures come in two flavours here: ``alpha`` is a *temperature*
(exponents are u/α, so α → ∞ flattens) while the tilt parameter is an
*inverse* temperature (exponents are t·u, so t → 0 flattens). The two are
linked by ``Temperature.reciprocal``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    ARGMAX_TIE_TOL,
    DomainError,
    EmptySupport,
    FiniteDistribution,
    Temperature,
    UtilityTable,
    entropy,
    expectation,
    kl_divergence,
)


@dataclass(frozen=True)
class TiltResult:
    """Outcome of one exponential tilt.

    value is the optimal trade-off objective (1/t)·log Σ prior·exp(t·gain):
    the certainty equivalent of the gains under the prior. log_partition is
    log Σ prior·exp(t·gain), or None at the infinite limits where the
    partition sum diverges; it is exactly 0.0 at t = 0.
    """

    policy: FiniteDistribution
    value: float
    log_partition: float | None


def exponential_tilt(
    prior: FiniteDistribution, gains: UtilityTable, inv_temp
) -> TiltResult:
    """Tilt ``prior`` toward high ``gains`` at inverse temperature ``inv_temp``.

    Finite t: policy ∝ prior·exp(t·gains) computed in log-space with
    max-subtraction. t = zero limit: the prior itself, value = expected gain.
    t = +inf / -inf: uniform over the maximizers / minimizers of gains
    restricted to support(prior), ties resolved within 1e-12.

    Constant gains (over the support) short-circuit to the prior exactly, so
    "utility shifts nothing" holds bitwise, not just numerically.
    """
    t = Temperature.coerce(inv_temp)
    g = gains.aligned_to(prior.outcomes)
    support = [i for i, p in enumerate(prior.probs) if p > 0.0]
    if not support:
        raise EmptySupport("prior assigns no positive probability anywhere")
    g_sup = g[support]

    g_min = float(g_sup.min())
    g_max = float(g_sup.max())
    if g_min == g_max:
        log_partition: float | None
        if t.is_zero:
            log_partition = 0.0
        elif t.is_finite:
            log_partition = t.value * g_max
        else:
            log_partition = None
        return TiltResult(prior, g_max, log_partition)

    if t.is_zero:
        value = math.fsum(prior.probs[i] * g[i] for i in support)
        return TiltResult(prior, value, 0.0)

    if t.is_pos_inf or t.is_neg_inf:
        target = g_max if t.is_pos_inf else g_min
        winners = {i for i in support if abs(g[i] - target) <= ARGMAX_TIE_TOL}
        share = 1.0 / len(winners)
        probs = [share if i in winners else 0.0 for i in range(len(prior))]
        return TiltResult(
            FiniteDistribution(prior.outcomes, probs), target, None
        )

    tv = t.value
    log_w = np.log(np.asarray([prior.probs[i] for i in support])) + tv * g_sup
    m = float(log_w.max())
    e = np.exp(log_w - m)
    s = float(e.sum())
    log_partition = m + math.log(s)
    probs = np.zeros(len(prior))
    probs[support] = e / s
    return TiltResult(
        FiniteDistribution(prior.outcomes, probs), log_partition / tv, log_partition
    )


def utility_gain_from_prob(p: float, alpha: float) -> float:
    """Utility gain equivalent to learning an event of probability p: α·log p.

    α is the conversion factor between utility and log-probability; negative
    α models an adversarial assignment (low probability becomes attractive).
    """
    p = float(p)
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha == 0.0:
        raise DomainError(f"conversion factor must be finite and nonzero, got {alpha!r}")
    if p <= 0.0:
        raise DomainError(f"probability must be positive, got {p!r}")
    if p > 1.0:
        raise DomainError(f"probability must not exceed 1, got {p!r}")
    return alpha * math.log(p)


def prob_from_utility_gain(gain: float, alpha: float) -> float:
    """Inverse conversion: the probability exp(gain/α) implied by a gain.

    Rejects gains whose implied probability would exceed 1 (gain and α of
    the same sign).
    """
    gain = float(gain)
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha == 0.0:
        raise DomainError(f"conversion factor must be finite and nonzero, got {alpha!r}")
    ratio = gain / alpha
    if ratio > 0.0:
        raise DomainError(
            f"gain {gain!r} at conversion factor {alpha!r} implies probability "
            f"exp({ratio!r}) > 1"
        )
    return math.exp(ratio)


def information_work(p: float, alpha: float) -> float:
    """Work required to acquire information −log p at conversion factor α > 0."""
    p = float(p)
    alpha = float(alpha)
    if not (math.isfinite(alpha) and alpha > 0.0):
        raise DomainError(f"conversion factor must be a positive real, got {alpha!r}")
    if p <= 0.0:
        raise DomainError(f"probability must be positive, got {p!r}")
    if p > 1.0:
        raise DomainError(f"probability must not exceed 1, got {p!r}")
    return -alpha * math.log(p)


def gibbs_measure(u: UtilityTable, alpha) -> FiniteDistribution:
    """The distribution with probabilities ∝ exp(u/α).

    alpha may be a positive or negative finite real, the zero limit
    (approached from above: uniform over the maximal outcomes, maximal
    meaning within 1e-12 of the maximum), or the +inf limit (uniform over
    all outcomes). Computed in log-space; finite utilities cannot overflow.
    """
    t = Temperature.coerce(alpha)
    if t.is_neg_inf:
        raise DomainError("temperature cannot be the -inf limit")
    uniform = FiniteDistribution.uniform(u.outcomes)
    return exponential_tilt(uniform, u, t.reciprocal()).policy


def free_utility(p: FiniteDistribution, u: UtilityTable, alpha: float) -> float:
    """The trade-off functional Σ p·u − α Σ p log p (expected utility plus
    α-weighted entropy). Maximized over p by gibbs_measure(u, alpha), where
    it equals α·log Σ exp(u/α)."""
    alpha = float(alpha)
    if not (math.isfinite(alpha) and alpha > 0.0):
        raise DomainError(f"temperature must be a positive real, got {alpha!r}")
    return expectation(p, u) + alpha * entropy(p)


def bounded_control(prior: FiniteDistribution, u_star: UtilityTable, alpha) -> FiniteDistribution:
    """Maximizer of Σ P·u_star − α·KL(P‖prior) over distributions P.

    The solution is the prior tilted by exp(u_star/α); its support never
    exceeds the prior's. alpha = zero limit: all mass moves uniformly onto
    the arg-max of u_star within support(prior) (deviation is free).
    alpha = +inf limit: the prior is returned unchanged (deviation is
    infinitely expensive).
    """
    t = Temperature.coerce(alpha)
    if t.is_neg_inf or (t.is_finite and t.value < 0.0):
        raise DomainError(
            f"control temperature must be positive or a declared limit, got {t.spell()}"
        )
    return exponential_tilt(prior, u_star, t.reciprocal()).policy


@dataclass(frozen=True)
class FreeUtilityReport:
    """Decomposition of a policy change into utility gained and information paid.

    total = expected_utility − information_cost, where information_cost is
    α·achieved_kl (achieved_kl in nats).
    """

    expected_utility: float
    information_cost: float
    total: float
    achieved_kl: float


def free_utility_difference(
    prior: FiniteDistribution,
    posterior: FiniteDistribution,
    u_star: UtilityTable,
    alpha: float,
) -> FreeUtilityReport:
    """Score a move from prior to posterior: utility minus α-weighted KL cost.

    Requires support(posterior) ⊆ support(prior); maximized over posteriors
    by bounded_control(prior, u_star, alpha).
    """
    alpha = float(alpha)
    if not (math.isfinite(alpha) and alpha > 0.0):
        raise DomainError(f"temperature must be a positive real, got {alpha!r}")
    kl = kl_divergence(posterior, prior)
    expected = expectation(posterior, u_star)
    cost = alpha * kl
    return FreeUtilityReport(expected, cost, expected - cost, kl)


def estimation_solution(p_f: FiniteDistribution) -> FiniteDistribution:
    """Closed-form minimizer of KL(p_f‖·): the estimate equals p_f itself.

    Included so the estimation branch of the variational pair has an explicit
    home; the objective value at the solution is KL(p_f‖p_f) = 0.
    """
    return p_f
