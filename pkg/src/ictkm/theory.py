"""Closed-form quantities from the local convergence theorem for IcTKM.

Symbols: ``beta_S`` is the absolute coefficient gap, ``Delta_S`` the
relative gap, ``C_r1, C_r2, C_n`` the coefficient/noise statistics and
``B`` the squared operator norm of the generating dictionary. Logs are
natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class TheoryInputs:
    d: int
    K: int
    S: int
    mu: float
    B: float
    sigma: float
    delta: float
    theta: float
    abs_gap: float
    rel_gap: float
    C_r1: float
    C_r2: float
    C_n: float
    target_error: float

    def __post_init__(self):
        for name in ("d", "K", "S", "B", "abs_gap", "rel_gap", "C_r1", "C_n", "target_error"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("mu", "sigma", "delta", "theta", "C_r2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.delta >= self.abs_gap * math.sqrt(self.S) / 4:
            raise ValueError("distortion must satisfy delta < abs_gap * sqrt(S) / 4")

    def with_(self, **changes):
        return replace(self, **changes)


def eps_opt(t: TheoryInputs):
    """Smallest reachable error ``eps_opt``."""
    gap = t.abs_gap - 2 * t.delta / math.sqrt(t.S)
    spread = max((t.mu + t.delta) ** 2, t.sigma**2 + t.delta**2 * t.d * t.sigma**2)
    prefactor = 13 * t.K**2 * math.sqrt(t.B + 1) / (t.C_n * t.C_r1)
    if spread == 0:
        return 0.0
    return prefactor * math.exp(-(gap**2) / (72 * spread))


def convergence_radius(t: TheoryInputs):
    """Admissible distance of the initial dictionary to the generating one."""
    margin = t.rel_gap - 2 * t.delta
    if margin <= 0:
        raise ValueError("relative gap must exceed twice the distortion")
    log_term = math.log(1392 * t.K**2 * (t.B + 1) / (t.C_n * t.C_r1 * margin))
    second = margin / (9 * math.sqrt(t.B) * (0.25 + math.sqrt(log_term)))
    return min(1 / (32 * math.sqrt(t.S)), second)


def eps_mu(t: TheoryInputs):
    if t.mu == 0:
        return 0.0
    return t.K * math.exp(-1 / (4741 * t.mu**2 * t.S))


@dataclass
class AdmissibilityReport:
    conditions: dict
    eps_mu: float
    eps_opt: float

    @property
    def passed(self):
        return all(self.conditions.values())


def admissibility_check(t: TheoryInputs, constant=1.0):
    """Evaluate the theorem's preconditions.

    ``constant`` replaces the unspecified constant in
    ``max{mu, delta, sigma, sigma delta sqrt(d)} <= C / sqrt(S log(K^2/eps))``.
    """
    bound = constant / math.sqrt(t.S * math.log(t.K**2 / t.target_error))
    noise_cap = 1 / t.sigma**2 if t.sigma > 0 else math.inf
    e_mu = eps_mu(t)
    e_opt = eps_opt(t)
    conditions = {
        "incoherence": max(t.mu, t.delta, t.sigma, t.sigma * t.delta * math.sqrt(t.d)) <= bound,
        "sparsity": t.S <= min(t.K / t.B, noise_cap) / 98,
        "eps_mu": e_mu <= 1 / (48 * (t.B + 1)),
        "distortion": t.delta < t.abs_gap * math.sqrt(t.S) / 4,
        "relative_gap": t.rel_gap > 2 * t.delta,
        "target_error": t.target_error >= 8 * e_opt,
    }
    return AdmissibilityReport(conditions, e_mu, e_opt)


def _exponent(t: TheoryInputs, N):
    e = t.target_error
    denom = 576 * t.K * max(t.S, t.B + 1) * (e + 1 - t.C_r2 + t.d * t.sigma**2)
    return t.C_n**2 * t.C_r1**2 * N * e**2 / denom


def failure_probability(t: TheoryInputs, N, L):
    """Probability bound that ``L`` iterations with batches of ``N`` fail."""
    return t.theta * L + 6 * L * t.K * math.exp(-_exponent(t, N))


def sample_bound(t: TheoryInputs, target_probability, L):
    """Smallest batch size ``N`` with ``failure_probability <= target``."""
    slack = target_probability - t.theta * L
    if slack <= 0:
        raise ValueError("target probability does not exceed theta * L")
    needed = math.log(6 * L * t.K / slack)
    if needed <= 0:
        return 1
    return max(1, math.ceil(needed / _exponent(t, 1)))


def iteration_count(target_error):
    """``L = 5 ceil(log(1/eps))``, at least 1."""
    if target_error <= 0:
        raise ValueError("target error must be positive")
    x = math.log(1 / target_error)
    # guard ceil against rounding, e.g. log(1/e**-2) = 2.0000000000000004
    return max(1, 5 * math.ceil(x - 1e-12))


def recommended_inputs(dictionary, model, noise_sigma, delta, theta, target_error,
                       trials=100_000, rng=None):
    """Assemble :class:`TheoryInputs` from a generating dictionary and model."""
    from .signal_model import coefficient_statistics, gap_statistics

    abs_gap, rel_gap = gap_statistics(model)
    stats = coefficient_statistics(model, noise_sigma, dictionary.d, trials, rng)
    return TheoryInputs(
        d=dictionary.d, K=dictionary.K, S=model.S, mu=dictionary.coherence,
        B=dictionary.op_norm_sq, sigma=noise_sigma, delta=delta, theta=theta,
        abs_gap=abs_gap, rel_gap=rel_gap, C_r1=stats.C_r1, C_r2=stats.C_r2,
        C_n=stats.C_n, target_error=target_error)
