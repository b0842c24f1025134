import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ictkm.signal_model import (CoefficientModel, build_dirac_dct_dictionary,
                                noise_sigma_for_snr)
from ictkm.theory import (TheoryInputs, admissibility_check, convergence_radius, eps_mu,
                          eps_opt, failure_probability, iteration_count, recommended_inputs,
                          sample_bound)
from oracles import random_inputs, straight_eps_opt, straight_failure, straight_radius


def test_eps_opt_matches_straight_line():
    rng = np.random.default_rng(0)
    for _ in range(20):
        t = random_inputs(rng)
        want = straight_eps_opt(t.d, t.K, t.S, t.mu, t.B, t.sigma, t.delta, t.abs_gap, t.C_n, t.C_r1)
        assert eps_opt(t) == pytest.approx(want, rel=1e-12)


def test_radius_matches_straight_line():
    rng = np.random.default_rng(1)
    for _ in range(20):
        t = random_inputs(rng)
        want = straight_radius(t.K, t.S, t.B, t.delta, t.rel_gap, t.C_n, t.C_r1)
        assert convergence_radius(t) == pytest.approx(want, rel=1e-12)


def test_failure_probability_matches_straight_line():
    rng = np.random.default_rng(2)
    for _ in range(20):
        t = random_inputs(rng)
        N, L = int(rng.integers(10**3, 10**8)), int(rng.integers(1, 50))
        want = straight_failure(t.K, t.S, t.B, t.d, t.sigma, t.theta, t.C_n, t.C_r1, t.C_r2,
                                t.target_error, N, L)
        assert failure_probability(t, N, L) == pytest.approx(want, rel=1e-12)


def test_iteration_count():
    assert iteration_count(math.exp(-2)) == 10
    assert iteration_count(0.01) == 25  # log(100) = 4.6
    assert iteration_count(math.exp(-1)) == 5
    assert iteration_count(1.0) == 1
    assert iteration_count(2.0) == 1
    with pytest.raises(ValueError):
        iteration_count(0.0)


@settings(max_examples=100, deadline=None)
@given(e=st.floats(1e-12, 0.999))
def test_iteration_count_formula(e):
    x = math.log(1 / e)
    L = iteration_count(e)
    assert L % 5 == 0 and L >= 5
    assert L // 5 - 1 < x + 1e-9 and x <= L // 5 + 1e-9


def hand_instance(delta=0.2):
    D = build_dirac_dct_dictionary(256)
    sigma = noise_sigma_for_snr(256, 4.0)
    return D, TheoryInputs(d=256, K=384, S=8, mu=D.coherence, B=2.0, sigma=sigma, delta=delta,
                           theta=1e-4, abs_gap=1 / math.sqrt(8), rel_gap=1.0, C_r1=math.sqrt(8),
                           C_r2=1.0, C_n=0.9, target_error=0.01)


def test_hand_instance():
    D, t = hand_instance()
    mu = D.coherence
    sigma2 = 1 / 1024
    gap = (1 / math.sqrt(8) - 0.4 / math.sqrt(8)) ** 2
    spread = max((mu + 0.2) ** 2, sigma2 + 0.04 * 256 * sigma2)
    want = 13 * 384**2 * math.sqrt(3) / (0.9 * math.sqrt(8)) * math.exp(-gap / (72 * spread))
    assert eps_opt(t) == pytest.approx(want, rel=1e-12)


def test_delta_zero_specialisation():
    _, t = hand_instance(0.0)
    mu, sigma = t.mu, t.sigma
    want = (13 * t.K**2 * math.sqrt(3) / (t.C_n * t.C_r1)
            * math.exp(-t.abs_gap**2 / (72 * max(mu**2, sigma**2))))
    assert eps_opt(t) == pytest.approx(want, rel=1e-12)


def test_eps_opt_monotone_in_delta():
    _, t = hand_instance(0.0)
    deltas = np.linspace(0.0, 0.2499, 50)
    values = [eps_opt(t.with_(delta=x)) for x in deltas]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_radius_monotone_and_bounded():
    _, t = hand_instance(0.0)
    values = [convergence_radius(t.with_(delta=x)) for x in np.linspace(0, 0.24, 30)]
    assert all(b <= a for a, b in zip(values, values[1:]))
    assert max(values) <= 1 / (32 * math.sqrt(8))


def test_radius_requires_relative_gap():
    t = TheoryInputs(d=64, K=96, S=4, mu=0.1, B=2.0, sigma=0.0, delta=0.15, theta=0.0,
                     abs_gap=0.5, rel_gap=0.2, C_r1=1.0, C_r2=1.0, C_n=1.0, target_error=0.1)
    with pytest.raises(ValueError):
        convergence_radius(t)


def test_distortion_precondition():
    _, t = hand_instance()
    with pytest.raises(ValueError):
        t.with_(delta=0.25)
    with pytest.raises(ValueError):
        t.with_(K=0)


def test_eps_mu_formula():
    _, t = hand_instance()
    assert eps_mu(t) == pytest.approx(384 * math.exp(-1 / (4741 * t.mu**2 * 8)), rel=1e-12)


def test_admissibility_report():
    _, t = hand_instance()
    report = admissibility_check(t)
    assert set(report.conditions) == {"incoherence", "sparsity", "eps_mu", "distortion",
                                      "relative_gap", "target_error"}
    assert report.conditions["distortion"] and report.conditions["relative_gap"]
    # S = 8 <= min(K/B, 1/sigma^2) / 98 = min(192, 1024) / 98 fails
    assert not report.conditions["sparsity"]
    assert not report.passed
    assert report.eps_opt == eps_opt(t)


def test_admissibility_can_pass():
    t = TheoryInputs(d=10**6, K=10**6, S=1, mu=1e-3, B=1.0, sigma=0.0, delta=1e-3, theta=0.0,
                     abs_gap=1.0, rel_gap=1.0, C_r1=1.0, C_r2=1.0, C_n=1.0, target_error=0.1)
    assert admissibility_check(t).passed
    assert not admissibility_check(t, constant=1e-4).conditions["incoherence"]


def test_sample_bound_inverts_failure_probability():
    _, t = hand_instance()
    L = iteration_count(t.target_error)
    N = sample_bound(t, 0.05, L)
    assert failure_probability(t, N, L) <= 0.05
    assert failure_probability(t, N - 1, L) > 0.05
    with pytest.raises(ValueError):
        sample_bound(t.with_(theta=0.01), 0.05, L)


def test_failure_probability_decreases_with_N():
    _, t = hand_instance()
    values = [failure_probability(t, N, 10) for N in (10**4, 10**6, 10**8)]
    assert values[0] > values[1] > values[2] >= t.theta * 10


def test_recommended_inputs():
    D = build_dirac_dct_dictionary(64)
    model = CoefficientModel.flat(4, D.K)
    t = recommended_inputs(D, model, 0.0, delta=0.1, theta=1e-3, target_error=0.05)
    assert (t.d, t.K, t.S, t.C_r1, t.C_r2, t.C_n) == (64, 96, 4, 2.0, 1.0, 1.0)
    assert t.abs_gap == pytest.approx(0.5) and t.rel_gap == pytest.approx(1.0)
    assert t.B == pytest.approx(2.0) and t.mu == pytest.approx(D.coherence)
