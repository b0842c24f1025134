import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ictkm.signal_model import (CoefficientModel, build_dirac_dct_dictionary,
                                coefficient_statistics, draw_coefficient_batch,
                                draw_coefficients, draw_signal, draw_signals, gap_statistics,
                                noise_factor_lower_bound, noise_sigma_for_snr, random_dictionary)


def dct_atom(d, k):
    n = np.arange(d)
    a = np.cos(np.pi * k * (2 * n + 1) / (2 * d))
    return a / np.linalg.norm(a)


def test_dirac_dct_small_case():
    D = build_dirac_dct_dictionary(4)
    assert (D.d, D.K) == (4, 6)
    expected = np.hstack([np.eye(4), np.column_stack([dct_atom(4, 0), dct_atom(4, 1)])])
    np.testing.assert_allclose(D.atoms.T @ D.atoms, expected.T @ expected, atol=1e-14)
    np.testing.assert_allclose(D.atoms, expected, atol=1e-14)


@pytest.mark.parametrize("d", [4, 16, 256])
def test_dirac_dct_unit_norm_and_coherence(d):
    D = build_dirac_dct_dictionary(d)
    np.testing.assert_allclose(np.linalg.norm(D.atoms, axis=0), 1.0, atol=1e-12)
    mu = max(np.abs(dct_atom(d, k)).max() for k in range(d // 2))
    assert D.coherence == pytest.approx(mu, abs=1e-12)
    # Dirac plus half an orthonormal basis: B = 2
    assert D.op_norm_sq == pytest.approx(2.0, abs=1e-10)


def test_zero_padding():
    D = build_dirac_dct_dictionary(8, 4)
    assert D.K == 6 and D.intrinsic_dim == 4
    np.testing.assert_array_equal(D.atoms[4:], 0.0)
    np.testing.assert_allclose(D.atoms[:4], build_dirac_dct_dictionary(4).atoms)


@pytest.mark.parametrize("d,dt", [(8, 5), (8, 10), (8, 0)])
def test_bad_intrinsic_dimension(d, dt):
    with pytest.raises(ValueError):
        build_dirac_dct_dictionary(d, dt)


def test_random_dictionary_unit_norm(rng):
    A = random_dictionary(20, 30, rng)
    np.testing.assert_allclose(np.linalg.norm(A, axis=0), 1.0)


def test_flat_coefficients(rng):
    x, support, signs = draw_coefficients(CoefficientModel.flat(4, 16), rng)
    assert len(set(support.tolist())) == 4
    np.testing.assert_allclose(np.abs(x[support]), 0.5)
    assert np.count_nonzero(x) == 4
    np.testing.assert_array_equal(np.sign(x[support]), signs)


def test_geometric_dynamic_range(rng):
    model = CoefficientModel.geometric(4, 16, 4.0)
    assert (1 - model.b) ** (1 - 4) == pytest.approx(4.0)
    values, _, _ = draw_coefficient_batch(model, 10_000, rng)
    ratio = values[:, 0] / values[:, -1]
    assert np.all(ratio <= 4.0 + 1e-12) and np.all(ratio >= 1.0 - 1e-12)
    assert np.all(np.diff(values, axis=1) <= 1e-15)
    np.testing.assert_allclose(np.linalg.norm(values, axis=1), 1.0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(S=st.integers(1, 12), K=st.integers(12, 40), dr=st.floats(1.0, 100.0),
       seed=st.integers(0, 2**32 - 1), kind=st.sampled_from(["flat", "geometric"]))
def test_coefficients_are_unit_norm_and_sparse(S, K, dr, seed, kind):
    model = CoefficientModel(kind, S, K, dr)
    x, support, _ = draw_coefficients(model, np.random.default_rng(seed))
    assert np.linalg.norm(x) == pytest.approx(1.0, abs=1e-12)
    assert np.count_nonzero(x) == S == len(set(support.tolist()))


def test_support_frequencies():
    rng = np.random.default_rng(2)
    _, supports, _ = draw_coefficient_batch(CoefficientModel.flat(4, 16), 100_000, rng)
    freq = np.bincount(supports.ravel(), minlength=16) / 100_000
    np.testing.assert_allclose(freq, 4 / 16, atol=0.01)


def test_sign_balance():
    rng = np.random.default_rng(3)
    _, _, signs = draw_coefficient_batch(CoefficientModel.flat(4, 16), 50_000, rng)
    assert abs(signs.mean()) < 0.02


def test_noiseless_signal_is_exact(rng):
    D = build_dirac_dct_dictionary(32)
    batch = draw_signals(D, CoefficientModel.geometric(3, D.K), 0.0, 100, rng)
    for n in range(100):
        x = np.zeros(D.K)
        x[batch.supports[n]] = batch.coefficients[n]
        np.testing.assert_allclose(batch.Y[:, n], D.atoms @ x, atol=1e-14)
    assert np.all(np.linalg.norm(batch.Y, axis=0) <= math.sqrt(D.op_norm_sq + 1))


def test_normalisation_formula(rng):
    D = build_dirac_dct_dictionary(16)
    sigma = 0.1
    a = draw_signals(D, CoefficientModel.flat(2, D.K), sigma, 50, np.random.default_rng(4))
    for n in range(50):
        x = np.zeros(D.K)
        x[a.supports[n]] = a.coefficients[n]
        r = a.Y[:, n] * math.sqrt(1 + a.noise_norms[n] ** 2) - D.atoms @ x
        assert np.linalg.norm(r) == pytest.approx(a.noise_norms[n], rel=1e-10)


def test_snr_in_expectation():
    rng = np.random.default_rng(6)
    D = build_dirac_dct_dictionary(64)
    sigma = noise_sigma_for_snr(64, 4.0)
    assert sigma**2 == pytest.approx(1 / (4 * 64))
    batch = draw_signals(D, CoefficientModel.geometric(4, D.K), sigma, 10_000, rng)
    X = np.zeros((D.K, batch.N))
    np.put_along_axis(X, batch.supports.T, batch.coefficients.T, axis=0)
    clean = np.sum((D.atoms @ X) ** 2, axis=0)
    snr = clean.mean() / np.mean(batch.noise_norms**2)
    assert abs(snr - 4.0) <= 0.05 * 4.0
    energy = np.sum(batch.Y**2, axis=0)
    assert energy.mean() <= D.op_norm_sq + 1


def test_infinite_snr_is_noiseless():
    assert noise_sigma_for_snr(64, None) == 0.0
    assert noise_sigma_for_snr(64, math.inf) == 0.0


def test_reproducible():
    D = build_dirac_dct_dictionary(16)
    model = CoefficientModel.geometric(3, D.K)
    a = draw_signals(D, model, 0.05, 40, np.random.default_rng(8))
    b = draw_signals(D, model, 0.05, 40, np.random.default_rng(8))
    np.testing.assert_array_equal(a.Y, b.Y)
    np.testing.assert_array_equal(a.supports, b.supports)


def test_single_signal(rng):
    D = build_dirac_dct_dictionary(16)
    s = draw_signal(D, CoefficientModel.flat(2, D.K), 0.0, rng)
    assert s.y.shape == (16,) and s.oracle_support.shape == (2,) and s.noise_norm == 0.0


def test_model_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        draw_signals(build_dirac_dct_dictionary(16), CoefficientModel.flat(2, 10), 0.0, 5, rng)


def test_gap_statistics():
    absolute, relative = gap_statistics(CoefficientModel.flat(9, 30))
    assert absolute == pytest.approx(1 / 3) and relative == pytest.approx(1.0)
    model = CoefficientModel.geometric(4, 30, 4.0)
    cb = 4.0 ** (-1 / 3)
    c = cb ** np.arange(4)
    c /= np.linalg.norm(c)
    absolute, relative = gap_statistics(model)
    assert absolute == pytest.approx(c[-1], abs=1e-12)
    assert relative == pytest.approx(0.25, abs=1e-12)


def test_flat_statistics_noiseless():
    st_ = coefficient_statistics(CoefficientModel.flat(9, 30), 0.0, 64)
    assert (st_.C_r1, st_.C_r2, st_.C_n) == (pytest.approx(3.0), pytest.approx(1.0), 1.0)


def test_geometric_statistics_monte_carlo():
    model = CoefficientModel.geometric(4, 30, 4.0)
    st_ = coefficient_statistics(model, 0.0, 64)
    values = model.draw_sequences(200_000, np.random.default_rng(1))
    assert st_.C_r1 == pytest.approx(values.sum(axis=1).mean(), abs=2e-3)
    assert st_.C_r2 == pytest.approx(1.0, abs=1e-12)


def test_noise_factor_above_lower_bound():
    sigma = 1 / math.sqrt(64)
    st_ = coefficient_statistics(CoefficientModel.flat(4, 30), sigma, 64,
                                 rng=np.random.default_rng(0))
    assert st_.C_n >= st_.C_n_lower
    assert st_.C_n_lower == pytest.approx((1 - math.exp(-64)) / math.sqrt(6.0))
    # Jensen: E 1/sqrt(1+X) >= 1/sqrt(1+E X) = 1/sqrt(2)
    assert st_.C_n >= 1 / math.sqrt(2.0) - 1e-3


@settings(max_examples=30, deadline=None)
@given(S=st.integers(1, 10), dr=st.floats(1.0, 50.0), kind=st.sampled_from(["flat", "geometric"]))
def test_statistics_ranges(S, dr, kind):
    model = CoefficientModel(kind, S, 40, dr)
    stats = coefficient_statistics(model, 0.0, 16)
    absolute, _ = gap_statistics(model)
    assert S * absolute - 1e-9 <= stats.C_r1 <= math.sqrt(S) + 1e-9
    assert stats.C_r2 <= 1.0 + 1e-9


def test_lower_bound_formula():
    assert noise_factor_lower_bound(10, 0.0) == pytest.approx(1 - math.exp(-10))
