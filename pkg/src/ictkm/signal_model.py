"""Generating dictionaries and random sparse training signals.

Signals follow ``y = (Phi x + r) / sqrt(1 + ||r||^2)`` where ``x`` is an
exactly ``S``-sparse, randomly signed and permuted unit-norm coefficient
vector and ``r`` is white Gaussian noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from scipy import integrate
from scipy.fft import dct


@dataclass(frozen=True, eq=False)
class GeneratingDictionary:
    atoms: np.ndarray
    intrinsic_dim: int

    @property
    def d(self):
        return self.atoms.shape[0]

    @property
    def K(self):
        return self.atoms.shape[1]

    @property
    def coherence(self):
        G = np.abs(self.atoms.T @ self.atoms)
        np.fill_diagonal(G, 0.0)
        return float(G.max())

    @property
    def op_norm_sq(self):
        """``B = ||Phi||_{2,2}^2``."""
        return float(np.linalg.norm(self.atoms, 2) ** 2)


def build_dirac_dct_dictionary(d, d_tilde=None) -> GeneratingDictionary:
    """Dirac basis plus the first ``d_tilde / 2`` orthonormal DCT-II atoms
    of ``R^d_tilde``, zero-padded to ``R^d``; ``K = 3 d_tilde / 2``."""
    d_tilde = d if d_tilde is None else d_tilde
    if not 1 <= d_tilde <= d:
        raise ValueError("need 1 <= d_tilde <= d")
    if d_tilde % 2:
        raise ValueError(f"K = 3/2 * {d_tilde} is not an integer")
    half = d_tilde // 2
    basis = dct(np.eye(d_tilde), type=2, axis=0, norm="ortho")
    # rows of the orthonormal DCT matrix are its basis vectors
    atoms = np.zeros((d, d_tilde + half))
    atoms[:d_tilde, :d_tilde] = np.eye(d_tilde)
    atoms[:d_tilde, d_tilde:] = basis[:half].T
    return GeneratingDictionary(atoms, d_tilde)


def random_dictionary(d, K, rng):
    """``K`` atoms uniform on the unit sphere of ``R^d``."""
    A = rng.standard_normal((d, K))
    return A / np.linalg.norm(A, axis=0)


@dataclass(frozen=True)
class CoefficientModel:
    """Distribution of the non-increasing coefficient sequence ``c``.

    ``kind="flat"`` puts ``1/sqrt(S)`` on the first ``S`` entries.
    ``kind="geometric"`` uses ``c(k) = beta * cb**(k-1)`` for ``k <= S``
    with ``cb ~ U[1 - b, 1]`` drawn per signal and ``b`` fixed by
    ``(1 - b)**(1 - S) = dynamic_range``.
    """

    kind: str
    S: int
    K: int
    dynamic_range: float = 4.0

    def __post_init__(self):
        if self.kind not in ("flat", "geometric"):
            raise ValueError(f"unknown coefficient model {self.kind!r}")
        if not 1 <= self.S <= self.K:
            raise ValueError("need 1 <= S <= K")
        if self.kind == "geometric" and self.dynamic_range < 1:
            raise ValueError("dynamic range must be >= 1")

    @classmethod
    def flat(cls, S, K):
        return cls("flat", S, K)

    @classmethod
    def geometric(cls, S, K, dynamic_range=4.0):
        return cls("geometric", S, K, dynamic_range)

    @property
    def b(self):
        if self.kind == "flat" or self.S == 1:
            return 0.0
        return 1.0 - self.dynamic_range ** (-1.0 / (self.S - 1))

    def sequence(self, decay=None):
        """The first ``S`` entries of ``c`` for decay factor ``decay``
        (defaults to the slowest decay, i.e. the flat sequence)."""
        S = self.S
        if self.kind == "flat" or decay is None or decay >= 1.0:
            return np.full(S, 1 / math.sqrt(S))
        return _geometric(np.array([decay]), S)[0]

    def draw_sequences(self, n, rng):
        """``(n, S)`` array of nonzero sequence entries, one row per signal."""
        S = self.S
        if self.kind == "flat":
            return np.full((n, S), 1 / math.sqrt(S))
        decay = rng.uniform(1.0 - self.b, 1.0, size=n)
        return _geometric(decay, S)


def _geometric(decay, S):
    powers = decay[:, None] ** np.arange(S)
    # normalizing by the row norm handles decay -> 1 without 0/0
    return powers / np.linalg.norm(powers, axis=1, keepdims=True)


def _draw_supports(n, S, K, rng):
    """Ordered uniformly random ``S``-subsets of ``range(K)``, one per row."""
    idx = rng.integers(0, K, size=(n, S))
    while S > 1:
        srt = np.sort(idx, axis=1)
        bad = np.any(srt[:, 1:] == srt[:, :-1], axis=1)
        if not bad.any():
            break
        idx[bad] = rng.integers(0, K, size=(int(bad.sum()), S))
    return idx


def draw_coefficients(model: CoefficientModel, rng):
    """One sparse ``K``-vector ``x`` with its support and signs.

    The ``j``-th support index carries ``c(j+1)``; ordering of the support
    is uniformly random, which realizes the random permutation.
    """
    values, support, signs = draw_coefficient_batch(model, 1, rng)
    x = np.zeros(model.K)
    x[support[0]] = signs[0] * values[0]
    return x, support[0], signs[0]


def draw_coefficient_batch(model, n, rng):
    """``(values, supports, signs)`` for ``n`` signals, each ``(n, S)``."""
    values = model.draw_sequences(n, rng)
    support = _draw_supports(n, model.S, model.K, rng)
    signs = (rng.integers(0, 2, size=(n, model.S)) * 2 - 1).astype(float)
    return values, support, signs


@dataclass
class GeneratedSignal:
    y: np.ndarray
    oracle_support: np.ndarray
    oracle_signs: np.ndarray
    noise_norm: float


@dataclass
class SignalBatch:
    """``Y`` is ``(d, N)``; oracle arrays are ``(N, S)``."""

    Y: np.ndarray
    supports: np.ndarray | None = None
    signs: np.ndarray | None = None
    coefficients: np.ndarray | None = None
    noise_norms: np.ndarray | None = None

    @property
    def N(self):
        return self.Y.shape[1]

    def __getitem__(self, n):
        return GeneratedSignal(self.Y[:, n], self.supports[n], self.signs[n],
                               float(self.noise_norms[n]))


def draw_signals(dictionary, model: CoefficientModel, noise_sigma, n, rng) -> SignalBatch:
    """Draw ``n`` training signals as columns of a :class:`SignalBatch`."""
    Phi = dictionary.atoms if isinstance(dictionary, GeneratingDictionary) else np.asarray(dictionary)
    d, K = Phi.shape
    if K != model.K:
        raise ValueError(f"model has K={model.K}, dictionary has {K} atoms")
    values, support, signs = draw_coefficient_batch(model, n, rng)
    coeffs = values * signs
    S = model.S
    X = sps.csr_matrix((coeffs.ravel(), support.ravel(), np.arange(0, n * S + 1, S)), shape=(n, K))
    # build signal-major (n, d) so the returned (d, n) view is F-contiguous
    Yt = np.asarray(X @ Phi.T)
    if noise_sigma > 0:
        R = rng.standard_normal((n, d))
        R *= noise_sigma
        noise_norms = np.sqrt(np.einsum("nd,nd->n", R, R))
        Yt += R
        Yt /= np.sqrt(1.0 + noise_norms**2)[:, None]
    else:
        noise_norms = np.zeros(n)
    Y = Yt.T
    return SignalBatch(Y, support, signs, coeffs, noise_norms)


def draw_signal(dictionary, model, noise_sigma, rng) -> GeneratedSignal:
    return draw_signals(dictionary, model, noise_sigma, 1, rng)[0]


def noise_sigma_for_snr(d, snr):
    """Per-coordinate noise level giving ``E||Phi x||^2 / E||r||^2 = snr``."""
    if snr is None or math.isinf(snr):
        return 0.0
    return 1.0 / math.sqrt(d * snr)


def gap_statistics(model: CoefficientModel):
    """Almost-sure ``(absolute_gap, relative_gap)`` of the model.

    For the geometric model the worst case sits at the fastest decay
    ``cb = 1 - b``.
    """
    c = model.sequence(None if model.kind == "flat" else 1.0 - model.b)
    nxt = 0.0  # c(S+1) = 0 for exactly S-sparse sequences
    absolute = c[-1] - nxt
    return float(absolute), float(absolute / c[0])


@dataclass(frozen=True)
class CoefficientStatistics:
    C_r1: float
    C_r2: float
    C_n: float
    C_n_lower: float


def noise_factor_lower_bound(d, noise_sigma):
    """``(1 - e^-d) / sqrt(1 + 5 d sigma^2)``, a lower bound on ``C_n``."""
    return (1.0 - math.exp(-d)) / math.sqrt(1.0 + 5.0 * d * noise_sigma**2)


def coefficient_statistics(model: CoefficientModel, noise_sigma, d, trials=100_000, rng=None):
    """``C_r1 = E sum c(k)``, ``C_r2 = E sum c(k)^2`` over the first ``S``
    entries and ``C_n = E 1/sqrt(1 + ||r||^2)``.

    The sequence statistics are exact for the flat model and computed by
    adaptive quadrature over the decay factor for the geometric one;
    ``C_n`` is a Monte Carlo estimate from ``trials`` noise draws.
    """
    S = model.S
    if model.kind == "flat" or model.b == 0.0:
        C_r1, C_r2 = math.sqrt(S), 1.0
    else:
        lo, width = 1.0 - model.b, model.b
        C_r1 = integrate.quad(lambda t: model.sequence(t).sum(), lo, 1.0)[0] / width
        C_r2 = integrate.quad(lambda t: np.sum(model.sequence(t) ** 2), lo, 1.0)[0] / width
    if noise_sigma == 0:
        C_n = 1.0
    else:
        rng = np.random.default_rng() if rng is None else rng
        # ||r||^2 / sigma^2 is chi-square with d degrees of freedom
        energy = noise_sigma**2 * rng.chisquare(d, size=trials)
        C_n = float(np.mean(1.0 / np.sqrt(1.0 + energy)))
    return CoefficientStatistics(C_r1, C_r2, C_n, noise_factor_lower_bound(d, noise_sigma))
