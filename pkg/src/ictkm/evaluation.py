"""Dictionary distances, recovery rates and controlled perturbations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class DistanceResult:
    distance: float
    per_atom: np.ndarray
    matching: np.ndarray
    signs: np.ndarray


def _correlations(psi, phi):
    return np.asarray(phi).T @ np.asarray(psi)  # (K_phi, K_psi)


def dictionary_distance(psi, phi) -> DistanceResult:
    """Asymmetric distance ``max_k min_j ||a_k - s psi_j||``.

    ``matching[k]`` is the learned atom closest to generating atom ``k``
    and ``signs[k]`` the sign making ``signs[k] * psi[:, matching[k]]``
    closest to ``a_k``.
    """
    C = _correlations(psi, phi)
    matching = np.argmax(np.abs(C), axis=1)
    best = C[np.arange(C.shape[0]), matching]
    signs = np.where(best < 0, -1.0, 1.0)
    per_atom = np.sqrt(np.maximum(2.0 - 2.0 * np.abs(best), 0.0))
    return DistanceResult(float(per_atom.max()), per_atom, matching, signs)


def matched_distance(psi, phi) -> DistanceResult:
    """One-to-one variant for reporting: pairs are fixed greedily in order
    of decreasing ``|<a_k, psi_j>|`` so each learned atom is used once."""
    A = np.abs(_correlations(psi, phi))
    Kp, Kq = A.shape
    matching = np.full(Kp, -1)
    used_rows = np.zeros(Kp, dtype=bool)
    used_cols = np.zeros(Kq, dtype=bool)
    for flat in np.argsort(-A, axis=None, kind="stable"):
        k, j = divmod(int(flat), Kq)
        if used_rows[k] or used_cols[j]:
            continue
        matching[k] = j
        used_rows[k] = used_cols[j] = True
        if used_rows.all() or used_cols.all():
            break
    C = _correlations(psi, phi)
    per_atom = np.full(Kp, np.sqrt(2.0))
    signs = np.ones(Kp)
    ok = matching >= 0
    vals = C[np.flatnonzero(ok), matching[ok]]
    per_atom[ok] = np.sqrt(np.maximum(2.0 - 2.0 * np.abs(vals), 0.0))
    signs[ok] = np.where(vals < 0, -1.0, 1.0)
    return DistanceResult(float(per_atom.max()), per_atom, matching, signs)


def recovery_rate(psi, phi, threshold=0.99):
    """Fraction of generating atoms ``a_k`` with ``max_l |<psi_l, a_k>| >= threshold``."""
    best = np.max(np.abs(_correlations(psi, phi)), axis=1)
    return float(np.mean(best >= threshold))


def perturb_dictionary(phi, eps, rng):
    """Dictionary at per-atom distance ``eps`` from ``phi``.

    Each atom becomes ``alpha a + omega z`` with ``alpha = 1 - eps^2/2``,
    ``omega = sqrt(eps^2 - eps^4/4)`` and ``z`` a random unit vector
    orthogonal to ``a``.
    """
    phi = np.asarray(phi, dtype=float)
    d, K = phi.shape
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (K,))
    if np.any(eps < 0) or np.any(eps > np.sqrt(2)):
        raise ValueError("eps must lie in [0, sqrt(2)]")
    Z = perturbation_directions(phi, rng)
    alpha = 1.0 - eps**2 / 2
    omega = np.sqrt(np.maximum(eps**2 - eps**4 / 4, 0.0))
    return alpha * phi + omega * Z


def perturbation_directions(phi, rng):
    """Random unit vectors ``z_k`` with ``<a_k, z_k> = 0``."""
    phi = np.asarray(phi, dtype=float)
    Z = rng.standard_normal(phi.shape)
    Z -= phi * np.sum(phi * Z, axis=0)
    Z -= phi * np.sum(phi * Z, axis=0)  # second pass for orthogonality to rounding
    return Z / np.linalg.norm(Z, axis=0)
