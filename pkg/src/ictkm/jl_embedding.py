"""Fast Johnson-Lindenstrauss embeddings ``rho * P_I * O * Pi``.

``Pi`` is a random sign diagonal, ``O`` a fast transform (DFT, DCT or a
random Rademacher circulant), ``P_I`` keeps ``m`` rows sampled without
replacement and ``rho = sqrt(d / m)`` restores the expected norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .transforms import TransformKind, circulant_spectrum, forward_transform


@dataclass(frozen=True, eq=False)
class JLEmbedding:
    kind: TransformKind
    d: int
    m: int
    rows: np.ndarray
    signs: np.ndarray
    scale: float

    @property
    def is_complex(self):
        return self.kind.is_complex

    @property
    def compression_ratio(self):
        return self.d / self.m


def draw_embedding(kind, d, m, rng) -> JLEmbedding:
    """Draw a fresh embedding from ``R^d`` into ``m`` dimensions.

    Parameters
    ----------
    kind : str or TransformKind
        ``"dft"``, ``"dct"`` or ``"circulant"``. A circulant kind always
        gets a freshly drawn Rademacher filter unless a
        :class:`TransformKind` carrying a filter is passed.
    d, m : int
        Ambient and embedding dimension, ``1 <= m <= d``.
    rng : numpy.random.Generator
    """
    d, m = int(d), int(m)
    if d < 1 or not 1 <= m <= d:
        raise ValueError(f"need 1 <= m <= d, got m={m}, d={d}")
    if isinstance(kind, str):
        kind = TransformKind.random_circulant(d, rng) if kind == "circulant" else TransformKind(kind)
    elif kind.name == "circulant" and kind.filter.shape[0] != d:
        raise ValueError("circulant filter length differs from d")
    signs = (rng.integers(0, 2, size=d) * 2 - 1).astype(float)
    # sorted so that row selection reads the transform output in order
    rows = np.sort(rng.choice(d, size=m, replace=False))
    return JLEmbedding(kind, d, m, rows, signs, math.sqrt(d / m))


def embed(e: JLEmbedding, v, axis=0, workspace=None):
    """Embed a vector or the columns of a ``(d, n)`` matrix.

    With ``axis=-1`` a signal-major ``(n, d)`` array is embedded row by
    row into ``(n, m)``, which is the faster layout for large batches.
    ``workspace`` is an optional scratch array shaped like ``v`` (C order
    for ``axis=-1``, F order for columns) that is overwritten and saves
    an allocation when many batches are embedded in turn.
    """
    v = np.asarray(v)
    axis = axis % v.ndim
    if v.shape[axis] != e.d:
        raise ValueError(f"dimension mismatch: embedding expects {e.d}, got {v.shape[axis]}")
    signed = _signed_copy(v, e.signs, axis, workspace)
    if e.kind.name == "dft" and not np.iscomplexobj(signed):
        out = _real_dft_rows(signed, e.rows, axis)
    else:
        out = np.take(forward_transform(e.kind, signed, axis, overwrite=True), e.rows, axis=axis)
    out *= e.scale
    return out


def _signed_copy(v, signs, axis, out=None, block=2048):
    """``signs * v`` along ``axis``, laid out with that axis contiguous.

    A transposing copy is done in slabs of ``block`` entries along the
    transform axis, which keeps reads and writes cache friendly.
    """
    if v.ndim == 1:
        return v * signs
    columns = axis == 0
    order = "F" if columns else "C"
    signs = signs[:, None] if columns else signs
    dtype = np.result_type(v, signs)
    if (out is None or out.shape != v.shape or out.dtype != dtype
            or not (out.flags.f_contiguous if columns else out.flags.c_contiguous)):
        out = np.empty(v.shape, dtype=dtype, order=order)
    contiguous = v.flags.f_contiguous if columns else v.flags.c_contiguous
    if contiguous:
        return np.multiply(v, signs, out=out)
    for j in range(0, v.shape[axis], block):
        part = slice(j, j + block)
        index = (part, slice(None)) if columns else (slice(None), part)
        np.multiply(v[index], signs[part], out=out[index])
    return out


def _real_dft_rows(v, rows, axis=0):
    """Rows of the unitary DFT of real ``v`` from its half spectrum,
    using ``F v[k] = conj(F v[d - k])``."""
    d = v.shape[axis]
    half = sfft.rfft(v, axis=axis, norm="ortho", overwrite_x=True)
    mirrored = rows > d // 2
    out = np.take(half, np.where(mirrored, d - rows, rows), axis=axis)
    where = mirrored if v.ndim == 1 or axis == 1 else mirrored[:, None]
    np.conjugate(out, out=out, where=where)
    return out


def embed_columns(e: JLEmbedding, M):
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError("expected a (d, n) matrix")
    return embed(e, M)


def inner_products(e: JLEmbedding, U, w):
    """Moduli ``|<u_k, w>|`` between embedded atoms (columns of ``U``) and
    embedded signal(s) ``w``; returns ``(K,)`` or ``(K, n)``."""
    U = np.asarray(U)
    w = np.asarray(w)
    if U.shape[0] != e.m or w.shape[0] != e.m:
        raise ValueError("inputs must already be embedded to m dimensions")
    if e.is_complex:
        return np.abs(U.conj().T @ w)
    return np.abs(U.T @ w)


def operator_norm(e: JLEmbedding):
    """``rho * ||O||``: exact for orthogonal kinds (rows of an orthogonal
    matrix are orthonormal), an upper bound for circulant kinds with
    ``m < d`` and exact again at ``m = d``."""
    if e.kind.is_orthogonal:
        return e.scale
    return e.scale * float(circulant_spectrum(e.kind).max())


def recommended_embedding_dim(delta, p, theta, d, kind="dct", constant=1.0):
    """Embedding dimension from the fast-JL size bound, with an explicit
    leading constant (the bound is only known up to one).

    Orthogonal kinds use
    ``C d^-2 log^2(1/d) log(p/t) log^2(log(p/t)/d) log(d)`` and circulant
    kinds ``C d^-2 log(p/t) log^2(log(p/t)) log^2(d)`` (``d`` = delta,
    ``t`` = theta). The result is rounded up and clamped to ``[1, d]``.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not 0 < theta < 1 or p < 1:
        raise ValueError("need p >= 1 and theta in (0, 1)")
    name = kind if isinstance(kind, str) else kind.name
    lpt = math.log(p / theta)
    if name == "circulant":
        value = constant * delta**-2 * lpt * math.log(lpt) ** 2 * math.log(d) ** 2
    else:
        value = (constant * delta**-2 * math.log(1 / delta) ** 2 * lpt
                 * math.log(lpt / delta) ** 2 * math.log(d))
    return int(min(max(math.ceil(value), 1), d))


def atom_test_set(atoms, perturbations):
    """The ``4K^2`` sums and differences of atoms and perturbation
    directions whose norms the embedding must preserve."""
    A = np.asarray(atoms)
    Z = np.asarray(perturbations)
    K = A.shape[1]
    plus = (A[:, :, None] + A[:, None, :]).reshape(A.shape[0], -1)
    diff = A[:, :, None] - A[:, None, :]
    off = ~np.eye(K, dtype=bool)
    minus = diff[:, off]
    zplus = (A[:, :, None] + Z[:, None, :]).reshape(A.shape[0], -1)
    zminus = (A[:, :, None] - Z[:, None, :]).reshape(A.shape[0], -1)
    return np.hstack([plus, minus, zplus, zminus, Z])


def distortion_audit(e: JLEmbedding, X, pairs=False):
    """Largest relative squared-norm distortion ``| ||e(x)||^2/||x||^2 - 1 |``.

    With ``pairs=False`` the columns of ``X`` are the test vectors
    themselves; with ``pairs=True`` all pairwise differences are audited.
    Zero vectors are skipped.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if pairs:
        i, j = np.triu_indices(X.shape[1], k=1)
        X = X[:, i] - X[:, j]
    norms = np.sum(X * X, axis=0)
    keep = norms > 0
    if not keep.any():
        return 0.0
    X, norms = X[:, keep], norms[keep]
    E = embed(e, X)
    embedded = np.sum(np.abs(E) ** 2, axis=0)
    return float(np.max(np.abs(embedded / norms - 1.0)))
