"""ITKrM and IcTKM: thresholding / compressed thresholding followed by
K residual means.

One iteration selects, for every signal ``y``, the ``S`` atoms with the
largest ``|<psi_k, y>|`` (or ``|<Psi psi_k, Psi y>|`` after a JL
embedding ``Psi`` in the compressed variant) and then accumulates, for
each selected atom ``k``,

    sign(<psi_k, y>) * (y - P(Psi_I) y + P(psi_k) y)

before normalizing the columns. Signals are processed in fixed-size
chunks whose partial sums are reduced in chunk order, so results do not
depend on the worker count.
"""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps

from .jl_embedding import JLEmbedding, draw_embedding, embed

_logger = logging.getLogger(__name__)

RANK_TOL = 1e-10
CHOLESKY_TOL = 1e-6
DEGENERATE_TOL = 1e-10


@dataclass
class LearnerConfig:
    """Parameters of an ITKrM (``compressed=False``) or IcTKM run.

    ``batch_mode`` is ``"fresh"`` (new signals every iteration) or
    ``"fixed"`` (one dataset reused); a compressed run always draws a new
    embedding per iteration.
    """

    S: int
    compressed: bool = False
    kind: str = "dct"
    m: int | None = None
    iterations: int = 1
    batch_size: int | None = None
    batch_mode: str = "fresh"
    seed: int | None = None
    chunk_size: int = 4096
    workers: int = 1

    def validate(self, d, K):
        if not 1 <= self.S < K:
            raise ValueError(f"need 1 <= S < K, got S={self.S}, K={K}")
        if self.compressed:
            if self.m is None or not 1 <= self.m <= d:
                raise ValueError(f"need 1 <= m <= d for compressed learning, got m={self.m}")
        if self.batch_mode not in ("fresh", "fixed"):
            raise ValueError(f"unknown batch mode {self.batch_mode!r}")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")


@dataclass
class IterationReport:
    iteration: int
    wall_time: float
    selection_counts: np.ndarray
    replaced_atoms: int
    metrics: dict = field(default_factory=dict)


def select_top(magnitudes, S, axis=0):
    """Indices of the ``S`` largest entries along ``axis`` (atoms), as an
    ``(n, S)`` array sorted ascending. Ties go to the lower index."""
    mags = np.asarray(magnitudes)
    squeeze = mags.ndim == 1
    if squeeze:
        mags = mags[None, :]
    elif axis == 0:
        mags = mags.T
    n, K = mags.shape
    if not 1 <= S <= K:
        raise ValueError(f"need 1 <= S <= K, got S={S}, K={K}")
    if S == K:
        out = np.tile(np.arange(K), (n, 1))
    else:
        out = np.argpartition(mags, K - S, axis=1)[:, K - S:]
        kth = np.take_along_axis(mags, out, axis=1).min(axis=1)
        tied = np.flatnonzero(np.count_nonzero(mags >= kth[:, None], axis=1) > S)
        out.sort(axis=1)
        if tied.size:
            out[tied] = _select_with_ties(mags[tied], kth[tied], S)
    return out[0] if squeeze else out


def _select_with_ties(mags, kth, S):
    above = mags > kth[:, None]
    tied = mags == kth[:, None]
    need = S - above.sum(axis=1)
    chosen = above | (tied & (np.cumsum(tied, axis=1) <= need[:, None]))
    return np.nonzero(chosen)[1].reshape(-1, S)


def threshold_support(dico, y, S):
    """Support of ``y`` by plain thresholding against ``dico``'s atoms."""
    return select_top(np.abs(np.asarray(dico).T @ y), S)


def compressed_threshold_support(embedded_dico, embedded_signal, S):
    """Support by thresholding the embedded inner products (complex
    moduli for DFT embeddings)."""
    U = np.asarray(embedded_dico)
    return select_top(np.abs(U.conj().T @ embedded_signal), S)


def _sign(v):
    return np.where(v < 0, -1.0, 1.0)


def _solve_gram(gram, rhs):
    """Batched ``gram^+ rhs`` for symmetric PSD ``gram``.

    Well-conditioned systems go through a Cholesky check and an LU solve;
    the rest use an eigendecomposition that discards eigenvalues below
    ``RANK_TOL`` times the largest.
    """
    gram = np.asarray(gram, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    shape = rhs.shape
    S = gram.shape[-1]
    G = gram.reshape(-1, S, S)
    r = rhs.reshape(-1, S)
    try:
        L = np.linalg.cholesky(G)
        pivots = np.diagonal(L, axis1=1, axis2=2) ** 2
        ok = pivots.min(axis=1) > CHOLESKY_TOL * np.diagonal(G, axis1=1, axis2=2).max(axis=1)
    except np.linalg.LinAlgError:
        ok = np.zeros(G.shape[0], dtype=bool)
    out = np.empty_like(r)
    if ok.any():
        out[ok] = np.linalg.solve(G[ok], r[ok][..., None])[..., 0]
    bad = ~ok
    if bad.any():
        out[bad] = _eig_solve(G[bad], r[bad])
    return out.reshape(shape)


def _eig_solve(G, r):
    w, V = np.linalg.eigh(G)
    cutoff = RANK_TOL * w[:, -1:]
    keep = w > cutoff
    inv = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    proj = np.einsum("nji,nj->ni", V, r)
    return np.einsum("nij,nj->ni", V, proj * inv)


def project(atoms_I, y):
    """Orthogonal projection of ``y`` onto the span of ``atoms_I``'s columns."""
    A = np.asarray(atoms_I)
    return A @ _solve_gram(A.T @ A, A.T @ y)


def residual_update(dico, y, support, k):
    """Contribution of signal ``y`` to the residual mean of atom ``k``."""
    dico = np.asarray(dico)
    support = np.asarray(support)
    if k not in support:
        raise ValueError("atom k must belong to the support")
    psi_k = dico[:, k]
    ip = psi_k @ y
    residual = y - project(dico[:, support], y)
    return _sign(ip) * (residual + ip * psi_k)


def _chunk_update(dico, dicoT, gram, Yt, supports_fn, S):
    """Partial residual sums and selection counts for one chunk of
    signals stored row-wise in ``Yt`` (``(n, d)``); ``dicoT`` is a
    C-contiguous copy of ``dico.T``."""
    d, K = dico.shape
    I, products = supports_fn(Yt)  # (n, S), full (n, K) products or None
    n = I.shape[0]
    if products is None:
        ips = np.einsum("nsd,nd->ns", dicoT[I], Yt)
    else:
        ips = np.take_along_axis(products, I, axis=1)
    gram_I = gram[I[:, :, None], I[:, None, :]]
    coef = _solve_gram(gram_I, ips)
    indptr = np.arange(0, n * S + 1, S)
    C = sps.csr_matrix((coef.ravel(), I.ravel(), indptr), shape=(n, K))
    residual = Yt - C @ dicoT
    M = sps.csr_matrix((_sign(ips).ravel(), I.ravel(), indptr), shape=(n, K))
    acc = np.asarray(M.T @ residual).T
    weights = np.bincount(I.ravel(), weights=np.abs(ips).ravel(), minlength=K)
    acc = acc + dico * weights
    counts = np.bincount(I.ravel(), minlength=K)
    return acc, counts


def _support_functions(dico, S, embedding, dicoT=None):
    """Map a row-wise chunk ``(n, d)`` of signals to its ``(n, S)`` supports
    and, for plain thresholding, the full ``(n, K)`` inner products."""
    if embedding is None:
        def supports(Yt):
            products = Yt @ dico
            return select_top(np.abs(products), S, axis=1), products
        return supports
    dicoT = np.ascontiguousarray(dico.T) if dicoT is None else dicoT
    Ut = embed(embedding, dicoT, axis=-1)  # (K, m)
    Uc = Ut.conj().T if embedding.is_complex else Ut.T

    scratch = threading.local()

    def compressed(Yt):
        # one reusable buffer per thread for the signed copy of the chunk
        buf = getattr(scratch, "buf", None)
        dtype = np.result_type(Yt, float)
        if buf is None or buf.shape[0] < Yt.shape[0] or buf.dtype != dtype:
            buf = scratch.buf = np.empty(Yt.shape, dtype=dtype)
        products = embed(embedding, Yt, axis=-1, workspace=buf[:Yt.shape[0]]) @ Uc
        scores = np.abs(products, out=products) if not embedding.is_complex else np.abs(products)
        return select_top(scores, S, axis=1), None
    return compressed


def compute_supports(dico, Y, S, embedding=None, chunk_size=4096):
    """Supports of all columns of ``Y`` (``(N, S)``), compressed when an
    embedding is given."""
    dico = np.asarray(dico, dtype=float)
    fn = _support_functions(dico, S, embedding)
    Yt = np.asarray(Y).T
    return np.vstack([fn(Yt[i:i + chunk_size])[0] for i in range(0, Yt.shape[0], chunk_size)])


def iterate(dico, Y, config: LearnerConfig, embedding: JLEmbedding | None = None,
            rng=None, iteration=0):
    """One ITKrM/IcTKM pass over the columns of ``Y``.

    Returns the normalized new dictionary and an :class:`IterationReport`.
    Atoms whose accumulated residual is negligible are replaced by random
    unit vectors drawn from ``rng``.
    """
    start = time.perf_counter()
    dico = np.asarray(dico, dtype=float)
    Y = np.asarray(Y)
    d, K = dico.shape
    if Y.ndim != 2 or Y.shape[0] != d:
        raise ValueError(f"signals must be a ({d}, N) matrix")
    N = Y.shape[1]
    if N == 0:
        raise ValueError("empty batch")
    if (embedding is not None) != config.compressed:
        raise ValueError("an embedding must be supplied exactly when config.compressed is set")
    if embedding is not None and embedding.d != d:
        raise ValueError("embedding dimension differs from signal dimension")
    S = config.S
    dicoT = np.ascontiguousarray(dico.T)
    gram = dicoT @ dico
    supports_fn = _support_functions(dico, S, embedding, dicoT)
    starts = range(0, N, config.chunk_size)

    Yt = Y.T

    def work(i):
        return _chunk_update(dico, dicoT, gram, Yt[i:i + config.chunk_size], supports_fn, S)

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(i) for i in starts]
    new = np.zeros((d, K))
    counts = np.zeros(K, dtype=np.int64)
    for acc, cnt in parts:
        new += acc
        counts += cnt

    norms = np.linalg.norm(new, axis=0)
    degenerate = np.flatnonzero(norms < DEGENERATE_TOL * np.sqrt(N / K))
    if degenerate.size:
        rng = np.random.default_rng() if rng is None else rng
        fresh = rng.standard_normal((d, degenerate.size))
        new[:, degenerate] = fresh
        norms[degenerate] = np.linalg.norm(fresh, axis=0)
        _logger.debug("iteration %d: replaced %d degenerate atoms", iteration, degenerate.size)
    new /= norms
    report = IterationReport(iteration, time.perf_counter() - start, counts, int(degenerate.size))
    return new, report


class SyntheticSource:
    """Draws batches from a generating dictionary and coefficient model."""

    def __init__(self, dictionary, model, noise_sigma):
        self.dictionary = dictionary
        self.model = model
        self.noise_sigma = noise_sigma

    def draw(self, n, rng):
        from .signal_model import draw_signals
        return draw_signals(self.dictionary, self.model, self.noise_sigma, n, rng).Y


def learn(init, source, config: LearnerConfig, reference=None, callback=None):
    """Run ``config.iterations`` iterations from ``init``.

    Parameters
    ----------
    init : (d, K) array
    source : (d, N) array or object with ``draw(n, rng)``
        A fixed dataset, or a signal provider. With ``batch_mode="fresh"``
        the provider is asked for ``config.batch_size`` new signals each
        iteration; with ``"fixed"`` it is asked once.
    reference : (d, K) array, optional
        Generating dictionary; when given, each report carries the
        distance to it and the recovery rate.
    callback : callable, optional
        Called with ``(iteration, dico, report)`` after each iteration.

    Returns
    -------
    dico : (d, K) array
    reports : list of IterationReport
    """
    from .evaluation import dictionary_distance, recovery_rate

    dico = np.array(init, dtype=float)
    d, K = dico.shape
    config.validate(d, K)
    rng = np.random.default_rng(config.seed)
    fixed = None
    if isinstance(source, np.ndarray):
        fixed = source
    elif config.batch_mode == "fixed":
        fixed = source.draw(config.batch_size, rng)
    if fixed is None and not config.batch_size:
        raise ValueError("a signal provider needs config.batch_size")
    reports = []
    for it in range(config.iterations):
        Y = fixed if fixed is not None else source.draw(config.batch_size, rng)
        embedding = draw_embedding(config.kind, d, config.m, rng) if config.compressed else None
        dico, report = iterate(dico, Y, config, embedding, rng, iteration=it)
        if reference is not None:
            report.metrics["distance"] = dictionary_distance(dico, reference).distance
            report.metrics["recovery_rate"] = recovery_rate(dico, reference)
        reports.append(report)
        if callback is not None:
            callback(it, dico, report)
    return dico, reports
