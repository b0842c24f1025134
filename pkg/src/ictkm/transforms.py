"""Fast orthogonal and circulant transform kernels.

Transforms act along axis 0 by default, so a ``(d, n)`` array is
transformed column by column; ``axis=-1`` handles signal-major ``(n, d)``
arrays. Sizes need not be powers of two; ``scipy.fft`` falls
back to mixed-radix/Bluestein plans for awkward lengths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

KIND_NAMES = ("dft", "dct", "circulant")


@dataclass(frozen=True, eq=False)
class TransformKind:
    """A ``d x d`` transform: unitary DFT, orthonormal DCT-II or a
    circulant matrix whose first column is ``filter``."""

    name: str
    filter: np.ndarray | None = None

    def __post_init__(self):
        if self.name not in KIND_NAMES:
            raise ValueError(f"unknown transform kind {self.name!r}")
        if self.name == "circulant":
            if self.filter is None:
                raise ValueError("circulant transform needs a filter")
            h = np.asarray(self.filter, dtype=float)
            if h.ndim != 1:
                raise ValueError("circulant filter must be 1-D")
            object.__setattr__(self, "filter", h)

    @classmethod
    def dft(cls):
        return cls("dft")

    @classmethod
    def dct(cls):
        return cls("dct")

    @classmethod
    def circulant(cls, h):
        return cls("circulant", np.asarray(h, dtype=float))

    @classmethod
    def random_circulant(cls, d, rng):
        """Circulant kind with a Rademacher filter scaled by ``1/sqrt(d)``."""
        signs = rng.integers(0, 2, size=d) * 2 - 1
        return cls("circulant", signs / np.sqrt(d))

    @property
    def is_orthogonal(self):
        return self.name != "circulant"

    @property
    def is_complex(self):
        return self.name == "dft"


def _check(kind, v, axis):
    v = np.asarray(v)
    if v.ndim not in (1, 2) or v.size < 1:
        raise ValueError("expected a vector or a (d, n) matrix")
    axis = axis % v.ndim
    if kind.name == "circulant" and kind.filter.shape[0] != v.shape[axis]:
        raise ValueError(
            f"dimension mismatch: filter has length {kind.filter.shape[0]}, "
            f"input has {v.shape[axis]} entries along the transform axis")
    return v, axis


def forward_transform(kind: TransformKind, v, axis=0, overwrite=False):
    """Apply the kind's ``d x d`` matrix to ``v`` along ``axis``.

    ``overwrite=True`` lets the FFT reuse ``v``'s memory.
    """
    v, axis = _check(kind, v, axis)
    if kind.name == "dft":
        return sfft.fft(v, axis=axis, norm="ortho", overwrite_x=overwrite)
    if kind.name == "dct":
        return sfft.dct(v, type=2, axis=axis, norm="ortho", overwrite_x=overwrite)
    # circular convolution with the filter; singular values are |fft(filter)|
    h_hat = sfft.rfft(kind.filter)
    if v.ndim == 2 and axis == 0:
        h_hat = h_hat[:, None]
    d = v.shape[axis]
    return sfft.irfft(sfft.rfft(v, axis=axis) * h_hat, n=d, axis=axis)


def inverse_transform(kind: TransformKind, w, axis=0):
    """Invert :func:`forward_transform` for the orthogonal kinds."""
    if not kind.is_orthogonal:
        raise NotImplementedError("circulant transform is not unitary; no inverse provided")
    w, axis = _check(kind, w, axis)
    if kind.name == "dft":
        return sfft.ifft(w, axis=axis, norm="ortho")
    return sfft.idct(w, type=2, axis=axis, norm="ortho")


def circulant_spectrum(kind: TransformKind):
    """Moduli of the DFT of the circulant filter (its singular values)."""
    if kind.name != "circulant":
        raise ValueError("only defined for circulant kinds")
    return np.abs(sfft.fft(kind.filter))
