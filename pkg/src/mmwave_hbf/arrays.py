"""Uniform planar array responses, DFT beam codebooks and effective channels.

Beam vectors are plain 1-D complex numpy arrays stored with unit Euclidean
norm. Element ``i`` of an ``n1 x n2`` array sits at horizontal index
``i % n1`` and vertical index ``i // n1``.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    """Planar array with ``n1`` horizontal and ``n2`` vertical elements.

    ``phase_const`` is the phase progression (radians per unit sine) between
    neighbouring elements. ``pi`` corresponds to half-wavelength spacing and
    makes the grid codebook an orthonormal double-DFT basis.
    """

    n1: int
    n2: int
    phase_const: float = np.pi

    def __post_init__(self):
        if int(self.n1) != self.n1 or int(self.n2) != self.n2:
            raise ValueError("array dimensions must be integers")
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError(f"array dimensions must be >= 1, got {self.n1}x{self.n2}")
        if not self.phase_const > 0:
            raise ValueError("phase_const must be positive")

    @property
    def n_elements(self) -> int:
        return self.n1 * self.n2

    def element_indices(self):
        i = np.arange(self.n_elements)
        return i % self.n1, i // self.n1


@dataclass(frozen=True)
class Codebook:
    """Ordered set of unit-norm beams; ``vectors[b]`` is beam ``b``."""

    vectors: np.ndarray
    geometry: ArrayGeometry

    def __len__(self):
        return self.vectors.shape[0]

    def __getitem__(self, b):
        return self.vectors[b]

    def gram(self) -> np.ndarray:
        return self.vectors.conj() @ self.vectors.T


def steering_phases(geom: ArrayGeometry, sin_h, sin_v) -> np.ndarray:
    """Unit-modulus (un-normalized) response for direction sines.

    ``sin_h`` and ``sin_v`` may be arrays of equal shape; the element axis is
    appended last.
    """
    ih, iv = geom.element_indices()
    sin_h = np.asarray(sin_h, dtype=float)[..., None]
    sin_v = np.asarray(sin_v, dtype=float)[..., None]
    return np.exp(-1j * geom.phase_const * (ih * sin_h + iv * sin_v))


def upa_response(geom: ArrayGeometry, theta: float, phi: float) -> np.ndarray:
    """Unit-norm array response towards azimuth ``theta``, elevation ``phi``.

    Both angles are array-local and must lie in ``[-pi/2, pi/2]``.
    """
    half = np.pi / 2 + 1e-12
    if not (abs(theta) <= half and abs(phi) <= half):
        raise ValueError(f"angles must lie in [-pi/2, pi/2], got theta={theta}, phi={phi}")
    a = steering_phases(geom, np.sin(theta), np.sin(phi))
    return a / np.sqrt(geom.n_elements)


def grid_angles(n: int) -> np.ndarray:
    """Codebook grid ``asin(2k/n - 1)`` for ``k = 0..n-1``."""
    return np.arcsin(2.0 * np.arange(n) / n - 1.0)


def dft_codebook(geom: ArrayGeometry) -> Codebook:
    """Grid-of-beams codebook, row-major over (azimuth index, elevation index)."""
    thetas = grid_angles(geom.n1)
    phis = grid_angles(geom.n2)
    sin_h = np.repeat(np.sin(thetas), geom.n2)
    sin_v = np.tile(np.sin(phis), geom.n1)
    vectors = steering_phases(geom, sin_h, sin_v) / np.sqrt(geom.n_elements)
    return Codebook(vectors=vectors, geometry=geom)


def effective_channel(w, H, v) -> complex:
    """Scalar channel ``w^T H v`` seen between two beamformed ports.

    No conjugation is applied. The reverse link is obtained with
    ``effective_channel(v, H.T, w)`` and yields the same number bit for bit:
    the terms ``H[r, c] * (w[r] * v[c])`` are identical in both orientations
    and are summed with a correctly rounded (order-free) sum.
    """
    w = np.asarray(w)
    H = np.atleast_2d(np.asarray(H))
    v = np.asarray(v)
    if w.ndim != 1 or v.ndim != 1 or H.ndim != 2:
        raise ValueError("w and v must be vectors and H a matrix")
    if H.shape != (w.shape[0], v.shape[0]):
        raise ValueError(
            f"dimension mismatch: w has {w.shape[0]}, H is {H.shape}, v has {v.shape[0]}"
        )
    # real arithmetic keeps every product commutative (no fused multiply-add)
    w = w.astype(complex)
    v = v.astype(complex)
    H = H.astype(complex)
    p_re = np.multiply.outer(w.real, v.real) - np.multiply.outer(w.imag, v.imag)
    p_im = np.multiply.outer(w.real, v.imag) + np.multiply.outer(w.imag, v.real)
    t_re = H.real * p_re - H.imag * p_im
    t_im = H.real * p_im + H.imag * p_re
    return complex(math.fsum(t_re.ravel()), math.fsum(t_im.ravel()))
