"""
Polyharmonic Field Toolkit - Torus Module

Index sets, lattice geometry and the flat metric on T^n = [0,1)^n.
Frequencies are integer tuples, lattice points are integer numerators
k in [0, L) standing for k/L.
"""

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np

FreqVector = Tuple[int, ...]
LatticePoint = Tuple[int, ...]

_MAX_SITES = int(np.iinfo(np.uint64).max)


class Sign(Enum):
    """Side of the split Z^n = Ẑ^n ∪ {0} ∪ (−Ẑ^n)."""

    PLUS = 1
    MINUS = -1
    ZERO = 0


@dataclass(frozen=True)
class TorusSpec:
    """Discrete torus T^n_L with odd side length L."""

    n: int
    L: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"Dimension n must be a positive integer, got {self.n}")
        if int(self.L) != self.L or self.L < 3 or self.L % 2 == 0:
            raise ValueError(f"Lattice side L must be odd and >= 3 (odd-L lattices only), got {self.L}")
        if self.L ** self.n > _MAX_SITES:
            raise ValueError(f"N = {self.L}^{self.n} overflows a 64-bit unsigned integer")

    @property
    def N(self) -> int:
        return self.L ** self.n

    @property
    def half(self) -> int:
        """Largest admissible |z_k|, (L-1)/2."""
        return (self.L - 1) // 2

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.L,) * self.n


def frequency_set(spec: TorusSpec) -> List[FreqVector]:
    """Z^n_L in row-major order, z_1 slowest."""
    axis = range(-spec.half, spec.half + 1)
    return [tuple(z) for z in itertools.product(axis, repeat=spec.n)]


def frequency_grid(n: int, K: int) -> np.ndarray:
    """
    Z^n_K as a dense (K, ..., K, n) integer array, centered.

    Entry [j_1, ..., j_n] holds z with z_k = j_k - (K-1)/2, so flattening the
    leading axes gives the same order as frequency_set.
    """
    half = (K - 1) // 2
    axes = np.meshgrid(*([np.arange(-half, half + 1)] * n), indexing="ij")
    return np.stack(axes, axis=-1).astype(np.int64)


def in_band(z, L: int) -> bool:
    """True if every |z_k| <= (L-1)/2."""
    return bool(np.all(np.abs(np.asarray(z)) <= (L - 1) // 2))


def torus_distance(x, y) -> np.ndarray:
    """
    Flat torus distance d(x, y).

    Inputs outside [0,1) are reduced mod 1. Accepts single points or arrays of
    points with the coordinate axis last; returns a float or an array.
    """
    diff = np.abs(np.mod(np.asarray(x, dtype=float), 1.0) - np.mod(np.asarray(y, dtype=float), 1.0))
    wrapped = np.minimum(diff, 1.0 - diff)
    dist = np.sqrt(np.sum(wrapped ** 2, axis=-1))
    return float(dist) if np.ndim(dist) == 0 else dist


def canonical_signs(freqs: np.ndarray) -> np.ndarray:
    """
    Vectorized canonical_sign over the last axis: +1, -1 or 0.

    The sign of z is the sign of its first nonzero coordinate.
    """
    freqs = np.asarray(freqs)
    nonzero = freqs != 0
    first = np.argmax(nonzero, axis=-1)
    lead = np.take_along_axis(freqs, first[..., None], axis=-1)[..., 0]
    return np.sign(lead).astype(np.int64)


def canonical_sign(z: FreqVector) -> Sign:
    return Sign(int(canonical_signs(np.asarray(z)[None, :])[0]))


def cube_index(x, spec: TorusSpec) -> LatticePoint:
    """
    The lattice point v with x in v + [-1/(2L), 1/(2L))^n, as numerators.

    Coordinates outside [0,1) are wrapped first.
    """
    x = np.mod(np.asarray(x, dtype=float), 1.0)
    k = np.floor(spec.L * x + 0.5).astype(np.int64) % spec.L
    return tuple(int(v) for v in np.atleast_1d(k))


def grid_cube_indices(M: int, L: int) -> np.ndarray:
    """
    cube_index of every fine-grid coordinate j/M, j = 0..M-1, in integers.

    floor(jL/M + 1/2) computed as floor((2jL + M) / (2M)).
    """
    j = np.arange(M, dtype=np.int64)
    return ((2 * j * L + M) // (2 * M)) % L


def lattice_points(M: int, n: int) -> np.ndarray:
    """All points of the M-grid as an (M^n, n) float array, row-major."""
    idx = np.indices((M,) * n).reshape(n, -1).T
    return idx / M
