"""
Polyharmonic Field Toolkit - Transform Module

Conversions between spectral coefficients in the real eigenbasis and values
on lattices: FFT and direct synthesis, analysis, zero-padded upsampling,
piecewise-constant projection, discrete pairings and alias folding.

Real-basis coefficients are packed into a Hermitian complex spectrum with
C[z] = (α_z + i α_{-z}) / √2 for z on the plus side of the split, C[-z] its
conjugate and C[0] = α_0; synthesis is the inverse DFT scaled by M^n.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, Optional, Tuple, Union

import numpy as np

from src.spectrum import eigenfunctions, theta
from src.torus import FreqVector, TorusSpec, canonical_signs, grid_cube_indices, lattice_points

SQRT2 = math.sqrt(2.0)


class OutOfBandError(ValueError):
    """Spectral support reaches outside Z^n_L."""


@dataclass
class SpectralFunction:
    """
    Finitely supported coefficients α_z in the real eigenbasis.

    ``freqs`` is a (k, n) integer array without duplicates and ``values`` the
    matching (k,) coefficients.
    """

    n: int
    freqs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=np.int64).reshape(-1, self.n)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(self.freqs) != len(self.values):
            raise ValueError("Frequencies and coefficients differ in length")
        if len(np.unique(self.freqs, axis=0)) != len(self.freqs):
            raise ValueError("Duplicate frequencies in spectral function")

    @classmethod
    def from_dict(cls, n: int, coeffs: Dict[FreqVector, float]) -> "SpectralFunction":
        freqs = [tuple(int(c) for c in np.atleast_1d(z)) for z in coeffs]
        for z in freqs:
            if len(z) != n:
                raise ValueError(f"Frequency {z} does not have dimension {n}")
        return cls(n, np.array(freqs, dtype=np.int64).reshape(-1, n), np.array(list(coeffs.values()), dtype=float))

    @classmethod
    def mode(cls, z: FreqVector, value: float = 1.0) -> "SpectralFunction":
        z = tuple(np.atleast_1d(z))
        return cls.from_dict(len(z), {z: value})

    @classmethod
    def from_dense(cls, dense: np.ndarray, drop_zeros: bool = True) -> "SpectralFunction":
        """From a centered real-basis array of shape (K,)*n."""
        n = dense.ndim
        K = dense.shape[0]
        half = (K - 1) // 2
        idx = np.indices(dense.shape).reshape(n, -1).T
        values = dense.reshape(-1)
        keep = values != 0.0 if drop_zeros else np.ones(len(values), dtype=bool)
        return cls(n, idx[keep] - half, values[keep])

    def __len__(self) -> int:
        return len(self.values)

    def items(self) -> Iterator[Tuple[FreqVector, float]]:
        for z, value in zip(self.freqs, self.values):
            yield tuple(int(c) for c in z), float(value)

    def as_dict(self) -> Dict[FreqVector, float]:
        return dict(self.items())

    def get(self, z, default: float = 0.0) -> float:
        match = np.all(self.freqs == np.asarray(z, dtype=np.int64), axis=1)
        return float(self.values[match][0]) if match.any() else default

    @property
    def radius(self) -> int:
        """max ‖z‖_∞ over the support (0 for an empty function)."""
        return int(np.abs(self.freqs).max()) if len(self) else 0

    def in_band(self, L: int) -> bool:
        return self.radius <= (L - 1) // 2

    def is_grounded(self) -> bool:
        return self.get((0,) * self.n) == 0.0

    def scaled(self, factors: np.ndarray) -> "SpectralFunction":
        return SpectralFunction(self.n, self.freqs.copy(), self.values * factors)

    def to_dense(self, K: int) -> np.ndarray:
        """Centered real-basis array of shape (K,)*n; support must fit in Z^n_K."""
        if not self.in_band(K):
            raise OutOfBandError(f"Support radius {self.radius} exceeds Z^n_{K}; use alias_fold")
        dense = np.zeros((K,) * self.n)
        half = (K - 1) // 2
        dense[tuple((self.freqs + half).T)] = self.values
        return dense

    def to_json(self) -> str:
        return json.dumps(
            {"n": self.n, "coefficients": [[list(z), value] for z, value in self.items()]}, sort_keys=True
        )

    @classmethod
    def from_json(cls, text: str) -> "SpectralFunction":
        data = json.loads(text)
        n = int(data["n"])
        return cls.from_dict(n, {tuple(z): float(value) for z, value in data["coefficients"]})

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SpectralFunction":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass
class GridFunction:
    """Values on the M-grid of T^n, an n-dimensional array of side M (last axis fastest)."""

    n: int
    M: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.M,) * self.n:
            self.values = self.values.reshape((self.M,) * self.n)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Grid values must be finite")

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def mean(self) -> float:
        return float(np.mean(self.values))


# --- packing between the real basis and the complex spectrum ---------------

def pack_complex(dense_real: np.ndarray, n: int) -> np.ndarray:
    """Real-basis centered coefficients (last n axes) to the complex spectrum C[z]."""
    K = dense_real.shape[-1]
    signs = canonical_signs(_centered_freqs(n, K))
    axes = tuple(range(-n, 0))
    mirrored = np.flip(dense_real, axis=axes)
    plus = (dense_real + 1j * mirrored) / SQRT2
    minus = (mirrored - 1j * dense_real) / SQRT2
    return np.where(signs > 0, plus, np.where(signs < 0, minus, dense_real + 0j))


def unpack_complex(dense_complex: np.ndarray, n: int) -> np.ndarray:
    """Inverse of pack_complex for Hermitian spectra."""
    K = dense_complex.shape[-1]
    signs = canonical_signs(_centered_freqs(n, K))
    return np.where(
        signs > 0,
        SQRT2 * dense_complex.real,
        np.where(signs < 0, -SQRT2 * dense_complex.imag, dense_complex.real),
    )


def _centered_freqs(n: int, K: int) -> np.ndarray:
    half = (K - 1) // 2
    return np.stack(np.meshgrid(*([np.arange(-half, half + 1)] * n), indexing="ij"), axis=-1)


def spectrum_to_grid(dense_complex: np.ndarray, n: int, M: int) -> np.ndarray:
    """
    Evaluate a centered Hermitian spectrum over Z^n_K on the M-grid (K <= M).

    Leading axes are batch axes. Uses the real inverse FFT of the half
    spectrum; scratch arrays are per call.
    """
    K = dense_complex.shape[-1]
    if K > M:
        raise OutOfBandError(f"Spectrum band {K} does not fit the {M}-grid")
    half = (K - 1) // 2
    batch = dense_complex.shape[:-n]
    full = np.zeros(batch + (M,) * n, dtype=complex)
    # place z at index z mod M, one axis at a time
    src = dense_complex
    positions = np.arange(-half, half + 1) % M
    index = np.ix_(*([positions] * n))
    full[(Ellipsis,) + index] = src
    half_spectrum = full[..., : M // 2 + 1]
    return np.fft.irfftn(half_spectrum, s=(M,) * n, axes=tuple(range(-n, 0))) * (M ** n)


def grid_to_spectrum(values: np.ndarray, n: int) -> np.ndarray:
    """Centered complex spectrum Ĝ[z] = M^{-n} Σ_v g(v) e^{-2πi z·v} over Z^n_M (last n axes)."""
    M = values.shape[-1]
    axes = tuple(range(-n, 0))
    spectrum = np.fft.fftn(values, axes=axes) / (M ** n)
    return np.fft.fftshift(spectrum, axes=axes)


# --- synthesis and analysis -------------------------------------------------

def _require_band(f: SpectralFunction, L: int, hint: str) -> None:
    if not f.in_band(L):
        raise OutOfBandError(
            f"Support radius {f.radius} lies outside Z^n_{L} (|z_k| <= {(L - 1) // 2}); apply {hint} first"
        )


def synthesize(f: SpectralFunction, spec: TorusSpec, method: str = "fft") -> GridFunction:
    """
    Lattice values v -> Σ_z α_z φ_z(v) on T^n_L.

    ``method`` is "fft" (Hermitian packing, real inverse FFT) or "direct"
    (explicit O(N·|support|) sum, used as the reference path).
    """
    if f.n != spec.n:
        raise ValueError(f"Function dimension {f.n} does not match torus dimension {spec.n}")
    _require_band(f, spec.L, "alias_fold")
    return _evaluate(f, spec.n, spec.L, method)


def _evaluate(f: SpectralFunction, n: int, M: int, method: str) -> GridFunction:
    if method == "direct":
        points = lattice_points(M, n)
        values = np.zeros(len(points))
        block = 256
        for start in range(0, len(f), block):
            basis = eigenfunctions(f.freqs[start:start + block], points)
            values += basis @ f.values[start:start + block]
        return GridFunction(n, M, values)
    if method != "fft":
        raise ValueError(f"Unknown synthesis method: {method}")
    K = 2 * f.radius + 1
    dense = pack_complex(f.to_dense(K), n)
    return GridFunction(n, M, spectrum_to_grid(dense, n, M))


def analyze(g: GridFunction, spec: Optional[TorusSpec] = None) -> SpectralFunction:
    """Coefficients ⟨g, φ_z⟩ on the lattice for every z ∈ Z^n_L."""
    if spec is not None and (g.M != spec.L or g.n != spec.n):
        raise ValueError(f"Grid of side {g.M} in dimension {g.n} does not match T^{spec.n}_{spec.L}")
    if g.M % 2 == 0:
        raise ValueError(f"Analysis needs an odd lattice side, got {g.M}")
    dense = unpack_complex(grid_to_spectrum(g.values, g.n), g.n)
    return SpectralFunction.from_dense(dense, drop_zeros=False)


def upsample_eval(f: SpectralFunction, L: int, M: int) -> GridFunction:
    """Values of the trigonometric polynomial f (support in Z^n_L) on the M-grid."""
    if M % 2 == 0 or M < L:
        raise ValueError(f"Upsampling grid must be odd and >= L={L}, got M={M}")
    _require_band(f, L, "alias_fold")
    return _evaluate(f, f.n, M, "fft")


def pwc_project(f: SpectralFunction, L: int) -> SpectralFunction:
    """
    Lattice values of q_L f for an in-band f, as coefficients: α_z -> ϑ_{L,z} α_z.

    Out-of-band inputs must go through pwc_project_grid.
    """
    _require_band(f, L, "pwc_project_grid on an upsampled grid")
    return f.scaled(theta(L, f.freqs) if len(f) else np.zeros(0))


def cube_average_factor(L: int, M: int, z) -> np.ndarray:
    """Exact multiplier of pwc_project_grid on φ_z: Π_k sin(π z_k/L) / (m sin(π z_k/M)), m = M/L."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    m = M // L
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.sin(math.pi * z / L) / (m * np.sin(math.pi * z / M))
    ratio = np.where(z == 0, 1.0, ratio)
    value = np.prod(ratio, axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def pwc_project_grid(g: GridFunction, L: int) -> GridFunction:
    """
    Cube averages of a fine-grid function: each lattice value is the mean of
    the (M/L)^n fine values whose cube_index is that lattice point.

    This is the midpoint rule for q_L; the exact ϑ formula applies only to
    in-band spectral inputs (pwc_project).
    """
    M, n = g.M, g.n
    if L % 2 == 0 or M % 2 == 0 or M % L != 0:
        raise ValueError(f"pwc_project_grid needs odd L dividing odd M, got L={L}, M={M}")
    m = M // L
    shifted = g.values
    for axis in range(n):
        shifted = np.roll(shifted, (m - 1) // 2, axis=axis)
    blocks = shifted.reshape(sum(((L, m) for _ in range(n)), ()))
    averaged = blocks.mean(axis=tuple(range(1, 2 * n, 2)))
    return GridFunction(n, L, averaged)


def pwc_extend(g: GridFunction, M: int) -> GridFunction:
    """Replicate lattice values over their cubes on the M-grid (L | M)."""
    L = g.M
    if M % L != 0 or M % 2 == 0:
        raise ValueError(f"Piecewise-constant extension needs odd M divisible by L={L}, got M={M}")
    idx = grid_cube_indices(M, L)
    return GridFunction(g.n, M, g.values[np.ix_(*([idx] * g.n))])


def restrict_to_lattice(g: GridFunction, L: int) -> GridFunction:
    """Values at the L-sublattice of an M-grid (L | M)."""
    if g.M % L != 0:
        raise ValueError(f"Lattice side {L} does not divide grid side {g.M}")
    step = g.M // L
    return GridFunction(g.n, L, g.values[(slice(None, None, step),) * g.n])


def pairing_discrete(f: GridFunction, g: GridFunction) -> float:
    """⟨f, g⟩ = M^{-n} Σ_v f(v) conj(g(v)) on a common lattice."""
    if f.M != g.M or f.n != g.n:
        raise ValueError(f"Cannot pair grids of side {f.M} and {g.M}")
    value = np.mean(f.values * np.conj(g.values))
    return complex(value) if np.iscomplexobj(value) and np.imag(value) != 0 else float(np.real(value))


def alias_fold(f: SpectralFunction, L: int) -> SpectralFunction:
    """
    The in-band function whose lattice restriction agrees with f on T^n_L.

    Each real mode is split into its two complex exponentials, every
    frequency is reduced to its representative of z mod L in Z^n_L, and the
    folded spectrum is converted back to the real basis.
    """
    n = f.n
    half = (L - 1) // 2
    folded = np.zeros((L,) * n, dtype=complex)
    signs = canonical_signs(f.freqs) if len(f) else np.zeros(0, dtype=np.int64)

    def accumulate(freqs: np.ndarray, amounts: np.ndarray) -> None:
        index = tuple(((freqs + half) % L).T)
        np.add.at(folded, index, amounts)

    values = f.values.astype(complex)
    plus, minus, zero = signs > 0, signs < 0, signs == 0
    accumulate(f.freqs[plus], values[plus] / SQRT2)
    accumulate(-f.freqs[plus], values[plus] / SQRT2)
    accumulate(f.freqs[minus], -1j * values[minus] / SQRT2)
    accumulate(-f.freqs[minus], 1j * values[minus] / SQRT2)
    accumulate(f.freqs[zero], values[zero])
    # (z + half) mod L indexes the centered representative of z mod L
    return SpectralFunction.from_dense(unpack_complex(folded, n))
