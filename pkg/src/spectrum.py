"""
Polyharmonic Field Toolkit - Spectrum Module

Eigenvalues of the continuous and discrete Laplacians on the torus, the
cube-averaging factor ϑ, the real eigenbasis φ_z and the normalization
constants a_n and c_n. Products of eigenvalues are accumulated in log-space.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy.special import gammaln

from src.torus import TorusSpec, canonical_signs, frequency_grid


@dataclass(frozen=True)
class EigenData:
    """Spectral data attached to one frequency z ∈ Z^n_L."""

    z: tuple
    lambda_cont: float
    lambda_disc: float
    theta: float


def _as_freqs(z) -> np.ndarray:
    return np.atleast_1d(np.asarray(z, dtype=np.int64))


def _check_band(L: int, z: np.ndarray) -> None:
    if np.any(np.abs(z) > (L - 1) // 2):
        raise ValueError(
            f"Frequency outside Z^n_{L} (|z_k| <= {(L - 1) // 2}); fold it with alias_fold first"
        )


def lambda_cont(z) -> np.ndarray:
    """Continuum eigenvalue (2π|z|)^2; z may be a vector or an array of vectors."""
    z = _as_freqs(z)
    value = (2.0 * math.pi) ** 2 * np.sum(z.astype(float) ** 2, axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def lambda_disc(L: int, z) -> np.ndarray:
    """Discrete eigenvalue 4L^2 Σ_k sin^2(π z_k / L) for z ∈ Z^n_L."""
    z = _as_freqs(z)
    _check_band(L, z)
    value = 4.0 * L ** 2 * np.sum(np.sin(math.pi * z / L) ** 2, axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def theta(L: int, z, allow_out_of_band: bool = False) -> np.ndarray:
    """
    Cube-averaging factor ϑ_{L,z} = Π_k sinc(z_k / L).

    A zero coordinate contributes 1. With ``allow_out_of_band`` the product is
    evaluated for any z; it vanishes when some z_k is a nonzero multiple of L.
    """
    z = _as_freqs(z)
    if not allow_out_of_band:
        _check_band(L, z)
    value = np.prod(np.sinc(z / L), axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def eigenfunction(z, x) -> np.ndarray:
    """
    Real eigenfunction φ_z evaluated at x.

    φ_0 = 1, φ_z = √2 cos(2π z·x) on the plus side of the split and
    √2 sin(2π z·x) on the minus side.
    """
    z = _as_freqs(z)
    x = np.asarray(x, dtype=float)
    sign = int(canonical_signs(z[None, :])[0])
    phase = 2.0 * math.pi * (x @ z)
    if sign == 0:
        value = np.ones_like(phase)
    elif sign > 0:
        value = math.sqrt(2.0) * np.cos(phase)
    else:
        value = math.sqrt(2.0) * np.sin(phase)
    return float(value) if np.ndim(value) == 0 else value


def eigenfunctions(freqs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Matrix [φ_z(x)] with one row per point and one column per frequency."""
    freqs = np.asarray(freqs, dtype=np.int64)
    phase = 2.0 * math.pi * (np.asarray(points, dtype=float) @ freqs.T)
    signs = canonical_signs(freqs)
    return np.where(
        signs > 0,
        math.sqrt(2.0) * np.cos(phase),
        np.where(signs < 0, math.sqrt(2.0) * np.sin(phase), 1.0),
    )


def ground_constant(n: int) -> float:
    """a_n = 2 / (Γ(n/2) (4π)^{n/2}), through log-Γ."""
    if n < 1:
        raise ValueError(f"Dimension must be >= 1, got {n}")
    return math.exp(math.log(2.0) - gammaln(n / 2.0) - (n / 2.0) * math.log(4.0 * math.pi))


def _nonzero_band(spec: TorusSpec) -> np.ndarray:
    freqs = frequency_grid(spec.n, spec.L).reshape(-1, spec.n)
    return freqs[np.any(freqs != 0, axis=1)]


def log_partition_constant(spec: TorusSpec) -> float:
    """ln c_n = (N-1)/2 · ln(a_n / (2πN)) + (n/4) Σ_{z≠0} ln λ_{L,z}."""
    N = spec.N
    log_lambdas = np.log(lambda_disc(spec.L, _nonzero_band(spec)))
    return 0.5 * (N - 1) * (math.log(ground_constant(spec.n)) - math.log(2.0 * math.pi * N)) + (
        spec.n / 4.0
    ) * math.fsum(log_lambdas)


def laplacian_matrix(spec: TorusSpec) -> np.ndarray:
    """Dense matrix of −Δ_L (periodic nearest neighbours, scale L^2), row-major sites."""
    L = spec.L
    eye = np.eye(L)
    shift = np.roll(eye, 1, axis=1)
    one_dim = L ** 2 * (2.0 * eye - shift - shift.T)
    total = np.zeros((spec.N, spec.N))
    for k in range(spec.n):
        factors = [eye] * spec.n
        factors[k] = one_dim
        term = factors[0]
        for factor in factors[1:]:
            term = np.kron(term, factor)
        total += term
    return total


def normalization_identity_residual(spec: TorusSpec, eigenvalues: Optional[np.ndarray] = None) -> float:
    """
    |ln c_n − ln det T̊ + (N−1)/2 · ln(2πN)|.

    ln det T̊ is taken from the numerically computed spectrum of −Δ_L (zero
    mode dropped), independent of the closed-form eigenvalues in c_n.
    """
    if eigenvalues is None:
        eigenvalues = np.linalg.eigvalsh(laplacian_matrix(spec))
    nonzero = np.sort(eigenvalues)[1:]
    N = spec.N
    log_det = 0.5 * (N - 1) * math.log(ground_constant(spec.n)) + (spec.n / 4.0) * math.fsum(np.log(nonzero))
    return abs(log_partition_constant(spec) - log_det + 0.5 * (N - 1) * math.log(2.0 * math.pi * N))


def eigen_table(spec: TorusSpec) -> pd.DataFrame:
    """One row of EigenData per z ∈ Z^n_L, with the ratio λ_{L,z}/λ_z."""
    freqs = frequency_grid(spec.n, spec.L).reshape(-1, spec.n)
    table = pd.DataFrame(freqs, columns=[f"z_{k + 1}" for k in range(spec.n)])
    table["lambda_cont"] = lambda_cont(freqs)
    table["lambda_disc"] = lambda_disc(spec.L, freqs)
    table["theta"] = theta(spec.L, freqs)
    with np.errstate(divide="ignore", invalid="ignore"):
        table["ratio"] = np.where(table["lambda_cont"] > 0, table["lambda_disc"] / table["lambda_cont"], np.nan)
    return table


def eigen_data(spec: TorusSpec, z) -> EigenData:
    return EigenData(
        z=tuple(int(v) for v in z),
        lambda_cont=lambda_cont(z),
        lambda_disc=lambda_disc(spec.L, z),
        theta=theta(spec.L, z),
    )
