"""
Polyharmonic Field Toolkit - Fields Module

Deterministic Gaussian coefficient streams, field sampling through the
eigenbasis and white-noise routes, Fourier and piecewise-constant
extensions, exact pairing error variances and Monte Carlo covariance checks.

Every field is built from one family of standard normals ξ_z keyed by
(seed, z), so fields on different lattices share their noise.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtri

from src.config import SAMPLING_CONFIG, check_budget
from src.kernels import KernelKind, KernelTag, kernel_profile
from src.spectrum import ground_constant, lambda_cont, lambda_disc, theta
from src.torus import FreqVector, TorusSpec, frequency_grid, grid_cube_indices
from src.transform import (
    GridFunction,
    SpectralFunction,
    alias_fold,
    analyze,
    grid_to_spectrum,
    pack_complex,
    pwc_extend,
    spectrum_to_grid,
    unpack_complex,
    upsample_eval,
)

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")

FIELD_KINDS = ("standard", "reduced", "spectrally_reduced")
ROUTES = ("lattice", "fourier", "pwc")

# Covariance kernel matching each field kind on its lattice
KERNEL_FOR_KIND = {
    "standard": KernelTag.DISC,
    "reduced": KernelTag.REDUCED,
    "spectrally_reduced": KernelTag.SPECTRED,
}

_PCG_MULT = np.uint64(6364136223846793005)
_PCG_INC = np.uint64(1442695040888963407)
_RXS_MULT = np.uint64(12605985483714917081)


def normalize_kind(kind: str) -> str:
    key = kind.strip().lower().replace("-", "_")
    if key not in FIELD_KINDS:
        raise ValueError(f"Unknown field kind: {kind} (choose from {', '.join(FIELD_KINDS)})")
    return key


@dataclass(frozen=True)
class NoiseKey:
    """Key of one Gaussian stream: a 64-bit seed and a draw index."""

    seed: int
    draw_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError(f"Seed must fit in 64 unsigned bits, got {self.seed}")
        if self.draw_index < 0:
            raise ValueError(f"Draw index must be nonnegative, got {self.draw_index}")


@dataclass
class FieldSample:
    spec: TorusSpec
    coeffs: SpectralFunction
    grid: GridFunction
    kind: str
    seed: int


@dataclass
class WhiteNoise:
    """Lattice white noise Ξ with variance L^n per site."""

    spec: TorusSpec
    values: np.ndarray = field(repr=False)
    grounded: bool = False


@dataclass
class PairingVariance:
    total: float
    inband: float
    alias: float
    tail: float


@dataclass
class CovarianceEstimate:
    profile_estimate: GridFunction
    zscores: GridFunction
    num_seeds: int

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.zscores.values)))


# --- keyed counter-based Gaussian stream ------------------------------------

def _lcg(state: np.ndarray) -> np.ndarray:
    return state * _PCG_MULT + _PCG_INC


def _rxs_m_xs(state: np.ndarray) -> np.ndarray:
    word = ((state >> ((state >> np.uint64(59)) + np.uint64(5))) ^ state) * _RXS_MULT
    return (word >> np.uint64(43)) ^ word


def _zigzag(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    return np.where(values >= 0, 2 * values, -2 * values - 1).astype(np.uint64)


def keyed_uniforms(seeds: Sequence[int], keys: np.ndarray, draw_index: int) -> np.ndarray:
    """
    Uniforms in (0, 1) for every seed and integer key vector.

    Absorbs n, the zig-zag encoded coordinates and the draw index into a
    64-bit state one word at a time (LCG step followed by the RXS-M-XS
    output permutation). Returns an array of shape (len(seeds), len(keys)).
    """
    seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1, 1)
    keys = np.asarray(keys, dtype=np.int64)
    keys = keys.reshape(len(keys), -1)
    n = keys.shape[1]
    encoded = _zigzag(keys)
    with np.errstate(over="ignore"):
        state = _rxs_m_xs(_lcg(seeds + _PCG_INC))
        state = _rxs_m_xs(_lcg(state ^ np.uint64(n)))
        for k in range(n):
            state = _rxs_m_xs(_lcg(state ^ encoded[None, :, k]))
        state = _rxs_m_xs(_lcg(state ^ np.uint64(draw_index)))
        bits = _rxs_m_xs(_lcg(state))
    bits = np.broadcast_to(bits, (len(seeds), len(keys)))
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def gaussian_coefficients(seeds: Sequence[int], freqs: np.ndarray, draw_index: Optional[int] = None) -> np.ndarray:
    """Standard normals ξ_z for every seed (rows) and frequency (columns)."""
    draw_index = SAMPLING_CONFIG["spectral_draw"] if draw_index is None else draw_index
    return ndtri(keyed_uniforms(seeds, freqs, draw_index))


def gaussian_coefficient(seed: int, z: FreqVector, draw_index: Optional[int] = None) -> float:
    """The standard normal ξ_z of one seed; a pure function of (seed, z, draw_index)."""
    key = NoiseKey(int(seed), SAMPLING_CONFIG["spectral_draw"] if draw_index is None else draw_index)
    z = np.atleast_1d(np.asarray(z, dtype=np.int64))
    return float(gaussian_coefficients([key.seed], z[None, :], key.draw_index)[0, 0])


# --- coefficient weights -----------------------------------------------------

def field_weights(spec: TorusSpec, kind: str, freqs: np.ndarray) -> np.ndarray:
    """w(z) without the a_n^{-1/2} factor, for nonzero z ∈ Z^n_L."""
    kind = normalize_kind(kind)
    quarter = spec.n / 4.0
    if kind == "standard":
        return lambda_disc(spec.L, freqs) ** -quarter
    weights = lambda_cont(freqs) ** -quarter
    if kind == "reduced":
        weights = theta(spec.L, freqs) * weights
    return weights


def _nonzero_band(n: int, K: int) -> np.ndarray:
    freqs = frequency_grid(n, K).reshape(-1, n)
    return freqs[np.any(freqs != 0, axis=1)]


class FieldSampler:
    """
    Samples one field kind on T^n_L for arbitrary seeds.

    Seeds are processed in chunks of ``seed_chunk``; with ``workers`` > 1
    the chunks run on a thread pool and are reassembled in seed order.
    """

    def __init__(
        self,
        spec: TorusSpec,
        kind: str = "standard",
        draw_index: Optional[int] = None,
        seed_chunk: Optional[int] = None,
        workers: Optional[int] = None,
    ):
        self.spec = spec
        self.kind = normalize_kind(kind)
        self.draw_index = SAMPLING_CONFIG["spectral_draw"] if draw_index is None else draw_index
        self.seed_chunk = seed_chunk or SAMPLING_CONFIG["seed_chunk"]
        self.workers = workers or SAMPLING_CONFIG["workers"]
        self.freqs = _nonzero_band(spec.n, spec.L)
        self.weights = field_weights(spec, self.kind, self.freqs) / math.sqrt(ground_constant(spec.n))
        self._index = tuple((self.freqs + spec.half).T)

    def coefficients(self, seeds: Sequence[int]) -> np.ndarray:
        """Coefficients a_n^{-1/2} w(z) ξ_z, shape (len(seeds), N-1)."""
        return gaussian_coefficients(seeds, self.freqs, self.draw_index) * self.weights

    def dense(self, coefficients: np.ndarray) -> np.ndarray:
        """Place coefficient rows into centered real-basis arrays over Z^n_L."""
        dense = np.zeros((len(coefficients),) + self.spec.shape)
        dense[(slice(None),) + self._index] = coefficients
        return dense

    def grids(self, seeds: Sequence[int], M: Optional[int] = None) -> np.ndarray:
        """Field values on the M-grid (Fourier extension when M > L)."""
        M = self.spec.L if M is None else M
        if M % 2 == 0 or M < self.spec.L:
            raise ValueError(f"Evaluation grid must be odd and >= L={self.spec.L}, got M={M}")
        check_budget(48 * len(seeds) * M ** self.spec.n, f"{len(seeds)} fields on the {M}-grid")
        spectrum = pack_complex(self.dense(self.coefficients(seeds)), self.spec.n)
        return spectrum_to_grid(spectrum, self.spec.n, M)

    def chunks(self, seeds: Sequence[int]) -> List[Sequence[int]]:
        return [seeds[start:start + self.seed_chunk] for start in range(0, len(seeds), self.seed_chunk)]

    def map_chunks(self, seeds: Sequence[int], work: Callable[[Sequence[int]], object]) -> list:
        """Apply ``work`` to every seed chunk; results come back in seed order."""
        chunks = self.chunks(seeds)
        if self.workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(work, chunks))
        return [work(chunk) for chunk in chunks]

    def sample(self, seed: int) -> FieldSample:
        coefficients = self.coefficients([seed])[0]
        coeffs = SpectralFunction(self.spec.n, self.freqs.copy(), coefficients)
        grid = GridFunction(self.spec.n, self.spec.L, self.grids([seed])[0])
        return FieldSample(self.spec, coeffs, grid, self.kind, int(seed))


PROJECTED_KINDS = ("flat", "enhanced", "natural")


class ProjectedFieldSampler(FieldSampler):
    """
    Cube averages over T^n_L of a trigonometric field drawn from the common
    noise ξ_z on Z^n_K.

    ``flat`` averages the continuum truncation h^{(K)} (K defaults to the
    FLAT cutoff), ``natural`` the truncation at K = L and ``enhanced`` the
    field with coefficients ϑ_{L,z}^{-1} λ_{L,z}^{-n/4}. Averaging over a cube
    multiplies mode z by ϑ_{L,z}; the lattice values fold z mod L.
    """

    def __init__(
        self,
        spec: TorusSpec,
        kind: str = "flat",
        K: Optional[int] = None,
        draw_index: Optional[int] = None,
        seed_chunk: Optional[int] = None,
        workers: Optional[int] = None,
    ):
        key = kind.strip().lower()
        if key not in PROJECTED_KINDS:
            raise ValueError(f"Unknown projected field kind: {kind} (choose from {', '.join(PROJECTED_KINDS)})")
        if key == "flat":
            K = KernelKind(KernelTag.FLAT, K=K).flat_cutoff(spec.L)
            if K < spec.L:
                raise ValueError(f"Flat cutoff K={K} must be at least L={spec.L}")
        elif K not in (None, spec.L):
            raise ValueError(f"{key} fields are truncated at K = L = {spec.L}, got K={K}")
        else:
            K = spec.L
        self.spec = spec
        self.kind = key
        self.K = K
        self.draw_index = SAMPLING_CONFIG["spectral_draw"] if draw_index is None else draw_index
        self.seed_chunk = seed_chunk or SAMPLING_CONFIG["seed_chunk"]
        self.workers = workers or SAMPLING_CONFIG["workers"]
        self.freqs = _nonzero_band(spec.n, K)
        quarter = spec.n / 4.0
        if key == "enhanced":
            source = lambda_disc(spec.L, self.freqs) ** -quarter / theta(spec.L, self.freqs)
        else:
            source = lambda_cont(self.freqs) ** -quarter
        self.weights = source / math.sqrt(ground_constant(spec.n))
        self._index = tuple((self.freqs + (K - 1) // 2).T)
        self._averaging = theta(spec.L, frequency_grid(spec.n, K), allow_out_of_band=True)
        # one-hot map from Z_K to the representative of z mod L in Z_L, per axis
        positions = (np.arange(K) - (K - 1) // 2 + spec.half) % spec.L
        self._fold = np.zeros((K, spec.L))
        self._fold[np.arange(K), positions] = 1.0

    def dense(self, coefficients: np.ndarray) -> np.ndarray:
        dense = np.zeros((len(coefficients),) + (self.K,) * self.spec.n)
        dense[(slice(None),) + self._index] = coefficients
        return dense

    def grids(self, seeds: Sequence[int], M: Optional[int] = None) -> np.ndarray:
        """Cube values on the lattice, replicated over the cubes of the M-grid when L | M."""
        n, L = self.spec.n, self.spec.L
        M = L if M is None else M
        if M % 2 == 0 or M % L != 0:
            raise ValueError(f"Projected fields need an odd grid divisible by L={L}, got M={M}")
        check_budget(48 * len(seeds) * (self.K ** n + M ** n), f"{len(seeds)} {self.kind} fields from Z^{n}_{self.K}")
        spectrum = pack_complex(self.dense(self.coefficients(seeds)), n) * self._averaging
        for axis in range(1, n + 1):
            spectrum = np.moveaxis(np.tensordot(spectrum, self._fold, axes=([axis], [0])), -1, axis)
        lattice = spectrum_to_grid(spectrum, n, L)
        if M == L:
            return lattice
        idx = grid_cube_indices(M, L)
        return lattice[(slice(None),) + np.ix_(*([idx] * n))]


def get_sampler(spec: TorusSpec, kind: str = "standard", **kwargs) -> FieldSampler:
    if kind.strip().lower() in PROJECTED_KINDS:
        return ProjectedFieldSampler(spec, kind, **kwargs)
    return FieldSampler(spec, kind, **kwargs)


def sample_field(spec: TorusSpec, seed: int, kind: str = "standard") -> FieldSample:
    """
    One field on T^n_L with coefficients a_n^{-1/2} w(z) ξ_z.

    w = λ_{L,z}^{-n/4} (standard), λ_z^{-n/4} (spectrally_reduced) or
    ϑ_{L,z} λ_z^{-n/4} (reduced). The zero mode is absent, so the field is
    grounded.
    """
    return get_sampler(spec, kind).sample(seed)


def sample_batch(
    spec: TorusSpec, seeds: Sequence[int], kind: str = "standard", M: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Coefficient rows and grids for many seeds; row s matches sample_field(spec, seeds[s], kind)."""
    sampler = get_sampler(spec, kind)
    seeds = list(seeds)
    return sampler.coefficients(seeds), sampler.grids(seeds, M)


# --- white-noise route -------------------------------------------------------

def white_noise_values(spec: TorusSpec, seeds: Sequence[int]) -> np.ndarray:
    sites = np.indices(spec.shape).reshape(spec.n, -1).T
    xi = ndtri(keyed_uniforms(seeds, sites, SAMPLING_CONFIG["white_noise_draw"]))
    return math.sqrt(spec.N) * xi.reshape((len(seeds),) + spec.shape)


def draw_white_noise(spec: TorusSpec, seed: int, grounded: bool = True) -> WhiteNoise:
    """
    Iid N(0, L^n) values keyed by lattice site; grounding subtracts the mean.

    White noise is keyed by site numerators, so it is not coupled across L.
    """
    values = white_noise_values(spec, [seed])[0]
    if grounded:
        values = values - values.mean()
    return WhiteNoise(spec, values, grounded)


def _green_quarter_power(spec: TorusSpec) -> np.ndarray:
    """a_n^{-1/2} λ_{L,z}^{-n/4} over Z^n_L, zero at z = 0, centered."""
    freqs = frequency_grid(spec.n, spec.L)
    nonzero = np.any(freqs != 0, axis=-1)
    weights = np.zeros(spec.shape)
    weights[nonzero] = lambda_disc(spec.L, freqs[nonzero]) ** (-spec.n / 4.0)
    return weights / math.sqrt(ground_constant(spec.n))


def white_noise_grids(spec: TorusSpec, seeds: Sequence[int]) -> np.ndarray:
    """a_n^{-1/2} G̊_L^{n/4} Ξ̊ for many seeds, applied in the Fourier domain."""
    check_budget(48 * len(seeds) * spec.N, f"{len(seeds)} white-noise fields")
    values = white_noise_values(spec, seeds)
    axes = tuple(range(1, spec.n + 1))
    values = values - values.mean(axis=axes, keepdims=True)
    spectrum = grid_to_spectrum(values, spec.n) * _green_quarter_power(spec)
    return spectrum_to_grid(spectrum, spec.n, spec.L)


def sample_field_white_noise(spec: TorusSpec, seed: int) -> FieldSample:
    """
    h_L = a_n^{-1/2} G̊_L^{n/4} Ξ̊: ground the white noise, scale its lattice
    coefficients by λ_{L,z}^{-n/4}, synthesize. Same law as sample_field(standard).
    """
    noise = draw_white_noise(spec, seed, grounded=True)
    coefficients = analyze(GridFunction(spec.n, spec.L, noise.values), spec)
    nonzero = np.any(coefficients.freqs != 0, axis=1)
    freqs = coefficients.freqs[nonzero]
    values = coefficients.values[nonzero] * field_weights(spec, "standard", freqs)
    coeffs = SpectralFunction(spec.n, freqs, values / math.sqrt(ground_constant(spec.n)))
    dense = pack_complex(coeffs.to_dense(spec.L), spec.n)
    grid = GridFunction(spec.n, spec.L, spectrum_to_grid(dense, spec.n, spec.L))
    return FieldSample(spec, coeffs, grid, "standard", int(seed))


# --- extensions --------------------------------------------------------------

def extend_field(sample: FieldSample, mode: str, M: int) -> GridFunction:
    """
    ``fourier``: the trigonometric polynomial through the lattice values
    (h_{L,♯}) on the M-grid. ``pwc``: lattice values replicated over their
    cubes (h_{L,♭}).
    """
    if mode == "fourier":
        return upsample_eval(sample.coeffs, sample.spec.L, M)
    if mode == "pwc":
        return pwc_extend(sample.grid, M)
    raise ValueError(f"Unknown extension mode: {mode} (choose fourier or pwc)")


# --- exact convergence series ------------------------------------------------

def _split_band(f: SpectralFunction, L: int) -> Tuple[np.ndarray, SpectralFunction]:
    half = (L - 1) // 2
    inside = np.all(np.abs(f.freqs) <= half, axis=1)
    dense = np.zeros((L,) * f.n)
    dense[tuple((f.freqs[inside] + half).T)] = f.values[inside]
    outside = SpectralFunction(f.n, f.freqs[~inside], f.values[~inside])
    return dense, outside


def pairing_error_variance(
    f: SpectralFunction,
    spec: TorusSpec,
    K_tail: Optional[int] = None,
    kind: str = "standard",
    route: str = "lattice",
) -> PairingVariance:
    """
    E|⟨h, f⟩ − ⟨h_L, f⟩|^2 as an exact series, without sampling.

    ``route`` picks the discrete pairing: ``lattice`` is ⟨h_L, f⟩ on T^n_L,
    ``fourier`` is ⟨h_{L,♯}, f⟩ on T^n and ``pwc`` is ⟨h_{L,♭}, f⟩ on T^n,
    which equals ⟨h_L, q_L f⟩ on the lattice. The lattice side of f is its
    alias fold, so out-of-band modes feed both the alias and tail terms.
    """
    if f.n != spec.n:
        raise ValueError(f"Function dimension {f.n} does not match torus dimension {spec.n}")
    if route not in ROUTES:
        raise ValueError(f"Unknown pairing route: {route} (choose from {', '.join(ROUTES)})")
    if K_tail is not None and not f.in_band(K_tail):
        raise ValueError(f"Support radius {f.radius} exceeds the tail cutoff Z^n_{K_tail}")
    if not f.is_grounded():
        raise ValueError("Test function must be grounded (no z = 0 coefficient)")

    n, L = spec.n, spec.L
    a_n = ground_constant(n)
    freqs = frequency_grid(n, L)
    nonzero = np.any(freqs != 0, axis=-1)
    band_freqs = freqs[nonzero]

    alpha, outside = _split_band(f, L)
    continuum = lambda_cont(band_freqs) ** (-n / 4.0)
    weights = field_weights(spec, kind, band_freqs)

    if route == "fourier":
        discrete = weights * alpha[nonzero]
    else:
        source = f
        if route == "pwc" and len(f):
            source = f.scaled(theta(L, f.freqs, allow_out_of_band=True))
        beta = alias_fold(source, L)
        folded, _ = _split_band(beta, L)
        discrete = weights * folded[nonzero]

    tail = math.fsum(lambda_cont(outside.freqs) ** (-n / 2.0) * outside.values ** 2) / a_n if len(outside) else 0.0
    inband = math.fsum(((continuum - weights) * alpha[nonzero]) ** 2) / a_n
    total = math.fsum((continuum * alpha[nonzero] - discrete) ** 2) / a_n + tail
    return PairingVariance(total=total, inband=inband, alias=total - inband - tail, tail=tail)


def expected_sobolev_gap(spec: TorusSpec, kind: str, s: float, K: int, route: str = "fourier") -> float:
    """
    E‖ext(h_L) − h‖^2 in H^{-s}, truncated to z ∈ Z^n_K.

    The norm is Σ_{z≠0} λ_z^{-s} g_z^2 over real-basis coefficients.
    ``fourier`` measures h_{L,♯}. ``pwc`` measures h_{L,♭}, whose coefficient
    at y is ϑ_{L,y} times the lattice coefficient at y mod L, so every
    out-of-band y also carries an aliased image of the lattice field.
    """
    if K < spec.L or K % 2 == 0:
        raise ValueError(f"Cutoff K must be odd and >= L={spec.L}, got {K}")
    if route not in ("fourier", "pwc"):
        raise ValueError(f"Unknown extension route: {route} (choose fourier or pwc)")
    n = spec.n
    a_n = ground_constant(n)
    freqs = _nonzero_band(n, K)
    lam = lambda_cont(freqs)
    inside = np.all(np.abs(freqs) <= spec.half, axis=1)
    if route == "fourier":
        extension = np.zeros(len(freqs))
        extension[inside] = field_weights(spec, kind, freqs[inside])
    else:
        folded = (freqs + spec.half) % spec.L - spec.half
        grounded = np.any(folded != 0, axis=1)
        lattice_weights = np.zeros(len(freqs))
        lattice_weights[grounded] = field_weights(spec, kind, folded[grounded])
        extension = theta(spec.L, freqs, allow_out_of_band=True) * lattice_weights
    gap = extension ** 2 + lam ** (-n / 2.0)
    gap[inside] = (lam[inside] ** (-n / 4.0) - extension[inside]) ** 2
    return math.fsum(lam ** -s * gap) / a_n


def sobolev_distance(sample: FieldSample, s: float, K: int, route: str = "fourier") -> float:
    """
    Pathwise truncated H^{-s} distance between an extension of the sample
    and the common-noise continuum truncation h^{(K)}.

    ``fourier`` compares h_{L,♯}; ``pwc`` compares h_{L,♭}, whose coefficient
    at y is ϑ_{L,y} times the lattice coefficient at y mod L.
    """
    spec = sample.spec
    if K < spec.L or K % 2 == 0:
        raise ValueError(f"Cutoff K must be odd and >= L={spec.L}, got {K}")
    n = spec.n
    freqs = frequency_grid(n, K)
    half = (K - 1) // 2

    if route == "fourier":
        extension = SpectralFunction(n, sample.coeffs.freqs, sample.coeffs.values)
        ext_dense = np.zeros((K,) * n)
        ext_dense[tuple((extension.freqs + half).T)] = extension.values
    elif route == "pwc":
        lattice = grid_to_spectrum(sample.grid.values, n)
        folded = lattice[tuple(np.moveaxis((freqs + spec.half) % spec.L, -1, 0))]
        ext_dense = unpack_complex(theta(spec.L, freqs, allow_out_of_band=True) * folded, n)
    else:
        raise ValueError(f"Unknown extension route: {route} (choose fourier or pwc)")

    nonzero = np.any(freqs != 0, axis=-1)
    band = freqs[nonzero]
    lam = lambda_cont(band)
    reference = gaussian_coefficients([sample.seed], band)[0] * lam ** (-n / 4.0) / math.sqrt(ground_constant(n))
    diff = ext_dense[nonzero] - reference
    return math.sqrt(math.fsum(lam ** -s * diff ** 2))


# --- Monte Carlo covariance ----------------------------------------------------

def _autocorrelation(grids: np.ndarray, n: int) -> np.ndarray:
    """Per-seed translation average N^{-1} Σ_v h(v) h(v+u), summed over seeds."""
    axes = tuple(range(1, n + 1))
    spectrum = np.fft.fftn(grids, axes=axes)
    N = np.prod(grids.shape[1:])
    return np.fft.ifftn(np.abs(spectrum) ** 2, axes=axes).real.sum(axis=0) / N


def empirical_covariance(
    spec: TorusSpec,
    kind: str = "standard",
    num_seeds: int = 20000,
    seed0: int = 0,
    route: str = "spectral",
    workers: Optional[int] = None,
) -> CovarianceEstimate:
    """
    Translation-averaged covariance estimate and z-scores against κ.

    For a stationary Gaussian field the per-seed estimator at lag u has
    variance (R(0) + R(2u)) / N, R being the circular autocorrelation of κ.
    """
    if num_seeds < SAMPLING_CONFIG["min_covariance_seeds"]:
        raise ValueError(f"Need at least {SAMPLING_CONFIG['min_covariance_seeds']} seeds, got {num_seeds}")
    kind = normalize_kind(kind)
    if route == "white_noise" and kind != "standard":
        raise ValueError("The white-noise route samples the standard field only")
    sampler = get_sampler(spec, kind, workers=workers)
    seeds = list(range(seed0, seed0 + num_seeds))

    if route == "spectral":
        work = lambda chunk: _autocorrelation(sampler.grids(chunk), spec.n)
    elif route == "white_noise":
        work = lambda chunk: _autocorrelation(white_noise_grids(spec, chunk), spec.n)
    else:
        raise ValueError(f"Unknown sampling route: {route} (choose spectral or white_noise)")

    total = np.zeros(spec.shape)
    for partial in sampler.map_chunks(seeds, work):
        total += partial
    estimate = total / num_seeds

    kappa = kernel_profile(KernelKind(KERNEL_FOR_KIND[kind]), spec).values
    R = np.fft.ifftn(np.abs(np.fft.fftn(kappa)) ** 2).real
    doubled = tuple(np.meshgrid(*([(2 * np.arange(spec.L)) % spec.L] * spec.n), indexing="ij"))
    variance = (R.reshape(-1)[0] + R[doubled]) / spec.N
    zscores = (estimate - kappa) / np.sqrt(variance / num_seeds)
    logging.info(f"Covariance check {kind}/{route} on T^{spec.n}_{spec.L}: max |z| = {np.max(np.abs(zscores)):.3f}")
    return CovarianceEstimate(
        GridFunction(spec.n, spec.L, estimate), GridFunction(spec.n, spec.L, zscores), num_seeds
    )


def coefficient_coupling(seed: int, z: FreqVector, Ls: Iterable[int], kind: str = "standard") -> List[float]:
    """Coefficient of the field at z for each L, sharing ξ_z."""
    z = np.atleast_1d(np.asarray(z, dtype=np.int64))
    xi = gaussian_coefficient(seed, tuple(z))
    values = []
    for L in Ls:
        spec = TorusSpec(len(z), L)
        weight = field_weights(spec, kind, z[None, :])[0]
        values.append(xi * weight / math.sqrt(ground_constant(spec.n)))
    return values
