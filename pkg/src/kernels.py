"""
Polyharmonic Field Toolkit - Kernels Module

Translation-invariant covariance profiles κ(u) = k(x, x+u) for every kernel
variant: discrete, semi-discrete, spectrally reduced, reduced, the ϑ^{-2}
enhanced kernel and its projections, the flat kernel, continuum truncations
and powers of the discrete Green operator. Each variant is a cosine
coefficient law c_z over a frequency band; profiles, diagonals, second
moments and the bound tables are all computed from it.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.config import KERNEL_CONFIG, check_budget
from src.spectrum import ground_constant, lambda_cont, lambda_disc, theta
from src.torus import TorusSpec, frequency_grid, grid_cube_indices, lattice_points, torus_distance
from src.transform import GridFunction, cube_average_factor, pwc_project_grid, spectrum_to_grid

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")


class KernelTag(Enum):
    DISC = "disc"
    SEMIDISC = "semidisc"
    SPECTRED = "spectred"
    REDUCED = "reduced"
    PLUS = "plus"
    ENHANCED = "enhanced"
    NATURAL = "natural"
    FLAT = "flat"
    CONT_TRUNC = "cont-trunc"
    GREEN_POWER = "green-power"


# Kinds whose profile lives on the lattice itself (M = L)
LATTICE_TAGS = {KernelTag.DISC, KernelTag.SPECTRED, KernelTag.REDUCED, KernelTag.GREEN_POWER}
# Trigonometric polynomials, evaluated on any finer odd grid
FOURIER_TAGS = {KernelTag.SEMIDISC, KernelTag.PLUS, KernelTag.CONT_TRUNC}
# Piecewise constant over the cubes of T^n_L
CUBE_TAGS = {KernelTag.ENHANCED, KernelTag.NATURAL, KernelTag.FLAT}


@dataclass(frozen=True)
class KernelKind:
    """A kernel variant with its optional cutoff K or exponent s."""

    tag: KernelTag
    K: Optional[int] = None
    s: Optional[float] = None

    def __post_init__(self):
        if self.K is not None and (self.K < 1 or self.K % 2 == 0):
            raise ValueError(f"Cutoff K must be a positive odd integer, got {self.K}")
        if self.s is not None and self.s <= 0:
            raise ValueError(f"Exponent s must be positive, got {self.s}")
        if self.tag is KernelTag.CONT_TRUNC and self.K is None:
            raise ValueError("CONT_TRUNC needs a cutoff K")
        if self.tag is KernelTag.GREEN_POWER and self.s is None:
            raise ValueError("GREEN_POWER needs an exponent s")

    @classmethod
    def parse(cls, name: str, K: Optional[int] = None, s: Optional[float] = None) -> "KernelKind":
        """Build a kind from its CLI name, e.g. ``disc`` or ``cont-trunc``."""
        key = name.strip().lower().replace("_", "-")
        try:
            tag = KernelTag(key)
        except ValueError:
            choices = ", ".join(t.value for t in KernelTag)
            raise ValueError(f"Unknown kernel kind: {name} (choose from {choices})") from None
        if tag not in (KernelTag.CONT_TRUNC, KernelTag.FLAT):
            K = None
        if tag is not KernelTag.GREEN_POWER:
            s = None
        return cls(tag, K, s)

    def flat_cutoff(self, L: int) -> int:
        return self.K if self.K is not None else KERNEL_CONFIG["flat_cutoff_factor"] * L

    def describe(self) -> str:
        laws = {
            KernelTag.DISC: "(1/a_n) lambda_{L,z}^{-n/2}, z in Z^n_L",
            KernelTag.SEMIDISC: "(1/a_n) lambda_{L,z}^{-n/2}, z in Z^n_L, on the M-grid",
            KernelTag.SPECTRED: "(1/a_n) lambda_z^{-n/2}, z in Z^n_L",
            KernelTag.REDUCED: "(1/a_n) theta_{L,z}^2 lambda_z^{-n/2}, z in Z^n_L",
            KernelTag.PLUS: "(1/a_n) theta_{L,z}^{-2} lambda_{L,z}^{-n/2}, z in Z^n_L",
            KernelTag.ENHANCED: "cube average in both arguments of PLUS",
            KernelTag.NATURAL: "cube average in both arguments of SPECTRED",
            KernelTag.FLAT: "(1/a_n) sum over z = w mod L, 0 < |z|_inf < K/2 of theta_{L,z}^2 lambda_z^{-n/2}",
            KernelTag.CONT_TRUNC: "(1/a_n) lambda_z^{-n/2}, z in Z^n_K",
            KernelTag.GREEN_POWER: "lambda_{L,z}^{-s}, z in Z^n_L",
        }
        return laws[self.tag]


@dataclass
class KernelCoefficients:
    """Cosine coefficients: κ(u) = Σ_z coeffs[z] cos(2π z·u) over the band Z^n_band."""

    kind: KernelKind
    band: int
    dense: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.dense.ndim

    @property
    def diag(self) -> float:
        return math.fsum(self.dense.reshape(-1))

    def frequencies(self) -> np.ndarray:
        return frequency_grid(self.n, self.band).reshape(-1, self.n)

    def values(self) -> np.ndarray:
        return self.dense.reshape(-1)


@dataclass
class KernelProfile:
    """κ on the M-grid together with its constant diagonal."""

    kind: KernelKind
    spec: TorusSpec
    M: int
    profile: GridFunction
    diag: float

    @property
    def values(self) -> np.ndarray:
        return self.profile.values

    def on_lattice(self) -> np.ndarray:
        """κ at the points of T^n_L (L | M)."""
        if self.M % self.spec.L != 0:
            raise ValueError(f"Lattice side {self.spec.L} does not divide grid side {self.M}")
        step = self.M // self.spec.L
        return self.values[(slice(None, None, step),) * self.spec.n]


def _nonzero(freqs: np.ndarray) -> np.ndarray:
    return np.any(freqs != 0, axis=-1)


def _band_law(n: int, band: int, weight) -> np.ndarray:
    """Dense (band,)*n array of weight(freqs) with the zero mode removed."""
    freqs = frequency_grid(n, band)
    dense = np.zeros(freqs.shape[:-1])
    mask = _nonzero(freqs)
    dense[mask] = weight(freqs[mask])
    return dense


def _flat_coefficients(spec: TorusSpec, K: int) -> np.ndarray:
    if K < spec.L:
        raise ValueError(f"FLAT cutoff K={K} must be at least L={spec.L}")
    n, L = spec.n, spec.L
    a_n = ground_constant(n)
    check_budget(8 * (n + 2) * K ** n, f"FLAT alias sum over Z^{n}_{K}")
    freqs = frequency_grid(n, K).reshape(-1, n)
    freqs = freqs[_nonzero(freqs)]
    weights = theta(L, freqs, allow_out_of_band=True) ** 2 * lambda_cont(freqs) ** (-n / 2.0) / a_n
    folded = np.zeros((L,) * n)
    np.add.at(folded, tuple(((freqs + spec.half) % L).T), weights)
    return folded


def kernel_coefficients(kind: KernelKind, spec: TorusSpec) -> KernelCoefficients:
    """
    Cosine coefficient law of a kernel variant.

    Cube-constant kinds (ENHANCED, NATURAL, FLAT) return their coefficients
    as lattice functions on Z^n_L: the cube average in both arguments
    multiplies an in-band coefficient by ϑ_{L,z}^2.
    """
    n, L = spec.n, spec.L
    a_n = ground_constant(n)
    tag = kind.tag

    def discrete(z):
        return lambda_disc(L, z) ** (-n / 2.0) / a_n

    def continuum(z):
        return lambda_cont(z) ** (-n / 2.0) / a_n

    if tag in (KernelTag.DISC, KernelTag.SEMIDISC):
        return KernelCoefficients(kind, L, _band_law(n, L, discrete))
    if tag is KernelTag.SPECTRED:
        return KernelCoefficients(kind, L, _band_law(n, L, continuum))
    if tag is KernelTag.REDUCED:
        return KernelCoefficients(kind, L, _band_law(n, L, lambda z: theta(L, z) ** 2 * continuum(z)))
    if tag is KernelTag.PLUS:
        return KernelCoefficients(kind, L, _band_law(n, L, lambda z: theta(L, z) ** -2 * discrete(z)))
    if tag is KernelTag.ENHANCED:
        plus = kernel_coefficients(KernelKind(KernelTag.PLUS), spec).dense
        return KernelCoefficients(kind, L, plus * _band_law(n, L, lambda z: theta(L, z) ** 2))
    if tag is KernelTag.NATURAL:
        spectred = kernel_coefficients(KernelKind(KernelTag.SPECTRED), spec).dense
        return KernelCoefficients(kind, L, spectred * _band_law(n, L, lambda z: theta(L, z) ** 2))
    if tag is KernelTag.FLAT:
        return KernelCoefficients(kind, L, _flat_coefficients(spec, kind.flat_cutoff(L)))
    if tag is KernelTag.CONT_TRUNC:
        check_budget(8 * (n + 2) * kind.K ** n, f"continuum truncation over Z^{n}_{kind.K}")
        return KernelCoefficients(kind, kind.K, _band_law(n, kind.K, continuum))
    if tag is KernelTag.GREEN_POWER:
        return KernelCoefficients(kind, L, _band_law(n, L, lambda z: lambda_disc(L, z) ** (-kind.s)))
    raise ValueError(f"Unsupported kernel kind: {kind}")


def _check_grid(kind: KernelKind, spec: TorusSpec, M: int) -> None:
    if M < 1 or M % 2 == 0:
        raise ValueError(f"Evaluation grid M must be odd, got {M}")
    tag = kind.tag
    if tag in LATTICE_TAGS and M != spec.L:
        raise ValueError(f"{tag.name} lives on the lattice and requires M = L = {spec.L}, got M={M}")
    if tag in CUBE_TAGS and M % spec.L != 0:
        raise ValueError(f"{tag.name} requires M = L or L | M, got L={spec.L}, M={M}")
    if tag is KernelTag.CONT_TRUNC and M < kind.K:
        raise ValueError(f"CONT_TRUNC(K={kind.K}) needs M >= K, got M={M}")
    if tag in FOURIER_TAGS and M < spec.L:
        raise ValueError(f"{tag.name} needs M >= L={spec.L}, got M={M}")


def default_grid(kind: KernelKind, spec: TorusSpec) -> int:
    return kind.K if kind.tag is KernelTag.CONT_TRUNC else spec.L


def kernel_profile(kind: KernelKind, spec: TorusSpec, M: Optional[int] = None) -> KernelProfile:
    """
    Evaluate κ(u) = Σ_z c_z cos(2π z·u) on the M-grid.

    Cube-constant kinds are evaluated on the lattice and replicated over the
    cubes of finer grids, κ_M(u) = κ_L(cube_index(u)).
    """
    M = default_grid(kind, spec) if M is None else M
    _check_grid(kind, spec, M)
    n = spec.n
    check_budget(16 * M ** n * 2, f"{kind.tag.name} profile on the {M}-grid")
    coefficients = kernel_coefficients(kind, spec)
    if kind.tag is KernelTag.FLAT:
        K = kind.flat_cutoff(spec.L)
        logging.info(f"FLAT truncated at K={K}, tail bound {flat_tail_bound(n, spec.L, K):.3e}")

    if kind.tag in CUBE_TAGS:
        lattice = spectrum_to_grid(coefficients.dense + 0j, n, spec.L)
        idx = grid_cube_indices(M, spec.L)
        values = lattice[np.ix_(*([idx] * n))]
    else:
        values = spectrum_to_grid(coefficients.dense + 0j, n, M)
    return KernelProfile(kind, spec, M, GridFunction(n, M, values), coefficients.diag)


def kernel_diag(kind: KernelKind, spec: TorusSpec) -> float:
    """Constant diagonal value k(x, x) = Σ_z c_z."""
    return kernel_coefficients(kind, spec).diag


# Trigonometric kernel whose cube average in both arguments is the cube kind
_CUBE_SOURCES = {
    KernelTag.ENHANCED: lambda spec: KernelKind(KernelTag.PLUS),
    KernelTag.NATURAL: lambda spec: KernelKind(KernelTag.CONT_TRUNC, K=spec.L),
}


def _cube_source(kind: KernelKind, spec: TorusSpec, M: int) -> KernelKind:
    if kind.tag not in _CUBE_SOURCES:
        raise ValueError(f"Cube projection is defined for ENHANCED and NATURAL, got {kind.tag.name}")
    if M % 2 == 0 or M % spec.L != 0:
        raise ValueError(f"Cube projection needs an odd grid M divisible by L={spec.L}, got M={M}")
    return _CUBE_SOURCES[kind.tag](spec)


def cube_projected_profile(kind: KernelKind, spec: TorusSpec, M: int) -> np.ndarray:
    """
    ENHANCED or NATURAL on the lattice, computed on the M-grid instead of
    from the coefficient law.

    The underlying trigonometric kernel (PLUS, or the continuum truncation
    at K = L) is evaluated on the M-grid, box-filtered over one cube in the
    second argument and then averaged over the cubes of the first argument
    with pwc_project_grid. Both averages are midpoint rules, so the result
    approaches kernel_profile(kind) as M grows.
    """
    source = _cube_source(kind, spec, M)
    n = spec.n
    check_budget(16 * M ** n * 3, f"cube projection of {kind.tag.name} on the {M}-grid")
    fine = kernel_profile(source, spec, M).values
    axis = np.rint(np.fft.fftfreq(M, 1.0 / M))
    freqs = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1)
    box = cube_average_factor(spec.L, M, freqs)
    smoothed = np.fft.ifftn(np.fft.fftn(fine) * box).real
    return pwc_project_grid(GridFunction(n, M, smoothed), spec.L).values


def cube_projection_error_bound(kind: KernelKind, spec: TorusSpec, M: int) -> float:
    """Σ_z |c_z| |cube_average_factor(z)^2 − ϑ_{L,z}^2|, the sup-norm gap of cube_projected_profile."""
    source = _cube_source(kind, spec, M)
    if source.tag is KernelTag.CONT_TRUNC:
        source = KernelKind(KernelTag.SPECTRED)
    coefficients = kernel_coefficients(source, spec).dense
    freqs = frequency_grid(spec.n, spec.L)
    gap = np.abs(cube_average_factor(spec.L, M, freqs) ** 2 - theta(spec.L, freqs) ** 2)
    return math.fsum(np.abs(coefficients * gap).reshape(-1))


def flat_tail_bound(n: int, L: int, K: int) -> float:
    """
    Upper bound on the FLAT coefficients dropped by the cutoff ‖z‖_∞ < K/2.

    Uses ϑ_{L,z}^2 <= (L/(π‖z‖_∞))^2, λ_z >= (2π‖z‖_∞)^2 and a shell count
    of 2n(3r)^{n-1} points at radius r.
    """
    R = (K + 1) // 2
    if R < 2:
        return math.inf
    return (L / math.pi) ** 2 * n * 3 ** (n - 1) / ((2.0 * math.pi) ** n * ground_constant(n) * (R - 1) ** 2)


def second_moment(kind: KernelKind, spec: TorusSpec, gamma: float, M: Optional[int] = None) -> float:
    """
    ∬ exp(γ² k(x, y)) = M^{-n} Σ_u exp(γ² κ(u)).

    Exact for lattice kinds at M = L and for the cube-constant kinds;
    midpoint quadrature for trigonometric kernels on finer grids.
    """
    profile = kernel_profile(kind, spec, M)
    return float(np.mean(np.exp(gamma ** 2 * profile.values)))


def log_divergence_estimate(
    n: int, K: int, M: int, r_min: float, bin_width: Optional[float] = None
) -> Tuple[float, pd.DataFrame]:
    """
    Empirical constant C in |k(0, u) − log(1/d(0, u))| <= C for d >= r_min.

    The kernel is the continuum truncation CONT_TRUNC(K) evaluated on the
    M-grid. Returns the supremum and a table binned by distance.
    """
    if K > M:
        raise ValueError(f"Cutoff K={K} must not exceed the grid M={M}")
    if r_min <= 0:
        raise ValueError(f"Exclusion radius must be positive, got {r_min}")
    bin_width = KERNEL_CONFIG["log_div_bin_width"] if bin_width is None else bin_width

    kind = KernelKind(KernelTag.CONT_TRUNC, K=K)
    profile = kernel_profile(kind, TorusSpec(n, 3), M)
    distances = torus_distance(np.zeros(n), lattice_points(M, n))
    keep = distances >= r_min
    if not keep.any():
        raise ValueError(f"No grid point lies at distance >= {r_min}")
    deviation = np.abs(profile.profile.flat[keep] - np.log(1.0 / distances[keep]))

    table = pd.DataFrame({"distance": distances[keep], "deviation": deviation})
    table["r_low"] = r_min + np.floor((table["distance"] - r_min) / bin_width) * bin_width
    binned = (
        table.groupby("r_low")["deviation"]
        .agg(points="count", mean_deviation="mean", max_deviation="max")
        .reset_index()
    )
    binned["r_high"] = binned["r_low"] + bin_width
    binned = binned[["r_low", "r_high", "points", "mean_deviation", "max_deviation"]]
    sup = float(deviation.max())
    logging.info(f"Log-divergence estimate n={n}, K={K}, M={M}, r_min={r_min}: C ~ {sup:.6f}")
    return sup, binned


def gamma_bounds(n: int) -> Tuple[float, float]:
    """(γ_* = √(n/e), γ* = √(2n))."""
    return math.sqrt(n / math.e), math.sqrt(2.0 * n)


def ui_bound_table(
    n: int,
    gamma: float,
    kinds: Iterable[KernelKind],
    Ls: Sequence[int],
    refinements: Optional[Sequence[int]] = None,
) -> pd.DataFrame:
    """
    ∫ exp(γ² κ(u)) du for each kind and lattice side, at two grid refinements.

    ``increment`` is the change from the previous L for the same kind and
    refinement. The thresholds are attached in ``table.attrs``.
    """
    refinements = KERNEL_CONFIG["bound_refinements"] if refinements is None else refinements
    gamma_lower, gamma_upper = gamma_bounds(n)
    if abs(gamma) >= gamma_lower:
        logging.warning(
            f"gamma={gamma} is not below gamma_*={gamma_lower:.6f}; boundedness in L is not expected"
        )

    rows = []
    for kind in kinds:
        for factor in refinements:
            previous = None
            for L in Ls:
                spec = TorusSpec(n, L)
                M = factor * L
                value = second_moment(kind, spec, gamma, M)
                rows.append(
                    {
                        "kind": kind.tag.value,
                        "L": L,
                        "refinement": factor,
                        "M": M,
                        "integral": value,
                        "increment": np.nan if previous is None else value - previous,
                    }
                )
                previous = value
                logging.info(f"{kind.tag.value} L={L} M={M}: {value:.10f}")

    table = pd.DataFrame(rows)
    table.attrs["gamma"] = gamma
    table.attrs["gamma_lower"] = gamma_lower
    table.attrs["gamma_upper"] = gamma_upper
    table.attrs["expected_bounded"] = bool(abs(gamma) < gamma_lower)
    return table
