"""
Polyharmonic Field Toolkit - Verification Module

Invariant suites over every module. ``identities`` holds the exact
(deterministic) checks, ``sampling`` the Monte Carlo checks of the Gaussian
streams and fields, ``gmc`` the chaos-measure moments and convergence.
Each check records its name, value, tolerance and verdict.
"""

import logging
import math
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from src.config import GMC_CONFIG, IO_CONFIG, VERIFY_CONFIG
from src.fields import (
    coefficient_coupling,
    empirical_covariance,
    expected_sobolev_gap,
    gaussian_coefficients,
    get_sampler,
    pairing_error_variance,
    white_noise_values,
)
from src.grid_io import table_records
from src.gmc import GmcSpec, gamma_thresholds, hierarchical_convergence, mass_moment_report
from src.kernels import (
    KernelKind,
    KernelTag,
    cube_projected_profile,
    cube_projection_error_bound,
    flat_tail_bound,
    kernel_coefficients,
    kernel_profile,
    log_divergence_estimate,
    second_moment,
    ui_bound_table,
)
from src.spectrum import lambda_cont, lambda_disc, normalization_identity_residual, theta
from src.torus import TorusSpec, frequency_grid
from src.transform import SpectralFunction, analyze, synthesize

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")

SUITES = ("identities", "sampling", "gmc", "all")

DISC_DIAG_N1_L3 = 1.209200
# n=1, L=3: profile (k, -k/2, -k/2) with k = 2pi/sqrt(27)
_DISC_K_N1_L3 = 2 * math.pi / math.sqrt(27)
DISC_SECOND_MOMENT_N1_L3 = (math.exp(_DISC_K_N1_L3) + 2 * math.exp(-_DISC_K_N1_L3 / 2)) / 3


def _check(name: str, value: float, tolerance: float, passed: Optional[bool] = None) -> Dict:
    value = float(value)
    if passed is None:
        passed = bool(np.isfinite(value) and value <= tolerance)
    return {"name": name, "value": value, "tolerance": float(tolerance), "passed": bool(passed)}


def random_spectral_function(rng: np.random.Generator, n: int, L: int, max_modes: int = 32) -> SpectralFunction:
    """Random coefficients on a random subset of Z^n_L."""
    freqs = frequency_grid(n, L).reshape(-1, n)
    size = int(rng.integers(1, min(max_modes, len(freqs)) + 1))
    chosen = rng.choice(len(freqs), size=size, replace=False)
    return SpectralFunction(n, freqs[np.sort(chosen)], rng.standard_normal(size))


# --- identities ----------------------------------------------------------------

def check_normalization() -> List[Dict]:
    checks = []
    for n in (1, 2, 3):
        for L in (3, 5, 9):
            residual = normalization_identity_residual(TorusSpec(n, L))
            checks.append(_check(f"normalization_identity n={n} L={L}", residual, VERIFY_CONFIG["identity_tol"]))
    return checks


def check_synthesis(seed: int = 0) -> List[Dict]:
    """FFT against direct synthesis, and analysis of the synthesized grid."""
    rng = np.random.default_rng(seed)
    checks = []
    for n in (1, 2, 3):
        for L in (3, 9, 27):
            spec = TorusSpec(n, L)
            worst_sync, worst_roundtrip = 0.0, 0.0
            for _ in range(int(VERIFY_CONFIG["random_functions"])):
                f = random_spectral_function(rng, n, L)
                fast = synthesize(f, spec, "fft").values
                direct = synthesize(f, spec, "direct").values
                scale = max(np.max(np.abs(direct)), 1e-300)
                worst_sync = max(worst_sync, float(np.max(np.abs(fast - direct)) / scale))
                recovered = analyze(synthesize(f, spec), spec)
                dense = f.to_dense(L)
                worst_roundtrip = max(worst_roundtrip, float(np.max(np.abs(recovered.to_dense(L) - dense))))
            checks.append(_check(f"fft_vs_direct n={n} L={L}", worst_sync, VERIFY_CONFIG["synthesis_tol"]))
            checks.append(_check(f"analyze_synthesize n={n} L={L}", worst_roundtrip, VERIFY_CONFIG["synthesis_tol"]))
    return checks


def _cube_kinds_feasible(n: int, L: int) -> bool:
    return (KernelKind(KernelTag.FLAT).flat_cutoff(L)) ** n <= 2_000_000


def check_kernels() -> List[Dict]:
    tol = VERIFY_CONFIG["kernel_tol"]
    checks = []
    for n in (1, 2, 3):
        for L in (3, 9, 27):
            spec = TorusSpec(n, L)
            disc = kernel_profile(KernelKind(KernelTag.DISC), spec).values
            reduced = kernel_profile(KernelKind(KernelTag.REDUCED), spec).values
            enhanced = kernel_profile(KernelKind(KernelTag.ENHANCED), spec).values
            natural = kernel_profile(KernelKind(KernelTag.NATURAL), spec).values
            spectred = kernel_profile(KernelKind(KernelTag.SPECTRED), spec).values
            truncated = kernel_profile(KernelKind(KernelTag.CONT_TRUNC, K=L), spec, L).values
            checks.append(_check(f"enhanced_equals_disc n={n} L={L}", np.max(np.abs(enhanced - disc)), tol))
            checks.append(_check(f"natural_equals_reduced n={n} L={L}", np.max(np.abs(natural - reduced)), tol))
            checks.append(
                _check(f"spectred_equals_cont_trunc n={n} L={L}", np.max(np.abs(spectred - truncated)), 0.0)
            )

            kinds = [
                KernelKind(KernelTag.DISC),
                KernelKind(KernelTag.SPECTRED),
                KernelKind(KernelTag.REDUCED),
                KernelKind(KernelTag.ENHANCED),
                KernelKind(KernelTag.NATURAL),
                KernelKind(KernelTag.GREEN_POWER, s=1.0),
            ]
            if _cube_kinds_feasible(n, L):
                kinds.append(KernelKind(KernelTag.FLAT))
            worst_symmetry, worst_mean = 0.0, 0.0
            for kind in kinds:
                values = kernel_profile(kind, spec).values
                mirrored = np.roll(np.flip(values), 1, axis=tuple(range(n)))
                worst_symmetry = max(worst_symmetry, float(np.max(np.abs(values - mirrored))))
                worst_mean = max(worst_mean, abs(float(np.mean(values))))
            checks.append(_check(f"kernel_even_symmetry n={n} L={L}", worst_symmetry, 1e-12 * max(1.0, np.max(np.abs(disc)))))
            checks.append(_check(f"kernel_grounded n={n} L={L}", worst_mean, tol))

    spec = TorusSpec(1, 3)
    disc = kernel_profile(KernelKind(KernelTag.DISC), spec)
    checks.append(_check("disc_diag n=1 L=3", abs(disc.diag - DISC_DIAG_N1_L3), 1e-6))
    moment = second_moment(KernelKind(KernelTag.DISC), spec, 1.0)
    checks.append(_check("disc_second_moment n=1 L=3 gamma=1", abs(moment - DISC_SECOND_MOMENT_N1_L3), 1e-10))

    growing = []
    for L in (3, 9, 27):
        semi = kernel_coefficients(KernelKind(KernelTag.SEMIDISC), TorusSpec(2, L)).dense
        cont = kernel_coefficients(KernelKind(KernelTag.SPECTRED), TorusSpec(2, L)).dense
        checks.append(_check(f"semidisc_dominates_spectred L={L}", -float(np.min(semi - cont)), 1e-15))
        half, window = (L - 1) // 2, 1
        core = (slice(half - window, half + window + 1),) * 2
        growing.append(float(np.sum(np.abs(semi - cont)[core])))
    checks.append(_check("semidisc_spectred_gap_shrinks", float(np.max(np.diff(growing))), 0.0, bool(np.all(np.diff(growing) < 0))))

    spec = TorusSpec(2, 3)
    coarse = kernel_coefficients(KernelKind(KernelTag.FLAT, K=27), spec).dense
    fine = kernel_coefficients(KernelKind(KernelTag.FLAT, K=81), spec).dense
    checks.append(_check("flat_cutoff_convergence n=2 L=3", np.max(np.abs(fine - coarse)), flat_tail_bound(2, 3, 27)))

    for L in (3, 9):
        spec = TorusSpec(2, L)
        natural = second_moment(KernelKind(KernelTag.NATURAL), spec, 1.0)
        fourier = second_moment(KernelKind(KernelTag.CONT_TRUNC, K=L), spec, 1.0, 9 * L)
        checks.append(_check(f"natural_second_moment_dominated L={L}", natural - fourier, 0.0))

    for n, L in ((1, 3), (1, 9), (2, 3), (2, 9)):
        spec = TorusSpec(n, L)
        for tag, target in ((KernelTag.ENHANCED, KernelTag.DISC), (KernelTag.NATURAL, KernelTag.REDUCED)):
            exact = kernel_profile(KernelKind(target), spec).values
            errors = []
            for factor in (3, 9, 27):
                M = factor * L
                projected = cube_projected_profile(KernelKind(tag), spec, M)
                error = float(np.max(np.abs(projected - exact)))
                bound = cube_projection_error_bound(KernelKind(tag), spec, M)
                checks.append(_check(f"{tag.value}_cube_projection n={n} L={L} M={M}", error, bound + 1e-12))
                errors.append(error)
            ratio = max(errors[1] / errors[0], errors[2] / errors[1])
            checks.append(_check(f"{tag.value}_cube_projection_converges n={n} L={L}", ratio, 0.25))
    return checks


def check_field_convergence() -> List[Dict]:
    f = SpectralFunction.mode((1,))
    checks = []
    variances = [pairing_error_variance(f, TorusSpec(1, L)).total for L in (3, 9, 27, 81)]
    checks.append(_check("pairing_variance n=1 L=3", abs(variances[0] - 4.964e-3), 1e-6))
    checks.append(_check("pairing_variance n=1 L=9", abs(variances[1] - 5.25e-5), 1e-6))
    checks.append(_check("pairing_variance_decreasing", float(np.max(np.diff(variances))), 0.0, bool(np.all(np.diff(variances) < 0))))
    out_of_band = pairing_error_variance(SpectralFunction.mode((3,)), TorusSpec(1, 3)).total
    checks.append(_check("pairing_variance_tail_only n=1 L=3", abs(out_of_band - 1.0 / 6.0), 1e-12))
    for n in (1, 2):
        for route in ("fourier", "pwc"):
            gaps = [expected_sobolev_gap(TorusSpec(n, L), "standard", float(n), 81, route) for L in (3, 9, 27)]
            steps = np.diff(gaps)
            checks.append(
                _check(f"sobolev_gap_decreasing n={n} route={route}", float(np.max(steps)), 0.0, bool(np.all(steps < 0)))
            )
    return checks


def check_bounds() -> List[Dict]:
    checks = []
    table = ui_bound_table(2, 0.5, [KernelKind(KernelTag.SEMIDISC)], [3, 9, 27])
    for factor, rows in table.groupby("refinement"):
        increments = rows["increment"].dropna().abs().to_numpy()
        ratio = increments[1] / increments[0] if increments[0] > 0 else 0.0
        checks.append(_check(f"ui_bound_increments_halve refinement={factor}", ratio, 0.5))
    flat = ui_bound_table(2, 0.0, [KernelKind(KernelTag.SEMIDISC), KernelKind(KernelTag.ENHANCED)], [3, 9])
    checks.append(_check("ui_bound_gamma_zero", float(np.max(np.abs(flat["integral"] - 1.0))), 0.0))

    sup_coarse, _ = log_divergence_estimate(2, 33, 99, 0.05)
    sup_fine, _ = log_divergence_estimate(2, 99, 99, 0.05)
    checks.append(_check("log_divergence_stable n=2", abs(sup_coarse - sup_fine), 0.1))
    return checks


# --- sampling ------------------------------------------------------------------

def check_gaussian_stream() -> List[Dict]:
    sigma = GMC_CONFIG["sigma_band"]
    count = 100_000
    freqs = np.arange(-count // 2, count // 2)[:, None]
    xi = gaussian_coefficients([0], freqs)[0]
    checks = [
        _check("gaussian_mean", abs(np.mean(xi)) / math.sqrt(1.0 / count), sigma),
        _check("gaussian_variance", abs(np.var(xi) - 1.0) / math.sqrt(2.0 / count), sigma),
    ]
    pairs = 10_000
    left = gaussian_coefficients([1], freqs[:pairs])[0]
    right = gaussian_coefficients([1], freqs[pairs:2 * pairs])[0]
    checks.append(_check("gaussian_pair_correlation", abs(np.corrcoef(left, right)[0, 1]) * math.sqrt(pairs), sigma))
    return checks


def check_fields() -> List[Dict]:
    sigma = GMC_CONFIG["sigma_band"]
    seeds = int(VERIFY_CONFIG["covariance_seeds"])
    checks = []
    for n, L in ((1, 3), (2, 9)):
        estimate = empirical_covariance(TorusSpec(n, L), "standard", seeds, 0)
        checks.append(_check(f"covariance_standard n={n} L={L}", estimate.max_abs_z, sigma))
    estimate = empirical_covariance(TorusSpec(1, 3), "standard", seeds, seeds, route="white_noise")
    checks.append(_check("covariance_white_noise n=1 L=3", estimate.max_abs_z, sigma))

    spec = TorusSpec(1, 3)
    means = white_noise_values(spec, range(10_000)).mean(axis=1)
    checks.append(_check("white_noise_mean_variance", abs(np.var(means) - 1.0) / math.sqrt(2.0 / len(means)), sigma))

    spec = TorusSpec(2, 9)
    grids = get_sampler(spec).grids(list(range(16)))
    checks.append(_check("field_grounded n=2 L=9", float(np.max(np.abs(grids.mean(axis=(1, 2))))), 1e-12))

    reduced = get_sampler(spec, "reduced")
    spectral = get_sampler(spec, "spectrally_reduced")
    ratio = reduced.coefficients([5]) - theta(spec.L, reduced.freqs) * spectral.coefficients([5])
    checks.append(_check("reduced_is_theta_times_spectrally_reduced", float(np.max(np.abs(ratio))), 1e-15))

    z = (1, 1)
    coupling = coefficient_coupling(3, z, (3, 9, 27, 81))
    limit = coefficient_coupling(3, z, (3,), kind="spectrally_reduced")[0]
    errors = [abs(value / limit - 1.0) for value in coupling]
    checks.append(_check("common_noise_coupling_monotone", errors[-1], errors[0], bool(np.all(np.diff(errors) < 0))))
    bounds = (lambda_cont(np.array(z)) / lambda_disc(81, np.array(z))) ** 0.5
    checks.append(_check("coupling_ratio_limit", abs(bounds - 1.0), 1e-3))
    return checks


# --- gmc -------------------------------------------------------------------------

def check_measures() -> List[Dict]:
    checks = []
    report = mass_moment_report(TorusSpec(1, 3), GmcSpec(1.0, "discrete"), int(VERIFY_CONFIG["mass_seeds"]))
    for row in report.itertuples():
        checks.append(_check(f"mass_{row.statistic} discrete n=1 L=3 gamma=1", abs(row.zscore), GMC_CONFIG["sigma_band"]))
    report = mass_moment_report(TorusSpec(2, 9), GmcSpec(0.5, "semidiscrete", 27), 10_000)
    for row in report.itertuples():
        checks.append(_check(f"mass_{row.statistic} semidiscrete n=2 L=9 M=27", abs(row.zscore), GMC_CONFIG["sigma_band"]))

    f = SpectralFunction.mode((1,))
    seeds = int(VERIFY_CONFIG["convergence_seeds"])
    table = hierarchical_convergence(1, 3, 3, GmcSpec(0.4, "discrete"), f, num_seeds=seeds)
    steps = np.diff(table["D"].to_numpy())
    checks.append(_check("hierarchical_convergence_decreasing", float(np.max(steps)), 0.0, bool(np.all(steps < 0))))
    exact = hierarchical_convergence(
        1, 3, 3, GmcSpec(0.4, "spectrally_reduced_semidiscrete"), f, K_ref=27, num_seeds=seeds
    )
    checks.append(_check("hierarchical_convergence_exact_top_level", float(exact["D"].iloc[-1]), 0.0))
    flat = hierarchical_convergence(1, 3, 2, GmcSpec(0.0, "discrete"), f, num_seeds=16)
    checks.append(_check("hierarchical_convergence_gamma_zero", float(flat["D"].max()), 1e-10))
    return checks


SUITE_CHECKS: Dict[str, List[Callable[[], List[Dict]]]] = {
    "identities": [check_normalization, check_synthesis, check_kernels, check_field_convergence, check_bounds],
    "sampling": [check_gaussian_stream, check_fields],
    "gmc": [check_measures],
}


def run_suite(name: str) -> pd.DataFrame:
    """Run one suite (or ``all``) and return one row per check."""
    if name not in SUITES:
        raise ValueError(f"Unknown suite: {name} (choose from {', '.join(SUITES)})")
    names = ["identities", "sampling", "gmc"] if name == "all" else [name]
    rows = []
    for suite in names:
        for group in SUITE_CHECKS[suite]:
            for check in group():
                rows.append({"suite": suite, **check})
                if not check["passed"]:
                    logging.warning(f"Check failed: {check['name']} value={check['value']:.6g} tol={check['tolerance']:.6g}")
    table = pd.DataFrame(rows, columns=["suite", "name", "value", "tolerance", "passed"])
    logging.info(f"Suite {name}: {int(table['passed'].sum())}/{len(table)} checks passed")
    return table


def report_payload(name: str, table: pd.DataFrame) -> Dict:
    return {
        "schema": IO_CONFIG["report_schema"],
        "version": IO_CONFIG["report_version"],
        "suite": name,
        "passed": bool(table["passed"].all()),
        "thresholds": {f"n={n}": gamma_thresholds(n) for n in (1, 2, 3)},
        "checks": table_records(table),
    }
