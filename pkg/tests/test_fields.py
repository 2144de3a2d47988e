"""
Tests for the Gaussian stream, field sampling, extensions and the exact
pairing error series.
"""

import math
from unittest.mock import patch

import numpy as np
import pytest

from src.config import SAMPLING_CONFIG
from src.fields import (
    NoiseKey,
    coefficient_coupling,
    draw_white_noise,
    empirical_covariance,
    expected_sobolev_gap,
    extend_field,
    gaussian_coefficient,
    gaussian_coefficients,
    get_sampler,
    pairing_error_variance,
    sample_batch,
    sample_field,
    sample_field_white_noise,
    sobolev_distance,
    white_noise_values,
)
from src.kernels import KernelKind, KernelTag, kernel_diag
from src.spectrum import ground_constant, lambda_cont, lambda_disc, theta
from src.torus import TorusSpec, grid_cube_indices
from src.transform import SpectralFunction, restrict_to_lattice, synthesize


@pytest.fixture
def plane():
    return TorusSpec(2, 9)


def test_noise_key_validation():
    """Test seed and draw index ranges"""
    with pytest.raises(ValueError):
        NoiseKey(-1)
    with pytest.raises(ValueError):
        NoiseKey(0, draw_index=-2)

def test_gaussian_coefficient_deterministic():
    """Test ξ_z is a pure function of seed and frequency"""
    assert gaussian_coefficient(42, (1, -3)) == gaussian_coefficient(42, (1, -3))
    assert gaussian_coefficient(42, (1, -3)) != gaussian_coefficient(42, (-3, 1))
    assert gaussian_coefficient(42, (1,)) != gaussian_coefficient(42, (1, 0))

def test_gaussian_coefficient_draw_index_separates_streams():
    """Test different draw indices give different streams"""
    assert gaussian_coefficient(5, (2,), draw_index=0) != gaussian_coefficient(5, (2,), draw_index=1)

def test_distinct_seeds_give_distinct_streams():
    """Test neighbouring seeds do not repeat values"""
    keys = np.arange(-50, 50).reshape(-1, 1)
    draws = gaussian_coefficients([1, 2], keys)
    assert not np.array_equal(draws[0], draws[1])

def test_gaussian_moments():
    """Test the stream has standard normal mean and variance"""
    keys = np.arange(-50000, 50000).reshape(-1, 1)
    xi = gaussian_coefficients([2024], keys)[0]
    assert np.all(np.isfinite(xi))
    assert abs(xi.mean()) < 4 / math.sqrt(len(xi))
    assert abs(xi.var() - 1.0) < 4 * math.sqrt(2 / len(xi))

def test_gaussian_neighbours_uncorrelated():
    """Test adjacent frequencies are uncorrelated"""
    keys = np.stack(np.meshgrid(np.arange(100), np.arange(101), indexing="ij"), axis=-1).reshape(-1, 2)
    xi = gaussian_coefficients([9], keys)[0].reshape(100, 101)
    correlation = np.corrcoef(xi[:, :-1].reshape(-1), xi[:, 1:].reshape(-1))[0, 1]
    assert abs(correlation) < 4 / math.sqrt(xi[:, :-1].size)

def test_sample_field_is_deterministic(plane):
    """Test resampling a seed reproduces the field bit for bit"""
    first = sample_field(plane, 17)
    second = sample_field(plane, 17)
    assert np.array_equal(first.grid.values, second.grid.values)
    assert not np.array_equal(first.grid.values, sample_field(plane, 18).grid.values)

@pytest.mark.parametrize("kind", ["standard", "reduced", "spectrally_reduced"])
def test_sample_field_grounded_and_synthesized(plane, kind):
    """Test every field kind is grounded and matches its coefficients"""
    sample = sample_field(plane, 3, kind)
    assert sample.coeffs.is_grounded()
    assert len(sample.coeffs) == plane.N - 1
    assert abs(sample.grid.mean()) < 1e-12
    assert np.max(np.abs(synthesize(sample.coeffs, plane).values - sample.grid.values)) < 1e-9

def test_standard_to_spectrally_reduced_ratio(plane):
    """Test standard and spectrally reduced coefficients differ by the eigenvalue ratio"""
    standard = sample_field(plane, 11, "standard").coeffs
    spectred = sample_field(plane, 11, "spectrally_reduced").coeffs
    expected = (lambda_cont(standard.freqs) / lambda_disc(9, standard.freqs)) ** 0.5
    assert np.allclose(standard.values / spectred.values, expected, rtol=1e-12)

def test_reduced_is_theta_times_spectrally_reduced(plane):
    """Test reduced coefficients are ϑ times spectrally reduced ones"""
    reduced = sample_field(plane, 11, "reduced").coeffs
    spectred = sample_field(plane, 11, "spectrally-reduced").coeffs
    assert np.allclose(reduced.values, theta(9, spectred.freqs) * spectred.values, rtol=1e-14, atol=0)

def test_unknown_kind_rejected(plane):
    """Test unknown field kinds"""
    with pytest.raises(ValueError, match="Unknown field kind"):
        sample_field(plane, 0, "flat")

def test_sample_batch_matches_single_samples(plane):
    """Test batched sampling agrees with one seed at a time"""
    coeffs, grids = sample_batch(plane, [4, 5, 6], "reduced")
    for row, seed in enumerate([4, 5, 6]):
        sample = sample_field(plane, seed, "reduced")
        assert np.array_equal(coeffs[row], sample.coeffs.values)
        assert np.allclose(grids[row], sample.grid.values, atol=1e-14)

def test_white_noise_grounding(plane):
    """Test grounded white noise has zero mean"""
    noise = draw_white_noise(plane, 8)
    assert noise.grounded
    assert abs(noise.values.sum()) < 1e-9
    raw = draw_white_noise(plane, 8, grounded=False)
    assert np.allclose(raw.values - raw.values.mean(), noise.values)

def test_white_noise_mean_has_unit_variance():
    """Test the lattice mean of raw white noise is standard normal"""
    spec = TorusSpec(1, 3)
    values = white_noise_values(spec, list(range(10000)))
    means = values.mean(axis=1)
    assert abs(means.var() - 1.0) < 4 * math.sqrt(2 / len(means))

def test_white_noise_field(plane):
    """Test the white-noise route builds a grounded standard field"""
    sample = sample_field_white_noise(plane, 21)
    assert sample.kind == "standard"
    assert abs(sample.grid.mean()) < 1e-12
    assert np.max(np.abs(synthesize(sample.coeffs, plane).values - sample.grid.values)) < 1e-9

def test_extend_field_fourier(plane):
    """Test the Fourier extension interpolates the lattice values"""
    sample = sample_field(plane, 2)
    same = extend_field(sample, "fourier", 9)
    assert np.allclose(same.values, sample.grid.values, atol=1e-12)
    fine = extend_field(sample, "fourier", 27)
    assert np.allclose(restrict_to_lattice(fine, 9).values, sample.grid.values, atol=1e-12)

def test_extend_field_pwc(plane):
    """Test the piecewise constant extension is constant on cubes"""
    sample = sample_field(plane, 2)
    fine = extend_field(sample, "pwc", 27)
    idx = grid_cube_indices(27, 9)
    assert np.array_equal(fine.values, sample.grid.values[np.ix_(idx, idx)])
    with pytest.raises(ValueError):
        extend_field(sample, "pwc", 30)
    with pytest.raises(ValueError):
        extend_field(sample, "spline", 27)

def test_pairing_error_single_mode():
    """Test the pairing error of one mode against its closed form"""
    result = pairing_error_variance(SpectralFunction.mode((1,)), TorusSpec(1, 3))
    expected = math.pi * ((4 * math.pi ** 2) ** -0.25 - 27 ** -0.25) ** 2
    assert result.total == pytest.approx(expected, rel=1e-12)
    assert result.total == pytest.approx(4.964e-3, rel=1e-3)
    assert result.tail == 0.0
    assert result.alias == pytest.approx(0.0, abs=1e-15)
    fine = pairing_error_variance(SpectralFunction.mode((1,)), TorusSpec(1, 9))
    assert fine.total == pytest.approx(5.25e-5, rel=1e-2)

def test_pairing_error_pure_tail():
    """Test an out-of-band mode only feeds the tail term"""
    result = pairing_error_variance(SpectralFunction.mode((3,)), TorusSpec(1, 3), K_tail=7)
    assert result.total == pytest.approx(1 / 6, rel=1e-12)
    assert result.tail == pytest.approx(1 / 6, rel=1e-12)
    assert result.inband == 0.0

def test_pairing_error_decreasing_in_L():
    """Pairing error must shrink along L = 3, 9, 27, 81"""
    f = SpectralFunction.mode((1, 1))
    totals = [pairing_error_variance(f, TorusSpec(2, L)).total for L in (3, 9, 27, 81)]
    assert all(t >= 0 for t in totals)
    assert all(a > b for a, b in zip(totals, totals[1:]))

def test_pairing_error_spectrally_reduced_has_no_inband_term():
    """Test spectrally reduced fields match the continuum in band"""
    f = SpectralFunction.from_dict(1, {(1,): 1.0, (-1,): 0.5})
    result = pairing_error_variance(f, TorusSpec(1, 3), kind="spectrally_reduced")
    assert result.total == pytest.approx(0.0, abs=1e-15)

@pytest.mark.parametrize("route", ["lattice", "fourier", "pwc"])
def test_pairing_error_routes_nonnegative(route):
    """Test every route splits into nonnegative terms"""
    f = SpectralFunction.from_dict(2, {(1, 0): 1.0, (4, -2): 0.3, (-1, 5): -0.7})
    result = pairing_error_variance(f, TorusSpec(2, 3), kind="reduced", route=route)
    assert result.total >= 0
    assert result.tail > 0
    assert result.total == pytest.approx(result.inband + result.alias + result.tail)

def test_pairing_error_fourier_route_has_no_alias():
    """Test the Fourier route has no aliasing term"""
    f = SpectralFunction.from_dict(1, {(1,): 1.0, (4,): 1.0})
    result = pairing_error_variance(f, TorusSpec(1, 3), route="fourier")
    assert result.alias == pytest.approx(0.0, abs=1e-15)

def test_pairing_error_rejects_bad_input():
    """Test invalid functions, cutoffs and routes"""
    spec = TorusSpec(1, 3)
    with pytest.raises(ValueError, match="grounded"):
        pairing_error_variance(SpectralFunction.mode((0,)), spec)
    with pytest.raises(ValueError, match="dimension"):
        pairing_error_variance(SpectralFunction.mode((1, 0)), spec)
    with pytest.raises(ValueError):
        pairing_error_variance(SpectralFunction.mode((5,)), spec, K_tail=9)
    with pytest.raises(ValueError):
        pairing_error_variance(SpectralFunction.mode((1,)), spec, route="midpoint")

def test_expected_sobolev_gap_decreases():
    """Test the expected H^{-s} gap shrinks with L"""
    gaps = [expected_sobolev_gap(TorusSpec(1, L), "standard", 1.0, 243) for L in (3, 9, 27, 81)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    with pytest.raises(ValueError):
        expected_sobolev_gap(TorusSpec(1, 9), "standard", 1.0, 7)

def test_sobolev_distance_zero_without_truncation_gap():
    """Test the distance vanishes when the truncation equals the lattice band"""
    sample = sample_field(TorusSpec(1, 9), 5, "spectrally_reduced")
    assert sobolev_distance(sample, 1.0, 9) < 1e-12
    assert sobolev_distance(sample, 1.0, 27) > 0
    assert sobolev_distance(sample, 1.0, 27, route="pwc") > 0
    with pytest.raises(ValueError):
        sobolev_distance(sample, 1.0, 27, route="linear")

@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("route", ["fourier", "pwc"])
def test_expected_sobolev_gap_routes_decrease(n, route):
    """Test both extensions approach the continuum field in H^{-s} as L grows"""
    gaps = [expected_sobolev_gap(TorusSpec(n, L), "standard", float(n), 81, route) for L in (3, 9, 27)]
    assert all(a > b > 0 for a, b in zip(gaps, gaps[1:]))
    with pytest.raises(ValueError, match="route"):
        expected_sobolev_gap(TorusSpec(n, 3), "standard", 1.0, 9, "linear")

@pytest.mark.parametrize("route", ["fourier", "pwc"])
def test_sobolev_distance_matches_expected_gap(route):
    """Test the mean squared pathwise distance agrees with the exact expectation"""
    spec = TorusSpec(1, 3)
    squared = np.array([sobolev_distance(sample_field(spec, seed), 1.0, 27, route) ** 2 for seed in range(800)])
    expected = expected_sobolev_gap(spec, "standard", 1.0, 27, route)
    stderr = squared.std(ddof=1) / math.sqrt(len(squared))
    assert abs(squared.mean() - expected) < 5 * stderr

def test_natural_and_enhanced_fields_are_lattice_fields(plane):
    """Test cube averages of the truncation and of the ϑ^{-1} field give the reduced and standard fields"""
    seeds = [0, 1, 2]
    natural = get_sampler(plane, "natural").grids(seeds)
    reduced = get_sampler(plane, "reduced").grids(seeds)
    assert np.allclose(natural, reduced, atol=1e-12)
    enhanced = get_sampler(plane, "enhanced").grids(seeds)
    standard = get_sampler(plane, "standard").grids(seeds)
    assert np.allclose(enhanced, standard, atol=1e-12)

def test_flat_field_at_lattice_cutoff_is_natural(plane):
    """Test the flat field truncated at K = L coincides with the natural field"""
    flat = get_sampler(plane, "flat", K=9).grids([4, 5])
    natural = get_sampler(plane, "natural").grids([4, 5])
    assert np.allclose(flat, natural, atol=1e-12)

def test_flat_field_variance_matches_flat_diagonal():
    """Test the flat field has pointwise variance k_flat(x, x)"""
    spec = TorusSpec(1, 3)
    sampler = get_sampler(spec, "flat", K=27)
    grids = sampler.grids(list(range(4000)))
    diag = kernel_diag(KernelKind(KernelTag.FLAT, K=27), spec)
    variance = float(np.mean(grids ** 2))
    assert abs(np.mean(grids)) < 1e-12
    assert abs(variance - diag) < 5 * diag * math.sqrt(2.0 / 4000)

def test_flat_field_shares_noise_with_truncation():
    """Test the flat sampler draws the same ξ_z as the continuum truncation"""
    spec = TorusSpec(1, 3)
    sampler = get_sampler(spec, "flat", K=27)
    row = sampler.coefficients([7])[0]
    freqs = sampler.freqs
    expected = gaussian_coefficients([7], freqs)[0] * lambda_cont(freqs) ** -0.25 / math.sqrt(ground_constant(1))
    assert np.allclose(row, expected)
    assert sampler.sample(7).kind == "flat"

def test_projected_field_grids(plane):
    """Test projected fields replicate over cubes of finer grids and validate their inputs"""
    sampler = get_sampler(plane, "natural")
    lattice = sampler.grids([3])[0]
    fine = sampler.grids([3], 27)[0]
    idx = grid_cube_indices(27, 9)
    assert np.array_equal(fine, lattice[np.ix_(idx, idx)])
    with pytest.raises(ValueError):
        sampler.grids([3], 15)
    with pytest.raises(ValueError):
        get_sampler(plane, "natural", K=27)
    with pytest.raises(ValueError):
        get_sampler(plane, "flat", K=3)

def test_coefficient_coupling_converges():
    """Test common noise makes coefficients converge across lattices"""
    values = coefficient_coupling(3, (1,), [3, 9, 27, 81])
    limit = gaussian_coefficient(3, (1,)) * lambda_cont((1,)) ** -0.25 / math.sqrt(ground_constant(1))
    gaps = [abs(v - limit) for v in values]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert values[-1] / limit == pytest.approx(1.0, rel=1e-3)

def test_empirical_covariance_standard():
    """Test sampled covariance matches the discrete kernel"""
    estimate = empirical_covariance(TorusSpec(1, 3), "standard", num_seeds=4000, seed0=100)
    assert estimate.num_seeds == 4000
    assert estimate.max_abs_z < 4.5

def test_empirical_covariance_white_noise_route():
    """Test the white-noise route has the same covariance"""
    estimate = empirical_covariance(TorusSpec(1, 3), "standard", num_seeds=4000, seed0=100, route="white_noise")
    assert estimate.max_abs_z < 4.5

@pytest.mark.slow
def test_empirical_covariance_plane(plane):
    """Test sampled covariance in two dimensions"""
    estimate = empirical_covariance(plane, "standard", num_seeds=20000)
    assert estimate.max_abs_z < 4.5

def test_empirical_covariance_independent_of_workers():
    """Test worker count does not change estimates"""
    spec = TorusSpec(2, 5)
    with patch.dict(SAMPLING_CONFIG, {"seed_chunk": 64}):
        serial = empirical_covariance(spec, "reduced", num_seeds=500, workers=1)
        threaded = empirical_covariance(spec, "reduced", num_seeds=500, workers=4)
    assert np.array_equal(serial.profile_estimate.values, threaded.profile_estimate.values)

def test_empirical_covariance_rejects_bad_input():
    """Test too few seeds and unknown routes"""
    spec = TorusSpec(1, 3)
    with pytest.raises(ValueError):
        empirical_covariance(spec, num_seeds=50)
    with pytest.raises(ValueError):
        empirical_covariance(spec, "reduced", num_seeds=200, route="white_noise")
    with pytest.raises(ValueError):
        empirical_covariance(spec, num_seeds=200, route="direct")
