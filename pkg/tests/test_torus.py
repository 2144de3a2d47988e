"""
Tests for torus index sets and lattice geometry.
"""

from collections import Counter

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from src.torus import (
    Sign,
    TorusSpec,
    canonical_sign,
    canonical_signs,
    cube_index,
    frequency_grid,
    frequency_set,
    grid_cube_indices,
    in_band,
    lattice_points,
    torus_distance,
)


def test_torus_spec_sizes():
    """Test lattice sizes"""
    spec = TorusSpec(2, 9)
    assert spec.N == 81
    assert spec.half == 4
    assert spec.shape == (9, 9)

@pytest.mark.parametrize("L", [2, 4, 1, 0])
def test_even_or_small_lattice_rejected(L):
    """Test even or small L"""
    with pytest.raises(ValueError, match="odd"):
        TorusSpec(1, L)

def test_bad_dimension_rejected():
    """Test n must be positive"""
    with pytest.raises(ValueError):
        TorusSpec(0, 3)

def test_frequency_set_order():
    """Test frequency order is row-major"""
    spec = TorusSpec(2, 3)
    freqs = frequency_set(spec)
    assert len(freqs) == 9
    assert freqs[0] == (-1, -1)
    assert freqs[-1] == (1, 1)
    assert np.array_equal(frequency_grid(2, 3).reshape(-1, 2), np.array(freqs))

def test_in_band():
    """Test band membership"""
    assert in_band((1, -1), 3)
    assert not in_band((2, 0), 3)

def test_torus_distance_wraps():
    """Test distances wrap around the torus"""
    assert torus_distance([0.1], [0.9]) == pytest.approx(0.2)
    assert torus_distance([0.0, 0.0], [0.5, 0.5]) == pytest.approx(np.sqrt(0.5))
    assert torus_distance([1.25], [0.25]) == pytest.approx(0.0)

@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_torus_distance_symmetric_and_bounded(x, y):
    """Test distances are symmetric and at most √n/2"""
    d = torus_distance(x, y)
    assert d == pytest.approx(torus_distance(y, x))
    assert 0.0 <= d <= np.sqrt(2) / 2 + 1e-12

def test_canonical_sign_split():
    """Test canonical signs"""
    assert canonical_sign((0, 0)) is Sign.ZERO
    assert canonical_sign((0, 2)) is Sign.PLUS
    assert canonical_sign((0, -2)) is Sign.MINUS
    assert canonical_sign((-1, 5)) is Sign.MINUS

def test_canonical_signs_antisymmetric():
    """Test z and -z have opposite signs"""
    freqs = frequency_grid(3, 5).reshape(-1, 3)
    signs = canonical_signs(freqs)
    assert np.array_equal(signs, -canonical_signs(-freqs))
    assert np.sum(signs == 0) == 1
    assert np.sum(signs > 0) == (125 - 1) // 2

def test_cube_index():
    """Test cube indices with wrapping"""
    spec = TorusSpec(1, 3)
    assert cube_index([0.0], spec) == (0,)
    assert cube_index([0.1], spec) == (0,)
    assert cube_index([0.2], spec) == (1,)
    assert cube_index([0.9], spec) == (0,)
    assert cube_index([-0.1], spec) == (0,)

def test_grid_cube_indices_matches_cube_index():
    """Test integer cube indices agree with cube_index"""
    spec = TorusSpec(1, 3)
    M = 27
    expected = [cube_index([j / M], spec)[0] for j in range(M)]
    assert list(grid_cube_indices(M, 3)) == expected

def test_grid_cube_indices_balanced():
    """Test every cube gets the same number of fine points per axis"""
    counts = np.bincount(grid_cube_indices(45, 9), minlength=9)
    assert np.all(counts == 5)

def test_lattice_points():
    """Test grid point coordinates"""
    points = lattice_points(3, 2)
    assert points.shape == (9, 2)
    assert np.allclose(points[1], [0.0, 1 / 3])

@given(st.lists(st.lists(st.floats(-3, 3), min_size=3, max_size=3), min_size=3, max_size=3))
def test_torus_distance_triangle_inequality(points):
    """Test the wrapped distance obeys the triangle inequality"""
    x, y, z = points
    assert torus_distance(x, z) <= torus_distance(x, y) + torus_distance(y, z) + 1e-12

@pytest.mark.parametrize("n,L,M", [(2, 3, 9), (2, 5, 15), (3, 3, 9), (2, 3, 3)])
def test_cube_partition_counts(n, L, M):
    """Test every lattice cube owns (M/L)^n points of the fine grid"""
    spec = TorusSpec(n, L)
    counts = Counter(cube_index(x, spec) for x in lattice_points(M, n))
    assert len(counts) == L ** n
    assert set(counts.values()) == {(M // L) ** n}
