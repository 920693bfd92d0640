import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import driftlab as dl
from driftlab.errors import InvalidArgument, OutOfRange
from helpers import sphere_eigenvalue_oracle


def test_sphere_spectrum_matches_fd_eigensolver_oracle():
    # independent oracle: finite-difference Laplace-Beltrami eigenvalues on
    # a latitude-longitude grid of the round 2-sphere, Richardson refined
    oracle = sphere_eigenvalue_oracle(9)
    spec = dl.sphere_spectrum(2, 1.0, 3)
    expanded = np.repeat(spec.distinct_eigenvalues, spec.multiplicities)
    assert expanded.size == 9
    assert np.all(np.abs(oracle - expanded) <= 5e-3 * np.maximum(expanded, 1.0))
    assert spec.distinct_eigenvalues == (0.0, 2.0, 6.0)
    assert spec.multiplicities == (1, 3, 5)


def test_sphere_spectrum_scaled_by_half_of_oracle():
    base = dl.sphere_spectrum(2, 1.0, 4)
    spec = dl.sphere_spectrum(2, 2.0, 4)
    assert np.allclose(np.array(spec.distinct_eigenvalues) * 2.0,
                       base.distinct_eigenvalues)
    assert spec.distinct_eigenvalues == (0.0, 1.0, 3.0, 6.0)
    assert spec.multiplicities == (1, 3, 5, 7)


@pytest.mark.parametrize("dim,scale", [(1, 1.0), (2, 0.5), (5, 3.0)])
def test_single_level_is_constants(dim, scale):
    spec = dl.sphere_spectrum(dim, scale, 1)
    assert spec.distinct_eigenvalues == (0.0,)
    assert spec.multiplicities == (1,)


def brute_force_torus(lengths, cutoff, kmax=30):
    base = [(2 * np.pi / L) ** 2 for L in lengths]
    counts = {}
    for vec in itertools.product(range(-kmax, kmax + 1), repeat=len(lengths)):
        val = round(sum(b * k * k for b, k in zip(base, vec)), 12)
        if val <= cutoff:
            counts[val] = counts.get(val, 0) + 1
    return sorted(counts.items())


def test_torus_spectrum_against_lattice_enumeration():
    spec = dl.torus_spectrum([2 * np.pi, 2 * np.pi], 3)
    oracle = brute_force_torus([2 * np.pi, 2 * np.pi], cutoff=2.0)
    assert spec.distinct_eigenvalues == tuple(v for v, _ in oracle)
    assert spec.multiplicities == tuple(m for _, m in oracle)
    assert spec.distinct_eigenvalues == (0.0, 1.0, 2.0)
    assert spec.multiplicities == (1, 4, 4)


def test_torus_spectrum_one_dimensional():
    spec = dl.torus_spectrum([2 * np.pi], 2)
    assert spec.distinct_eigenvalues == (0.0, 1.0)
    assert spec.multiplicities == (1, 2)


def test_torus_spectrum_generic_lengths():
    lengths = [2 * np.pi, np.pi]
    spec = dl.torus_spectrum(lengths, 5)
    oracle = brute_force_torus(lengths, cutoff=spec.distinct_eigenvalues[-1])
    assert np.allclose(spec.distinct_eigenvalues, [v for v, _ in oracle][:5])
    assert spec.multiplicities == tuple(m for _, m in oracle)[:5]


def test_torus_errors():
    with pytest.raises(InvalidArgument):
        dl.torus_spectrum([], 3)
    with pytest.raises(InvalidArgument):
        dl.torus_spectrum([1.0, -2.0], 3)


def test_sphere_errors():
    with pytest.raises(InvalidArgument):
        dl.sphere_spectrum(2, -1.0, 3)
    with pytest.raises(InvalidArgument):
        dl.sphere_spectrum(0, 1.0, 3)


def test_dimension_count_examples(spectrum):
    assert dl.dimension_count(spectrum, 1.0) == 4
    assert dl.dimension_count(spectrum, 0.5) == 1
    assert dl.dimension_count(spectrum, 3.0) == 9
    assert dl.dimension_count(spectrum, -2.0) == 0


def test_dimension_count_truncation_errors(spectrum):
    with pytest.raises(OutOfRange):
        dl.dimension_count(spectrum, 7.0)


def test_dimension_count_is_step_function(spectrum):
    lam = np.array(spectrum.distinct_eigenvalues)
    mult = np.array(spectrum.multiplicities)
    prev = 0
    for k, (v, m) in enumerate(zip(lam, mult)):
        below = dl.dimension_count(spectrum, v - 1e-9) if v > 0 else 0
        at = dl.dimension_count(spectrum, v)
        assert at - below == m
        assert below == prev
        prev = at


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=4), st.integers(min_value=1, max_value=6),
       st.floats(min_value=0.1, max_value=10.0, allow_nan=False))
def test_mode_index_round_trips(dim, count, scale):
    spec = dl.sphere_spectrum(dim, scale, count)
    for flat in range(spec.n_modes):
        k, j = spec.mode_index(flat)
        assert 0 <= j < spec.multiplicities[k]
        assert spec.flat_index(k, j) == flat
    with pytest.raises(OutOfRange):
        spec.mode_index(spec.n_modes)


def test_spectrum_invariants_rejected():
    with pytest.raises(InvalidArgument):
        dl.Spectrum(2, 1.0, (0.0, 1.0, 0.5), (1, 3, 5))
    with pytest.raises(InvalidArgument):
        dl.Spectrum(2, 1.0, (0.1, 1.0), (1, 3))
    with pytest.raises(InvalidArgument):
        dl.Spectrum(2, 1.0, (0.0, 1.0), (2, 3))


def test_spectrum_table_serialization(spectrum):
    table = spectrum.to_table()
    lines = table.strip().splitlines()
    assert lines[0] == "k,lambda,multiplicity"
    assert len(lines) == 1 + spectrum.n_levels
    k, lam, m = lines[2].split(",")
    assert int(k) == 1 and float(lam) == 1.0 and int(m) == 3
