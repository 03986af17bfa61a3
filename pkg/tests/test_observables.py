from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from kagome_vqe.ansatz import STAR_ROUNDED, star_ansatz
from kagome_vqe.errors import InvalidArgument
from kagome_vqe.hamiltonian import exact_spectrum, expectation_exact, heisenberg_from_lattice
from kagome_vqe.lattice import MomentumGrid, build_star, build_triangle, in_brillouin_zone, momentum_grid
from kagome_vqe.observables import (
    CorrelationTable,
    StructureFactorMap,
    correlations_exact,
    correlations_from_samples,
    dimer_state,
    fidelity,
    ground_correlations,
    similarity,
    spin_correlation,
    structure_factor,
)
from kagome_vqe.simulator import StateVector, prepare, sample


def _random_state(seed, n):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return StateVector(n, v / np.linalg.norm(v))


def _xyz_tables(state, shots, seed):
    n = state.num_qubits
    return [sample(state, b * n, shots, seed) for b in "XYZ"]


def test_singlet_and_product_correlations():
    assert spin_correlation(StateVector(2, oracles.singlet()), (0, 1))[0] == pytest.approx(-3.0)
    assert spin_correlation(StateVector.zero(2), (0, 1))[0] == pytest.approx(1.0)


def test_triangle_dimer_correlations():
    psi = dimer_state(build_triangle(), [(1, 2)])
    assert spin_correlation(psi, (0, 1))[0] == pytest.approx(0.0, abs=1e-12)
    assert spin_correlation(psi, (1, 2))[0] == pytest.approx(-3.0, abs=1e-12)
    assert spin_correlation(psi, (2, 0))[0] == pytest.approx(0.0, abs=1e-12)


def test_invalid_pair():
    with pytest.raises(InvalidArgument):
        spin_correlation(StateVector.zero(2), (0, 0))
    with pytest.raises(InvalidArgument):
        spin_correlation(StateVector.zero(2), (0, 2))


@given(st.integers(0, 10**6), st.integers(2, 4))
def test_exact_correlations_match_oracle_and_bounds(seed, n):
    state = _random_state(seed, n)
    c = correlations_exact(state).values
    assert np.abs(c - oracles.correlation_matrix(state.amplitudes, n)).max() < 1e-10
    off = c[~np.eye(n, dtype=bool)]
    assert np.all(off >= -3 - 1e-10) and np.all(off <= 1 + 1e-10)
    # sum_ij C_ij = <(sum sigma)^2> >= 0
    assert c.sum() >= -1e-10
    assert np.allclose(np.diag(c), 3.0)


def test_sampled_correlations_agree_with_exact():
    state = _random_state(3, 3)
    sampled = correlations_from_samples(_xyz_tables(state, 10**5, 1))
    exact = correlations_exact(state)
    iu = np.triu_indices(3, 1)
    z = (sampled.values - exact.values)[iu] / sampled.stderr[iu]
    assert np.all(np.abs(z) < 5)


def test_sampled_correlations_need_three_bases():
    state = _random_state(0, 2)
    tables = _xyz_tables(state, 100, 0)
    with pytest.raises(InvalidArgument):
        correlations_from_samples(tables[:2])
    with pytest.raises(InvalidArgument):
        correlations_from_samples([sample(state, "XZ", 100, 0)] + tables[1:])


def test_sampled_error_scales_as_inverse_sqrt_shots():
    state = _random_state(8, 4)
    exact = correlations_exact(state).values
    iu = np.triu_indices(4, 1)
    shots = np.array([10**3, 10**4, 10**5, 10**6])
    rms = []
    for n_shots in shots:
        errs = [
            (correlations_from_samples(_xyz_tables(state, int(n_shots), s)).values - exact)[iu] for s in range(40)
        ]
        rms.append(np.sqrt(np.mean(np.square(errs))))
    slope = np.polyfit(np.log(shots), np.log(rms), 1)[0]
    assert abs(slope + 0.5) < 0.05


def test_structure_factor_trivial_cases():
    frag = build_triangle()
    grid = momentum_grid(9)
    diag = CorrelationTable(3.0 * np.eye(3), np.zeros((3, 3)))
    assert np.allclose(structure_factor(diag, frag, grid).values, 3.0)
    # total-singlet ground states of the star: S(0) = <(sum sigma)^2>/N = 0
    star = build_star()
    corr = ground_correlations(exact_spectrum(star))
    origin = MomentumGrid(np.zeros((1, 2)), np.array([True]), 1)
    assert abs(structure_factor(corr, star, origin).values[0]) < 1e-9


def test_structure_factor_matches_direct_sum_on_star_ground_state():
    star = build_star()
    corr = ground_correlations(exact_spectrum(star))
    grid = momentum_grid(7)
    direct = oracles.structure_factor(corr.values, star.positions, grid.points)
    sf = structure_factor(corr, star, grid)
    assert np.abs(direct.imag).max() < 1e-9
    assert np.abs(sf.values - direct.real).max() < 1e-9


def test_structure_factor_symmetries_on_star():
    star = build_star()
    corr = ground_correlations(exact_spectrum(star))
    rng = np.random.default_rng(0)
    q = rng.uniform(-4, 4, size=(50, 2))
    c, s = np.cos(np.pi / 3), np.sin(np.pi / 3)
    rot = np.array([[c, -s], [s, c]])

    def sf_at(points):
        return structure_factor(corr, star, MomentumGrid(points, in_brillouin_zone(points), 0)).values

    base = sf_at(q)
    assert np.abs(sf_at(-q) - base).max() < 1e-9
    assert np.abs(sf_at(q @ rot.T) - base).max() < 1e-6


def test_structure_factor_rejects_bad_tables():
    frag = build_triangle()
    grid = momentum_grid(3)
    bad = np.full((3, 3), np.nan)
    with pytest.raises(InvalidArgument):
        structure_factor(CorrelationTable(bad, np.zeros((3, 3))), frag, grid)
    asym = 3.0 * np.eye(3)
    asym[0, 1] = 1.0
    with pytest.raises(InvalidArgument):
        structure_factor(CorrelationTable(asym, np.zeros((3, 3))), frag, grid)
    with pytest.raises(InvalidArgument):
        structure_factor(CorrelationTable(np.eye(2), np.zeros((2, 2))), frag, grid)


def test_similarity_examples():
    star = build_star()
    sf = structure_factor(ground_correlations(exact_spectrum(star)), star, momentum_grid(15))
    assert similarity(sf, sf) == pytest.approx((1.0, 0.0))
    shifted = StructureFactorMap(sf.points, sf.values + 0.3, sf.inside_bz, sf.num_sites)
    pearson, mse = similarity(sf, shifted)
    assert pearson == pytest.approx(1.0) and mse == pytest.approx(0.09)
    other = structure_factor(ground_correlations(exact_spectrum(star)), star, momentum_grid(11))
    with pytest.raises(InvalidArgument):
        similarity(sf, other)


def test_dimer_states():
    tri = dimer_state(build_triangle(), [(1, 2)])
    assert expectation_exact(tri, heisenberg_from_lattice(build_triangle())) == pytest.approx(-3.0)
    assert np.allclose(tri.amplitudes, np.kron(oracles.plus(), oracles.singlet()))
    covering = [(1, 2), (3, 4), (5, 6), (7, 8), (9, 10), (11, 0)]
    star = dimer_state(build_star(), covering, fill=None)
    assert expectation_exact(star, heisenberg_from_lattice(build_star())) == pytest.approx(-18.0)
    assert np.allclose(dimer_state(1, []).amplitudes, oracles.plus())
    with pytest.raises(InvalidArgument):
        dimer_state(build_triangle(), [(0, 1), (1, 2)])
    with pytest.raises(InvalidArgument):
        dimer_state(build_triangle(), [(0, 1)], fill=None)


def test_fidelity_examples():
    psi = _random_state(1, 3)
    assert fidelity(psi, psi) == pytest.approx(1.0)
    assert fidelity(StateVector.zero(1), np.array([0, 1])) == 0.0
    with pytest.raises(InvalidArgument):
        fidelity(psi, np.ones(4) / 2)


def test_star_rounded_params_in_ground_subspace():
    spectrum = exact_spectrum(build_star())
    psi = prepare(star_ansatz().bind(STAR_ROUNDED))
    assert fidelity(psi, spectrum.ground_basis) >= 0.999


def test_csv_schemas():
    corr = correlations_exact(StateVector(2, oracles.singlet()))
    assert corr.to_csv() == "i,j,value,stderr\n0,1,-3,0\n"
    sf = structure_factor(corr, build_triangle().__class__("pair", build_triangle().sites[:2], build_triangle().edges[:1]), momentum_grid(2))
    assert sf.to_csv().splitlines()[0] == "qx,qy,S,inside_bz"
    assert len(sf.to_csv().splitlines()) == 5
