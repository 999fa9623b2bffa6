import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhfluid.errors import DegenerateConditionError, FitError, ParameterError
from bhfluid.hilbert import Sector, enumerate_basis
from bhfluid.observables import (
    conditional_probability,
    correlation_record,
    density,
    friedel_fit,
    global_entanglement,
    observable_record,
    overlap_fidelity,
    pair_correlation,
    pair_matrix,
    purities,
    reduced_density_matrix,
    rescaled_separation,
)
from bhfluid.state import StateVector
from bhfluid.tonks import free_fermion_g2
from oracles import embed, partial_trace_site


def random_state(basis, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    return StateVector(basis, v / np.linalg.norm(v))


@given(seed=st.integers(0, 2**32 - 1), N=st.integers(0, 5))
@settings(max_examples=30, deadline=None)
def test_density_sums_to_particle_number(seed, N):
    basis = enumerate_basis(5, 2, Sector.fixed(N))
    psi = random_state(basis, seed)
    assert density(psi).sum() == pytest.approx(N, abs=1e-10)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_reduced_density_matrix_matches_partial_trace(seed):
    basis = enumerate_basis(4, 2, Sector.enr(4))
    psi = random_state(basis, seed)
    tensor = embed(psi.amplitudes, basis.states, 4, 2)
    for i in range(4):
        rho = reduced_density_matrix(psi, i).matrix
        np.testing.assert_allclose(rho, partial_trace_site(tensor, i), atol=1e-12)
        assert np.trace(rho).real == pytest.approx(1.0)


def test_fixed_number_rdm_is_diagonal():
    basis = enumerate_basis(4, 2, Sector.fixed(3))
    rho = reduced_density_matrix(random_state(basis, 0), 2).matrix
    np.testing.assert_allclose(rho, np.diag(np.diag(rho)), atol=1e-14)


def test_egl_of_product_and_w_states():
    L = 5
    basis = enumerate_basis(L, 1, Sector.fixed(1))
    assert global_entanglement(StateVector.from_fock(basis, (0, 1, 0, 0, 0))) == pytest.approx(0.0, abs=1e-15)
    w = StateVector(basis, np.ones(L) / np.sqrt(L))
    purity = (1 - 1 / L) ** 2 + 1 / L**2
    assert global_entanglement(w) == pytest.approx(2 - 2 * purity, abs=1e-14)
    np.testing.assert_allclose(purities(w), purity)


def test_pair_matrix_brute_force():
    basis = enumerate_basis(3, 3, Sector.fixed(3))
    psi = random_state(basis, 5)
    occ = basis.occupations
    p = psi.probabilities
    nn = pair_matrix(psi)
    for i in range(3):
        for j in range(3):
            expect = sum(pk * (s[i] * (s[j] - (i == j))) for pk, s in zip(p, occ))
            assert nn[i, j] == pytest.approx(expect, abs=1e-12)


def test_g2_of_fock_states():
    basis = enumerate_basis(4, 2, Sector.fixed(2))
    g = pair_correlation(StateVector.from_fock(basis, (1, 0, 1, 0)))
    # nbar = 1/2; one pair at separation 2 out of L - 2 = 2 slots
    np.testing.assert_allclose(g, [0.0, 0.0, (1 / 2) / 0.25, 0.0])
    g = pair_correlation(StateVector.from_fock(basis, (0, 2, 0, 0)))
    assert g[0] == pytest.approx(2 / (4 * 0.25))
    assert np.allclose(rescaled_separation(4, 0.5), [0, 0.5, 1.0, 1.5])


def test_g2_of_empty_lattice_is_degenerate():
    basis = enumerate_basis(3, 1, Sector.fixed(0))
    with pytest.raises(DegenerateConditionError):
        pair_correlation(StateVector.from_fock(basis, (0, 0, 0)))


def test_conditional_probability():
    basis = enumerate_basis(3, 1, Sector.fixed(2))
    v = np.zeros(basis.dim)
    v[basis.index[(1, 1, 0)]] = v[basis.index[(0, 1, 1)]] = 1 / np.sqrt(2)
    P = conditional_probability(StateVector(basis, v))
    # P(0|1) = <n0 n1>/<n1> = 0.5/1
    assert P[0, 1] == pytest.approx(0.5)
    assert P[1, 0] == pytest.approx(1.0)
    assert np.all(np.diag(P) == 0)
    with pytest.raises(DegenerateConditionError):
        conditional_probability(StateVector.from_fock(basis, (1, 1, 0)))


def test_correlation_and_observable_records():
    basis = enumerate_basis(4, 2, Sector.fixed(2))
    psi = random_state(basis, 2)
    rec = correlation_record(psi)
    assert rec.nbar == pytest.approx(0.5)
    ob = observable_record(0.1, psi, reference=psi)
    assert ob.fidelity == pytest.approx(1.0)
    assert ob.egl == pytest.approx(global_entanglement(psi))


def test_overlap_fidelity_properties():
    basis = enumerate_basis(3, 1, Sector.fixed(1))
    a = StateVector.from_fock(basis, (1, 0, 0))
    b = StateVector.from_fock(basis, (0, 1, 0))
    assert overlap_fidelity(a, b) == 0.0
    c = StateVector(basis, np.exp(0.7j) * a.amplitudes)
    assert overlap_fidelity(a, c) == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        overlap_fidelity(a, StateVector.from_fock(enumerate_basis(3, 1, Sector.fixed(2)), (1, 1, 0)))


@pytest.mark.parametrize("k0", [0.6, 1.1, 2.0])
def test_friedel_fit_recovers_synthetic_cosine(k0):
    x = np.arange(9)
    fit = friedel_fit(1 + 0.3 * np.cos(k0 * x), 0.4, model="cosine")
    assert fit.k == pytest.approx(k0, rel=0.05)
    assert fit.oscillating


@pytest.mark.parametrize("N", [3, 4])
def test_friedel_fit_on_free_fermion_g2(N):
    fit = friedel_fit(free_fermion_g2(7, N), N / 7)
    assert fit.k == pytest.approx(np.pi * N / 7, rel=0.15)
    assert fit.oscillating and fit.n_points == 4


def test_friedel_fit_flags_unit_filling():
    assert not friedel_fit(free_fermion_g2(7, 7), 1.0).oscillating
    assert not friedel_fit(np.ones(7), 1.0).oscillating


def test_friedel_fit_errors():
    with pytest.raises(FitError):
        friedel_fit(np.ones(5), 0.5)  # x <= 2.5 leaves three points
    with pytest.raises(FitError):
        friedel_fit(np.ones(9), 0.0)
    with pytest.raises(ParameterError):
        friedel_fit(np.ones(9), 0.5, model="gauss")
