"""Hand-checkable cases: closed forms on one- and two-site problems."""

import numpy as np
import pytest

from bhfluid.dynamics import PropagatorSettings, evolve
from bhfluid.hamiltonian import build_hamiltonian
from bhfluid.hilbert import Sector, enumerate_basis, hardcore_projection, state_index
from bhfluid.lattice import LatticeConfig
from bhfluid.observables import density, global_entanglement, pair_correlation, reduced_density_matrix
from bhfluid.readout import ConfusionMatrix, apply_confusion, repeat_statistics, sample_shots
from bhfluid.schedule import RampSchedule, Segment
from bhfluid.state import StateVector
from bhfluid.tonks import free_fermion_density


def hold(profile, duration):
    profile = np.asarray(profile, dtype=float)
    return RampSchedule((Segment("hold", duration, profile, profile),))


def dimer(J=40.0):
    return LatticeConfig(
        L=2, J=[J], U=[-900.0, -900.0], delta_large=[0.0, 0.0], delta_small=[0.0, 0.0], gamma1=[0.0, 0.0]
    )


@pytest.mark.parametrize(
    "L, n_max, N, dim",
    [(2, 1, 1, 2), (7, 1, 3, 35), (7, 3, 3, 84)],
)
def test_sector_dimensions(L, n_max, N, dim):
    assert enumerate_basis(L, n_max, Sector.fixed(N)).dim == dim


def test_hardcore_projection_dimensions():
    assert hardcore_projection(enumerate_basis(7, 3, Sector.fixed(2))).dim == 21
    assert hardcore_projection(enumerate_basis(7, 3, Sector.fixed(7))).dim == 1


def test_state_index_endpoints():
    basis = enumerate_basis(7, 3, Sector.fixed(3))
    assert state_index(basis, basis.states[0]) == 0
    assert state_index(basis, basis.states[-1]) == basis.dim - 1


@pytest.mark.parametrize("t", [0.0, 0.004, 0.013, 0.031])
def test_two_site_rabi_oscillation(t):
    config = dimer()
    basis = enumerate_basis(2, 3, Sector.fixed(1))
    psi0 = StateVector.from_fock(basis, (1, 0))
    out = psi0 if t == 0 else evolve(psi0, hold([0.0, 0.0], t), config, PropagatorSettings())
    assert density(out)[0] == pytest.approx(np.cos(40.0 * t) ** 2, abs=1e-6)


def test_eigenstate_is_stationary_and_zero_time_is_identity(chain4):
    basis = enumerate_basis(4, 3, Sector.fixed(2))
    H = build_hamiltonian(chain4, chain4.delta_small, basis).toarray()
    vec = np.linalg.eigh(H)[1][:, -1]
    psi = StateVector(basis, vec.astype(complex))
    sched = hold(chain4.delta_small, 0.2)
    out = evolve(psi, sched, chain4, PropagatorSettings(method="magnus4"))
    assert abs(np.vdot(vec, out.amplitudes)) ** 2 == pytest.approx(1.0, abs=1e-10)
    # RK4 is slightly dissipative; its loss is held under the 1e-9 norm budget
    out = evolve(psi, sched, chain4, PropagatorSettings())
    assert abs(np.vdot(vec, out.amplitudes)) ** 2 == pytest.approx(1.0, abs=1e-9)
    same = evolve(psi, hold(chain4.delta_small, 0.0), chain4, PropagatorSettings())
    np.testing.assert_array_equal(same.amplitudes, psi.amplitudes)


def test_fock_and_unit_filled_densities():
    basis = enumerate_basis(4, 3, Sector.fixed(4))
    np.testing.assert_array_equal(density(StateVector.from_fock(basis, (2, 0, 1, 1))), [2, 0, 1, 1])
    hc = hardcore_projection(basis)
    np.testing.assert_allclose(density(StateVector.from_fock(hc, (1, 1, 1, 1))), np.ones(4))


def test_delocalized_single_particle_on_two_sites():
    basis = enumerate_basis(2, 3, Sector.fixed(1))
    psi = StateVector(basis, np.array([1.0, 1.0], dtype=complex) / np.sqrt(2))
    for site in (0, 1):
        rho = reduced_density_matrix(psi, site).matrix
        np.testing.assert_allclose(rho[:2, :2], np.diag([0.5, 0.5]), atol=1e-15)
    assert global_entanglement(psi) == pytest.approx(1.0, abs=1e-12)


def test_hardcore_pair_correlation_vanishes_on_site():
    basis = hardcore_projection(enumerate_basis(5, 3, Sector.fixed(2)))
    rng = np.random.default_rng(3)
    v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    g2 = pair_correlation(StateVector(basis, v / np.linalg.norm(v)))
    assert g2[0] == 0.0


def test_free_fermions_at_unit_filling():
    np.testing.assert_allclose(free_fermion_density(7, 7), np.ones(7), atol=1e-12)


def test_apply_confusion_small_example():
    F = ConfusionMatrix([[0.9, 0.2], [0.1, 0.8]])
    np.testing.assert_allclose(apply_confusion(F, [0.5, 0.5]), [0.55, 0.45], atol=1e-15)
    np.testing.assert_array_equal(apply_confusion(ConfusionMatrix.identity(), [0.3, 0.7]), [0.3, 0.7])


def test_shot_sampling_edge_and_binomial_bound():
    assert list(sample_shots([1.0, 0.0], 500, seed=1).counts) == [500, 0]
    n, p = 4000, 0.3
    k = sample_shots([1 - p, p], n, seed=2).counts[1]
    assert abs(k - n * p) < 4 * np.sqrt(n * p * (1 - p))


def test_repeat_statistics_small_examples():
    assert repeat_statistics([0.0, 2.0]) == pytest.approx((1.0, 1.0))
    assert repeat_statistics([0.4, 0.4, 0.4])[1] == 0.0
