import itertools

import numpy as np
import pytest

from bhfluid.errors import ParameterError
from bhfluid.tonks import (
    JastrowWavefunction,
    box_orbitals,
    calibrate_jastrow_scale,
    free_fermion_density,
    free_fermion_g2,
    free_fermion_pair_matrix,
    jastrow_density,
)
from oracles import single_particle_modes


def slater_pair_matrix(L, N):
    """<n_i n_j> by explicit enumeration of Slater determinants over all N-site subsets."""
    modes = single_particle_modes(np.ones(L - 1))[:, :N]  # lowest N modes of -J hopping
    nn = np.zeros((L, L))
    for sites in itertools.combinations(range(L), N):
        w = np.linalg.det(modes[list(sites), :]) ** 2
        for i in sites:
            for j in sites:
                if i != j:
                    nn[i, j] += w
    return nn


def test_orbitals_are_orthonormal():
    orb = box_orbitals(7, 7).orbitals
    np.testing.assert_allclose(orb @ orb.T, np.eye(7), atol=1e-14)


@pytest.mark.parametrize("N", range(0, 8))
def test_density_sums_to_N(N):
    assert free_fermion_density(7, N).sum() == pytest.approx(N, abs=1e-12)


def test_single_particle_density_closed_form():
    L = 7
    i = np.arange(1, L + 1)
    for q in (1, 2):
        phi2 = 2 / (L + 1) * np.sin(q * np.pi * i / (L + 1)) ** 2
        assert np.allclose(box_orbitals(L, q).orbitals[q - 1] ** 2, phi2)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_wick_matches_slater_enumeration(N):
    np.testing.assert_allclose(free_fermion_pair_matrix(7, N), slater_pair_matrix(7, N), atol=1e-12)


def test_g2_limits():
    g = free_fermion_g2(7, 1)
    np.testing.assert_allclose(g, 0.0, atol=1e-14)  # one particle never pairs
    g = free_fermion_g2(7, 7)
    np.testing.assert_allclose(g[1:], 1.0, atol=1e-12)
    assert g[0] == 0.0
    with pytest.raises(ParameterError):
        free_fermion_g2(7, 0)


def test_jastrow_single_particle_is_cosine_squared():
    L = 7
    x = np.arange(1, L + 1) - (L + 1) / 2
    ref = np.cos(np.pi * x / L) ** 2
    np.testing.assert_allclose(jastrow_density(L, 1), ref / ref.sum(), atol=1e-14)


def test_jastrow_properties():
    wf = JastrowWavefunction(7, 3)
    assert wf.amplitude((0, 2, 4)) == pytest.approx(wf.amplitude((4, 0, 2)))
    assert wf.amplitude((1, 1, 3)) == 0.0
    d = jastrow_density(7, 3)
    assert d.sum() == pytest.approx(3.0)
    np.testing.assert_allclose(d, d[::-1], atol=1e-14)
    with pytest.raises(ParameterError):
        JastrowWavefunction(7, 3, scale=-1.0)


def test_calibration_recovers_known_scale():
    ref = jastrow_density(7, 2, scale=9.0)
    cal = calibrate_jastrow_scale(ref, 2)
    assert cal.scale == pytest.approx(9.0, rel=1e-3)
    assert cal.max_rel_error < 1e-4
