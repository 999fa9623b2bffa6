import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhfluid.errors import ConditioningError, ParameterError
from bhfluid.hilbert import Sector, enumerate_basis
from bhfluid.readout import (
    ConfusionMatrix,
    apply_confusion,
    correct_confusion,
    estimate_confusion,
    estimate_densities,
    pair_outcomes,
    repeat_statistics,
    sample_shots,
    site_outcomes,
)
from bhfluid.state import StateVector

errors = st.floats(0.0, 0.3)


@given(a=errors, b=errors, c=errors, d=errors, p=st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4))
@settings(max_examples=50, deadline=None)
def test_two_site_round_trip(a, b, c, d, p):
    F = ConfusionMatrix.from_errors(a, b).tensor(ConfusionMatrix.from_errors(c, d))
    p = np.array(p) / np.sum(p)
    back = correct_confusion(F, apply_confusion(F, p))
    np.testing.assert_allclose(back.p, p, atol=1e-10)


def test_kron_ordering_first_site_is_high_bit():
    Fi = ConfusionMatrix.from_errors(0.1, 0.0)
    Fj = ConfusionMatrix.identity()
    F = Fi.tensor(Fj).F
    # true outcome (b_i, b_j) = (0, 1) -> index 1; site i can flip 0 -> 1 giving index 3
    assert F[3, 1] == pytest.approx(0.1)
    assert F[1, 1] == pytest.approx(0.9)


def test_from_fidelity_is_symmetric():
    F = ConfusionMatrix.from_fidelity(0.9).F
    np.testing.assert_allclose(F, [[0.9, 0.1], [0.1, 0.9]])


def test_validation():
    with pytest.raises(ParameterError):
        ConfusionMatrix(np.eye(3))
    with pytest.raises(ParameterError):
        ConfusionMatrix([[0.5, 0.5], [0.4, 0.5]])
    with pytest.raises(ParameterError):
        ConfusionMatrix([[1.2, 0.0], [-0.2, 1.0]])
    with pytest.raises(ParameterError):
        ConfusionMatrix.from_fidelity(0.4)
    with pytest.raises(ParameterError):
        apply_confusion(ConfusionMatrix.identity(), [0.5, 0.6])


def test_ill_conditioned_matrix_is_refused():
    F = ConfusionMatrix([[0.5 + 1e-8, 0.5], [0.5 - 1e-8, 0.5]])
    with pytest.raises(ConditioningError):
        correct_confusion(F, [0.5, 0.5])


def test_correction_clamps_unphysical_estimates():
    F = ConfusionMatrix.from_fidelity(0.9)
    out = correct_confusion(F, [0.95, 0.05])  # below the floor of 0.1 false positives
    assert out.raw[1] < 0
    np.testing.assert_allclose(out.p, [1.0, 0.0])


def test_json_round_trip(tmp_path):
    F = ConfusionMatrix.from_errors(0.03, 0.08)
    path = tmp_path / "F.json"
    path.write_text(F.to_json())
    np.testing.assert_array_equal(ConfusionMatrix.load(path).F, F.F)
    with pytest.raises(ParameterError):
        ConfusionMatrix.from_json("{}")


def test_sampling_is_seeded():
    a = sample_shots([0.2, 0.8], 1000, seed=11)
    b = sample_shots([0.2, 0.8], 1000, seed=11)
    np.testing.assert_array_equal(a.counts, b.counts)
    assert a.counts.sum() == 1000
    assert a.frequencies.sum() == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        sample_shots([0.2, 0.8], 0, seed=0)


def test_estimate_confusion_from_calibration():
    F = estimate_confusion([90, 10], [20, 80])
    np.testing.assert_allclose(F.F, [[0.9, 0.2], [0.1, 0.8]])


def test_repeat_statistics():
    m, s = repeat_statistics([1.0, 2.0, 3.0, 4.0])
    assert m == 2.5
    assert s == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    with pytest.raises(ParameterError):
        repeat_statistics([1.0])


def test_site_and_pair_outcomes():
    basis = enumerate_basis(3, 2, Sector.fixed(2))
    v = np.zeros(basis.dim)
    v[basis.index[(2, 0, 0)]] = np.sqrt(0.5)
    v[basis.index[(0, 1, 1)]] = np.sqrt(0.5)
    psi = StateVector(basis, v)
    np.testing.assert_allclose(site_outcomes(psi, 0), [0.5, 0.5])
    np.testing.assert_allclose(pair_outcomes(psi, 0, 1), [0.0, 0.5, 0.5, 0.0])


def test_density_estimate_is_unbiased_and_seeded():
    p = np.array([0.1, 0.5, 0.8])
    F = [ConfusionMatrix.from_fidelity(0.92)] * 3
    est = estimate_densities(p, F, 4000, 8, seed=5)
    again = estimate_densities(p, F, 4000, 8, seed=5)
    np.testing.assert_array_equal(est.per_repeat, again.per_repeat)
    assert est.counts.shape == (8, 3, 2) and np.all(est.counts.sum(axis=2) == 4000)
    assert np.all(np.abs(est.mean - p) < 5 * est.sem + 1e-12)
