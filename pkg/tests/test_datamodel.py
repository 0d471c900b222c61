import numpy as np
import pytest

from sparsegain.datamodel import (
    DegenerateConsistencySetError,
    NoiseModel,
    TrajectoryData,
    build_N,
    noise_model_from_energy_bound,
    noise_satisfies,
    psd_check,
    sigma_center,
    sigma_membership,
)
from sparsegain.simulate import paper_fixture


def fixture_cset():
    sysm, data, _, Q = paper_fixture()
    model = noise_model_from_energy_bound(Q, data.T)
    return sysm, data, build_N(data, sysm.B, model)


def test_trajectory_windows():
    X = np.arange(8, dtype=float).reshape(2, 4)
    data = TrajectoryData(X, np.ones((1, 3)))
    assert data.n == 2 and data.m == 1 and data.T == 3
    np.testing.assert_array_equal(data.X_minus, X[:, :3])
    np.testing.assert_array_equal(data.X_plus, X[:, 1:])


def test_trajectory_rejects_window_mismatch():
    with pytest.raises(ValueError):
        TrajectoryData(np.zeros((2, 4)), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        TrajectoryData(np.zeros((2, 1)), np.zeros((1, 0)))


def test_psd_check_margins():
    assert psd_check(np.eye(2)).ok
    assert psd_check(np.zeros((2, 2))).ok
    # slightly negative eigenvalue passes under the relative tolerance
    assert psd_check(np.diag([1.0, -1e-9])).ok
    res = psd_check(np.diag([1.0, -1e-3]))
    assert not res.ok
    assert res.min_eig == pytest.approx(-1e-3)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(np.eye(2), np.zeros((2, 3)), np.eye(3))  # Phi22 not ND
    model = noise_model_from_energy_bound(0.5 * np.eye(2), 3)
    np.testing.assert_array_equal(model.Phi22, -np.eye(3))
    assert model.full().shape == (5, 5)


def test_noise_satisfies_is_energy_bound():
    model = noise_model_from_energy_bound(np.eye(1), 2)
    assert noise_satisfies([[0.5, 0.5]], model).ok
    assert not noise_satisfies([[1.0, 1.0]], model).ok  # WW' = 2 > 1


def test_build_N_matches_direct_assembly():
    sysm, data, cset = fixture_cset()
    n, T = data.n, data.T
    S = np.block(
        [
            [np.eye(n), data.X_plus - sysm.B @ data.U],
            [np.zeros((n, n)), -data.X_minus],
        ]
    )
    Phi = np.block(
        [
            [0.05 * np.eye(n), np.zeros((n, T))],
            [np.zeros((T, n)), -np.eye(T)],
        ]
    )
    np.testing.assert_allclose(cset.N, S @ Phi @ S.T, atol=1e-12)
    np.testing.assert_array_equal(cset.N, cset.N.T)


def test_fixture_regression_pins():
    """Scalar summaries of the benchmark consistency set, frozen from an
    independent dense computation."""
    sysm, data, cset = fixture_cset()
    assert np.trace(cset.N) == pytest.approx(-17211.044125126402, rel=1e-12)
    assert np.linalg.eigvalsh(cset.N22).max() == pytest.approx(
        -0.10445841068497681, rel=1e-9
    )
    assert sigma_membership(sysm.A_s, cset).min_eig == pytest.approx(
        0.049986346935756661, rel=1e-9
    )


def test_membership_of_center_and_far_matrix():
    sysm, data, cset = fixture_cset()
    center = sigma_center(cset)
    assert sigma_membership(center, cset).ok
    assert np.abs(center - sysm.A_s).max() == pytest.approx(
        1.235455313294085e-3, rel=1e-6
    )
    assert not sigma_membership(sysm.A_s + 10.0, cset).ok


def test_sigma_center_requires_definite_N22():
    # zero data block makes N22 = 0, so the set is unbounded
    N = np.block([[np.eye(2), np.zeros((2, 2))], [np.zeros((2, 2)), np.zeros((2, 2))]])
    with pytest.raises(DegenerateConsistencySetError):
        sigma_center(type(fixture_cset()[2])(N, 2))


def test_noiseless_rich_data_pins_down_the_system():
    """With Q = 0 and full-rank states the consistency set is a singleton."""
    rng = np.random.default_rng(11)
    A = np.array([[0.3, 0.1], [0.0, -0.2]])
    B = np.array([[1.0], [0.5]])
    T = 6
    X = np.zeros((2, T + 1))
    X[:, 0] = rng.standard_normal(2)
    U = rng.standard_normal((1, T))
    for t in range(T):
        X[:, t + 1] = A @ X[:, t] + B @ U[:, t]
    data = TrajectoryData(X, U)
    cset = build_N(data, B, noise_model_from_energy_bound(np.zeros((2, 2)), T))
    center = sigma_center(cset)
    np.testing.assert_allclose(center, A, atol=1e-8)
    assert sigma_membership(A, cset).ok
    assert not sigma_membership(A + 0.01, cset).ok
