import numpy as np
import pytest

from sparsegain.blockmat import Partition, block
from sparsegain.datamodel import noise_model_from_energy_bound, noise_satisfies
from sparsegain.simulate import (
    SystemModel,
    paper_fixture,
    random_network_system,
    rollout,
    sample_noise_within,
)


def test_rollout_matches_recurrence():
    A = np.array([[0.5, 0.2], [0.0, 0.9]])
    B = np.array([[1.0], [0.0]])
    sysm = SystemModel(A, B, (2,), (1,))
    rng = np.random.default_rng(0)
    x0 = rng.standard_normal(2)
    U = rng.standard_normal((1, 5))
    W = rng.standard_normal((2, 5)) * 0.01
    data = rollout(sysm, x0, U, W)
    assert data.X.shape == (2, 6)
    x = x0.copy()
    for t in range(5):
        x = A @ x + B @ U[:, t] + W[:, t]
        np.testing.assert_allclose(data.X[:, t + 1], x, atol=1e-14)
    np.testing.assert_array_equal(data.U, U)


def test_system_model_requires_blockdiag_B():
    B = np.array([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ValueError):
        SystemModel(np.eye(2), B, (1, 1), (1, 1))


def test_noise_sampler_respects_bound():
    for seed in range(25):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        G = rng.standard_normal((n, n))
        Q = G @ G.T * 0.1
        if seed % 3 == 0:
            # make Q singular: no noise may leave its range
            Q[0, :] = 0.0
            Q[:, 0] = 0.0
        T = int(rng.integers(1, 12))
        noise = sample_noise_within(Q, T, rng_seed=100 + seed)
        model = noise_model_from_energy_bound(Q, T)
        assert noise_satisfies(noise.W, model).ok, (seed, n, T)
        if seed % 3 == 0:
            np.testing.assert_array_equal(noise.W[0], np.zeros(T))


def test_noise_sampler_is_deterministic():
    Q = 0.3 * np.eye(3)
    a = sample_noise_within(Q, 7, rng_seed=42)
    b = sample_noise_within(Q, 7, rng_seed=42)
    np.testing.assert_array_equal(a.W, b.W)


def test_random_network_system_shape_and_rank():
    sysm = random_network_system(3, (2, 1, 2), (1, 1, 2), 0.5, rng_seed=9)
    assert sysm.A_s.shape == (5, 5)
    assert sysm.B.shape == (5, 4)
    part = Partition(sysm.n_i, sysm.m_i)
    for i in range(1, 4):
        for j in range(1, 4):
            blk = block(sysm.B, i, j, part)
            if i != j:
                np.testing.assert_array_equal(blk, np.zeros_like(blk))
    assert np.linalg.matrix_rank(sysm.B) == 4


def test_zero_coupling_density_gives_blockdiag_A():
    sysm = random_network_system(3, (2, 2, 2), (1, 1, 1), 0.0, rng_seed=4)
    part = Partition((2, 2, 2), (2, 2, 2))
    for i in range(1, 4):
        for j in range(1, 4):
            if i != j:
                blk = block(sysm.A_s, i, j, part)
                np.testing.assert_array_equal(blk, np.zeros_like(blk))


def test_random_system_is_deterministic():
    a = random_network_system(2, (1, 1), (1, 1), 0.7, rng_seed=77)
    b = random_network_system(2, (1, 1), (1, 1), 0.7, rng_seed=77)
    np.testing.assert_array_equal(a.A_s, b.A_s)
    np.testing.assert_array_equal(a.B, b.B)


class TestBundledFixture:
    def test_shapes(self):
        sysm, data, noise, Q = paper_fixture()
        assert data.X.shape == (6, 11)
        assert data.U.shape == (3, 10)
        assert noise.W.shape == (6, 10)
        np.testing.assert_array_equal(Q, 0.05 * np.eye(6))
        assert sysm.n_i == (2, 2, 2) and sysm.m_i == (1, 1, 1)

    def test_copies_are_fresh(self):
        a = paper_fixture()[1]
        a.X[0, 0] = 99.0
        b = paper_fixture()[1]
        assert b.X[0, 0] != 99.0

    def test_open_loop_unstable(self):
        sysm = paper_fixture()[0]
        rho = np.abs(np.linalg.eigvals(sysm.A_s)).max()
        assert rho == pytest.approx(1.0529266188610311, rel=1e-12)

    def test_noise_energy(self):
        _, _, noise, Q = paper_fixture()
        lam = np.linalg.eigvalsh(noise.W @ noise.W.T).max()
        assert lam == pytest.approx(1.3710518276813424e-07, rel=1e-9)
        assert noise_satisfies(noise.W, noise_model_from_energy_bound(Q, 10)).ok

    def test_recorded_residual_level(self):
        """The bundled tables only reconcile to about 9e-4 in max norm; the
        value is pinned so any silent change to the arrays is caught."""
        sysm, data, noise, _ = paper_fixture()
        R = data.X_plus - sysm.A_s @ data.X_minus - sysm.B @ data.U - noise.W
        assert np.abs(R).max() == pytest.approx(8.8611199999842659e-04, rel=1e-9)
