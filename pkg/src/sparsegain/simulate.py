"""Ground-truth networked systems, noisy rollouts, and the benchmark dataset.

The benchmark dataset is a three-agent chain (two states and one input per
agent) with an energy-bounded noise record, transcribed digit for digit
from its published five-significant-figure form and exposed through
``paper_fixture``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import TrajectoryData, noise_model_from_energy_bound, psd_check


@dataclass(frozen=True)
class SystemModel:
    """True networked system: state matrix A_s, block-diagonal input matrix B,
    and per-agent state/input dimensions."""

    A_s: np.ndarray
    B: np.ndarray
    n_i: tuple[int, ...]
    m_i: tuple[int, ...]

    def __post_init__(self):
        A_s = np.asarray(self.A_s, dtype=float)
        B = np.asarray(self.B, dtype=float)
        n_i = tuple(int(v) for v in self.n_i)
        m_i = tuple(int(v) for v in self.m_i)
        if len(n_i) != len(m_i):
            raise ValueError("n_i and m_i must have one entry per agent")
        n, m = sum(n_i), sum(m_i)
        if A_s.shape != (n, n):
            raise ValueError(f"A_s shape {A_s.shape} does not match n={n}")
        if B.shape != (n, m):
            raise ValueError(f"B shape {B.shape} does not match (n={n}, m={m})")
        mask = np.ones((n, m), dtype=bool)
        r0 = 0
        c0 = 0
        for ni, mi in zip(n_i, m_i):
            mask[r0 : r0 + ni, c0 : c0 + mi] = False
            r0 += ni
            c0 += mi
        if np.any(B[mask] != 0):
            raise ValueError("B must be block-diagonal over the agent partition")
        object.__setattr__(self, "A_s", A_s)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "n_i", n_i)
        object.__setattr__(self, "m_i", m_i)

    @property
    def r(self) -> int:
        return len(self.n_i)

    @property
    def n(self) -> int:
        return self.A_s.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class NoiseRealization:
    """One window of noise samples, one column per time step."""

    W: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "W", np.atleast_2d(np.asarray(self.W, dtype=float)))


def rollout(sys: SystemModel, x0, U, W) -> TrajectoryData:
    """Simulate x(t+1) = A_s x(t) + B u(t) + w(t) and package the window.

    Parameters
    ----------
    sys : SystemModel
    x0 : length-n initial state
    U : (m, T) input matrix
    W : (n, T) noise matrix

    Returns
    -------
    TrajectoryData with X of shape (n, T+1).
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    U = np.atleast_2d(np.asarray(U, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    n, m = sys.n, sys.m
    if x0.shape[0] != n:
        raise ValueError(f"x0 length {x0.shape[0]} does not match n={n}")
    if U.shape[0] != m:
        raise ValueError(f"U row count {U.shape[0]} does not match m={m}")
    T = U.shape[1]
    if W.shape != (n, T):
        raise ValueError(f"W shape {W.shape} does not match (n={n}, T={T})")
    X = np.empty((n, T + 1))
    X[:, 0] = x0
    for t in range(T):
        X[:, t + 1] = sys.A_s @ X[:, t] + sys.B @ U[:, t] + W[:, t]
    return TrajectoryData(X, U)


def sample_noise_within(Q, T: int, rng_seed: int, slack: float = 0.99) -> NoiseRealization:
    """Draw a noise window satisfying the energy bound W W' <= slack * Q.

    Entries are sampled i.i.d. standard normal, then the whole matrix is
    shrunk by the largest factor s <= 1 for which s^2 W W' <= slack * Q.
    Directions outside the range of Q carry no noise at all.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if Q.shape != (n, n) or not np.allclose(Q, Q.T):
        raise ValueError("Q must be square symmetric")
    if not psd_check(Q).ok:
        raise ValueError("Q must be positive semidefinite")
    if not 0 < slack < 1:
        raise ValueError("slack must lie in (0, 1)")
    rng = np.random.default_rng(rng_seed)
    W0 = rng.standard_normal((n, T))
    d, V = np.linalg.eigh(0.5 * (Q + Q.T))
    pos = d > 1e-14 * max(1.0, float(d[-1]))
    Wc = V.T @ W0
    Wc[~pos, :] = 0.0
    if not np.any(pos):
        return NoiseRealization(np.zeros((n, T)))
    scaled = Wc[pos, :] / np.sqrt(d[pos])[:, None]
    lam = float(np.linalg.eigvalsh(scaled @ scaled.T)[-1])
    s = 1.0 if lam <= 0 else min(1.0, np.sqrt(slack / lam))
    return NoiseRealization(V @ (s * Wc))


def random_network_system(
    r: int,
    n_i,
    m_i,
    coupling_density: float,
    rng_seed: int,
) -> SystemModel:
    """Generate a random networked system with block-diagonal B.

    Off-diagonal agent blocks of A_s are zeroed independently with
    probability 1 - coupling_density; each B block is redrawn until it has
    full column rank. Deterministic for a fixed seed.
    """
    n_i = tuple(int(v) for v in n_i)
    m_i = tuple(int(v) for v in m_i)
    if len(n_i) != r or len(m_i) != r:
        raise ValueError("n_i and m_i must each have r entries")
    if any(mi > ni for ni, mi in zip(n_i, m_i)):
        raise ValueError("full column rank requires m_i <= n_i per agent")
    if not 0 <= coupling_density <= 1:
        raise ValueError("coupling_density must lie in [0, 1]")
    rng = np.random.default_rng(rng_seed)
    n, m = sum(n_i), sum(m_i)
    roff = np.cumsum((0,) + n_i)
    coff = np.cumsum((0,) + m_i)
    A = 0.5 * rng.standard_normal((n, n))
    for i in range(r):
        for j in range(r):
            if i != j and rng.random() >= coupling_density:
                A[roff[i] : roff[i + 1], roff[j] : roff[j + 1]] = 0.0
    B = np.zeros((n, m))
    for i, (ni, mi) in enumerate(zip(n_i, m_i)):
        while True:
            blk = rng.standard_normal((ni, mi))
            if np.linalg.matrix_rank(blk) == mi:
                break
        B[roff[i] : roff[i + 1], coff[i] : coff[i + 1]] = blk
    return SystemModel(A, B, n_i, m_i)


_FIXTURE_X = np.array([
    [0.75274, 1.2276, 1.5028, 1.4546, 2.2505, 3.2402, 4.0554, 4.8123, 5.0687, 5.8844, 7.3989],
    [0.48475, 1.6001, 2.0504, 3.067, 5.4602, 8.2031, 11.736, 16.6432, 22.2254, 28.3431, 36.5077],
    [0.62701, 0.28679, 0.56613, 1.9483, 1.9467, 2.3218, 3.3144, 3.4338, 3.7058, 5.0454, 5.0957],
    [0.80199, 0.30132, 0.99168, 2.6294, 4.0138, 5.7936, 8.6326, 12.1519, 16.2375, 21.5731, 27.317],
    [0.11059, 0.60892, 1.6934, 1.9273, 2.9284, 3.9676, 4.7534, 5.4348, 6.8431, 7.5784, 8.6763],
    [0.39059, 1.0436, 2.6886, 4.7617, 6.7268, 10.4199, 15.4993, 21.6268, 29.1105, 37.9496, 47.8538],
])

_FIXTURE_U = np.array([
    [0.39914, 0.59328, 0.21324, 0.20845, 0.72101, 0.71757, 0.39015, 0.12077, 0.61899, 0.8402],
    [0.22042, 0.20061, 0.93207, 0.79012, 0.56395, 0.93289, 0.58158, 0.4449, 0.9393, 0.54806],
    [0.090819, 0.59133, 0.0087293, 0.89861, 0.85981, 0.42837, 0.14863, 0.69451, 0.43057, 0.59851],
])

_FIXTURE_W = 1e-4 * np.array([
    [0.56402, 0.85894, 0.078075, 0.30536, 0.81527, 0.68118, 0.19788, 0.30939, 0.66536, 0.8844],
    [0.21199, 0.93952, 0.38109, 0.63732, 0.34066, 0.82892, 0.067992, 0.74664, 0.63701, 0.16617],
    [0.020618, 0.17608, 0.26612, 0.25169, 0.81665, 0.99683, 0.21282, 0.0048493, 0.20266, 0.57528],
    [0.61413, 0.1923, 0.19338, 0.42205, 0.42013, 0.11501, 0.24711, 0.46404, 0.91496, 0.25192],
    [0.10097, 0.13537, 0.88955, 0.63512, 0.39169, 0.35093, 0.91207, 0.34179, 0.69204, 0.14824],
    [0.35514, 0.51728, 0.61431, 0.50191, 0.33043, 0.84755, 0.31911, 0.24342, 0.93888, 0.53028],
])

_FIXTURE_A = 0.6 * np.array([
    [1, 0, 1, 0, 0, 0],
    [1, 1, 1, 1, 0, 0],
    [0, 0, 0, 0, 1, 0],
    [0, 0, 0, 0, 1, 1],
    [1, 0, 0, 0, 1, 0],
    [1, 1, 0, 0, 1, 1],
], dtype=float)

_FIXTURE_B = np.array([
    [1, 0, 0],
    [0, 0, 0],
    [0, 1, 0],
    [0, 0, 0],
    [0, 0, 1],
    [0, 0, 0],
], dtype=float)


def paper_fixture() -> tuple[SystemModel, TrajectoryData, NoiseRealization, np.ndarray]:
    """Return the benchmark dataset: (system, trajectory, noise, Q).

    Three agents, two states and one input each; trajectory window T = 10;
    energy bound Q = (1/20) I. All matrices are fresh copies.
    """
    sys = SystemModel(_FIXTURE_A.copy(), _FIXTURE_B.copy(), (2, 2, 2), (1, 1, 1))
    data = TrajectoryData(_FIXTURE_X.copy(), _FIXTURE_U.copy())
    noise = NoiseRealization(_FIXTURE_W.copy())
    Q = 0.05 * np.eye(6)
    return sys, data, noise, Q


def fixture_consistency_set():
    """Consistency set built from the benchmark dataset's energy bound."""
    from .datamodel import build_N

    sys, data, noise, Q = paper_fixture()
    model = noise_model_from_energy_bound(Q, data.T)
    return build_N(data, sys.B, model)
