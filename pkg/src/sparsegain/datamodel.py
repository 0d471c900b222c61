"""Trajectory data, quadratic noise models, and the data consistency set.

Measurements of x(t+1) = A x(t) + B u(t) + w(t) over a window of length T
are held in X (states, T+1 columns) and U (inputs, T columns).  For a
candidate state matrix A the implied noise is W = X_plus - A X_minus - B U.
The noise model is a quadratic bound

    Phi11 + Phi12 W' + W Phi12' + W Phi22 W' >= 0,   Phi22 < 0,

and the set Sigma of state matrices consistent with the data is encoded by
a single symmetric 2n x 2n matrix N: A is in Sigma exactly when the
quadratic form [I  A] N [I  A]' is positive semidefinite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

DEFAULT_PSD_TOL = 1e-8


class DegenerateConsistencySetError(RuntimeError):
    """Raised when N22 is singular or indefinite (Sigma unbounded)."""


class PsdCheck(NamedTuple):
    ok: bool
    min_eig: float


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def psd_check(M, psd_tol: float = DEFAULT_PSD_TOL) -> PsdCheck:
    """PSD test with a relative margin: passes when the minimum eigenvalue
    of the symmetrized matrix is >= -psd_tol * max(1, ||M||_2)."""
    M = np.asarray(M, dtype=float)
    eigs = np.linalg.eigvalsh(_sym(M))
    min_eig = float(eigs[0])
    scale = max(1.0, float(abs(eigs[-1])), float(abs(eigs[0])))
    return PsdCheck(min_eig >= -psd_tol * scale, min_eig)


@dataclass(frozen=True)
class TrajectoryData:
    """State/input trajectory matrices of one experiment window.

    X has shape (n, T+1) and U shape (m, T); X_plus and X_minus are the
    shifted views used throughout, never stored separately.
    """

    X: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        U = np.atleast_2d(np.asarray(self.U, dtype=float))
        if X.shape[1] != U.shape[1] + 1:
            raise ValueError(
                f"X must have exactly one more column than U; "
                f"got X {X.shape} and U {U.shape}"
            )
        if U.shape[1] < 1:
            raise ValueError("window length T must be at least 1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "U", U)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def T(self) -> int:
        return self.U.shape[1]

    @property
    def X_plus(self) -> np.ndarray:
        return self.X[:, 1:]

    @property
    def X_minus(self) -> np.ndarray:
        return self.X[:, :-1]


@dataclass(frozen=True)
class NoiseModel:
    """Blocks of the quadratic noise bound; Phi22 must be negative definite."""

    Phi11: np.ndarray
    Phi12: np.ndarray
    Phi22: np.ndarray

    def __post_init__(self):
        Phi11 = np.asarray(self.Phi11, dtype=float)
        Phi12 = np.asarray(self.Phi12, dtype=float)
        Phi22 = np.asarray(self.Phi22, dtype=float)
        n = Phi11.shape[0]
        T = Phi22.shape[0]
        if Phi11.shape != (n, n) or not np.allclose(Phi11, Phi11.T):
            raise ValueError("Phi11 must be square symmetric")
        if Phi22.shape != (T, T) or not np.allclose(Phi22, Phi22.T):
            raise ValueError("Phi22 must be square symmetric")
        if Phi12.shape != (n, T):
            raise ValueError(
                f"Phi12 shape {Phi12.shape} inconsistent with n={n}, T={T}"
            )
        if np.linalg.eigvalsh(_sym(Phi22))[-1] >= 0:
            raise ValueError("Phi22 must be negative definite")
        object.__setattr__(self, "Phi11", Phi11)
        object.__setattr__(self, "Phi12", Phi12)
        object.__setattr__(self, "Phi22", Phi22)

    @property
    def n(self) -> int:
        return self.Phi11.shape[0]

    @property
    def T(self) -> int:
        return self.Phi22.shape[0]

    def full(self) -> np.ndarray:
        """Assemble the (n+T) x (n+T) symmetric block matrix."""
        return np.block([[self.Phi11, self.Phi12], [self.Phi12.T, self.Phi22]])


@dataclass(frozen=True)
class ConsistencySet:
    """Symmetric 2n x 2n matrix N encoding Sigma; build via build_N."""

    N: np.ndarray
    n: int

    def __post_init__(self):
        N = np.asarray(self.N, dtype=float)
        if N.shape != (2 * self.n, 2 * self.n):
            raise ValueError(f"N shape {N.shape} does not match n={self.n}")
        object.__setattr__(self, "N", _sym(N))

    @property
    def N11(self) -> np.ndarray:
        return self.N[: self.n, : self.n]

    @property
    def N12(self) -> np.ndarray:
        return self.N[: self.n, self.n :]

    @property
    def N21(self) -> np.ndarray:
        return self.N[self.n :, : self.n]

    @property
    def N22(self) -> np.ndarray:
        return self.N[self.n :, self.n :]


def noise_model_from_energy_bound(Q, T: int) -> NoiseModel:
    """Noise model for an energy bound W W' <= Q.

    Returns Phi11 = Q, Phi12 = 0, Phi22 = -I_T, under which the quadratic
    noise inequality reduces exactly to Q - W W' >= 0.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if Q.shape != (n, n) or not np.allclose(Q, Q.T):
        raise ValueError("Q must be square symmetric")
    if not psd_check(Q).ok:
        raise ValueError("Q must be positive semidefinite")
    if T < 1:
        raise ValueError("window length T must be at least 1")
    return NoiseModel(Q, np.zeros((n, T)), -np.eye(T))


def noise_satisfies(W, model: NoiseModel, psd_tol: float = DEFAULT_PSD_TOL) -> PsdCheck:
    """Evaluate the quadratic noise bound at a concrete noise matrix W."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if W.shape != (model.n, model.T):
        raise ValueError(
            f"W shape {W.shape} does not match model (n={model.n}, T={model.T})"
        )
    R = model.Phi11 + model.Phi12 @ W.T + W @ model.Phi12.T + W @ model.Phi22 @ W.T
    return psd_check(R, psd_tol)


def build_N(data: TrajectoryData, B, model: NoiseModel) -> ConsistencySet:
    """Assemble the consistency-set matrix N from data, B, and noise model.

    N = S Phi S' with S = [[I, X_plus - B U], [0, -X_minus]]; the result is
    symmetrized to remove floating-point asymmetry.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n, T = data.n, data.T
    if B.shape[0] != n or B.shape[1] != data.m:
        raise ValueError(
            f"B shape {B.shape} does not match data (n={n}, m={data.m})"
        )
    if model.n != n or model.T != T:
        raise ValueError(
            f"noise model (n={model.n}, T={model.T}) does not match data "
            f"(n={n}, T={T})"
        )
    S = np.block(
        [
            [np.eye(n), data.X_plus - B @ data.U],
            [np.zeros((n, n)), -data.X_minus],
        ]
    )
    return ConsistencySet(S @ model.full() @ S.T, n)


def sigma_membership(A, cset: ConsistencySet, psd_tol: float = DEFAULT_PSD_TOL) -> PsdCheck:
    """Test whether A belongs to Sigma: PSD-ness of [I  A] N [I  A]'."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = cset.n
    if A.shape != (n, n):
        raise ValueError(f"A shape {A.shape} does not match n={n}")
    stacked = np.hstack([np.eye(n), A])
    return psd_check(stacked @ cset.N @ stacked.T, psd_tol)


def sigma_center(cset: ConsistencySet) -> np.ndarray:
    """Center of the matrix ellipsoid Sigma: A_hat = -N12 N22^{-1}.

    Requires N22 negative definite; otherwise Sigma is unbounded or
    degenerate and no center exists.
    """
    eigs = np.linalg.eigvalsh(_sym(cset.N22))
    if eigs[-1] >= 0:
        raise DegenerateConsistencySetError(
            "consistency set unbounded or degenerate: N22 is not negative definite"
        )
    return -np.linalg.solve(cset.N22.T, cset.N12.T).T
