"""Independent certificate verification.

Nothing here calls a solver. The stabilization LMI is rebuilt from a
certificate's raw numbers and its minimum eigenvalue reported; the
consistency set is probed by sampling boundary systems along random
directions from its center; each sampled system is subjected to the
closed-loop Lyapunov decrease test.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .datamodel import ConsistencySet, sigma_center, sigma_membership

RESIDUAL_PASS_TOL = 1e-8
BISECTION_TOL = 1e-10
_MAX_BRACKET_DOUBLINGS = 60


def residual_min_eig(P, L, alpha, beta, cset: ConsistencySet, B) -> float:
    """Minimum eigenvalue of the stabilization LMI at the given values.

    Rebuilt with dense linear algebra only; this is the re-check that
    certificates must clear regardless of what the solver reported.
    """
    P = np.asarray(P, dtype=float)
    L = np.atleast_2d(np.asarray(L, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = cset.n
    if P.shape != (n, n):
        raise ValueError(f"P shape {P.shape} does not match n={n}")
    if B.shape[0] != n or L.shape != (B.shape[1], n):
        raise ValueError(
            f"L shape {L.shape} inconsistent with B {B.shape} and n={n}"
        )
    M = np.block(
        [
            [P - beta * np.eye(n) - alpha * cset.N11, -alpha * cset.N12, B @ L],
            [-alpha * cset.N21, -alpha * cset.N22, P],
            [L.T @ B.T, P, P],
        ]
    )
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def check_certificate(cert, cset: ConsistencySet, B) -> float:
    """Residual of the stabilization LMI for a certificate object (anything
    with P, L, alpha, beta attributes)."""
    return residual_min_eig(cert.P, cert.L, cert.alpha, cert.beta, cset, B)


def lyapunov_margin(A, B, K, P) -> float:
    """Minimum eigenvalue of P - (A + B K) P (A + B K)'.

    Positive means the quadratic Lyapunov decrease holds for this A.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    K = np.atleast_2d(np.asarray(K, dtype=float))
    P = np.asarray(P, dtype=float)
    if np.linalg.eigvalsh(0.5 * (P + P.T))[0] <= 0:
        raise ValueError("P must be positive definite")
    Acl = A + B @ K
    return float(np.linalg.eigvalsh(0.5 * ((P - Acl @ P @ Acl.T) + (P - Acl @ P @ Acl.T).T))[0])


def spectral_radius(A) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return float(np.abs(np.linalg.eigvals(A)).max())


def _membership_min_eig(A, cset: ConsistencySet) -> float:
    n = cset.n
    stacked = np.hstack([np.eye(n), A])
    form = stacked @ cset.N @ stacked.T
    return float(np.linalg.eigvalsh(0.5 * (form + form.T))[0])


def sample_sigma_boundary(
    cset: ConsistencySet, count: int, rng_seed: int
) -> list[np.ndarray]:
    """Sample systems on the boundary of the consistency set.

    From the center A_hat, each of count random directions Delta is scaled
    until the membership residual crosses zero; the crossing is located by
    bisection (the residual is a concave quadratic along any line, so the
    crossing is unique for tau > 0). Directions along which the set is
    unbounded are skipped. For a singleton set every sample equals A_hat.
    """
    center = sigma_center(cset)
    n = cset.n
    g0 = _membership_min_eig(center, cset)
    rng = np.random.default_rng(rng_seed)
    samples = []
    for _ in range(count):
        delta = rng.standard_normal((n, n))
        norm = np.linalg.norm(delta)
        if norm == 0.0:
            continue
        delta /= norm
        if g0 <= 0.0:
            # Center already sits on the boundary (degenerate or singleton
            # set); the boundary point along any direction is the center.
            samples.append(center.copy())
            continue
        lo, hi = 0.0, 1.0
        doubled = 0
        while _membership_min_eig(center + hi * delta, cset) >= 0.0:
            lo = hi
            hi *= 2.0
            doubled += 1
            if doubled > _MAX_BRACKET_DOUBLINGS:
                break
        if doubled > _MAX_BRACKET_DOUBLINGS:
            continue
        while hi - lo > BISECTION_TOL:
            mid = 0.5 * (lo + hi)
            if _membership_min_eig(center + mid * delta, cset) >= 0.0:
                lo = mid
            else:
                hi = mid
        samples.append(center + lo * delta)
    return samples


@dataclass(frozen=True)
class VerificationReport:
    """Aggregate verdict over the residual re-check and sampled systems."""

    residual_min_eig: float
    true_system_spectral_radius: Optional[float]
    n_samples: int
    samples_failed: int
    worst_margin: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "residual_min_eig": self.residual_min_eig,
            "true_system_spectral_radius": self.true_system_spectral_radius,
            "n_samples": self.n_samples,
            "samples_failed": self.samples_failed,
            "worst_margin": self.worst_margin,
            "passed": self.passed,
        }


def verify_gain(
    cert,
    cset: ConsistencySet,
    B,
    A_true=None,
    n_samples: int = 100,
    rng_seed: int = 0,
) -> VerificationReport:
    """Verify a certificate against its consistency set.

    Checks the LMI residual exactly, then samples the set's center,
    boundary points, and random interior points (convex combinations of
    center and boundary) and requires a positive Lyapunov margin at every
    one. PASS needs residual >= -1e-8, zero failed samples, and, when the
    true system is supplied, a closed-loop spectral radius below one.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    residual = check_certificate(cert, cset, B)
    K, P = cert.K, cert.P

    rng = np.random.default_rng(rng_seed)
    boundary = sample_sigma_boundary(cset, n_samples, rng_seed)
    center = sigma_center(cset)
    systems = [center] + boundary
    for A_b in boundary:
        lam = rng.uniform(0.0, 1.0)
        systems.append(lam * center + (1.0 - lam) * A_b)

    worst = np.inf
    failed = 0
    for A in systems:
        margin = lyapunov_margin(A, B, K, P)
        worst = min(worst, margin)
        if margin <= 0.0:
            failed += 1

    rho_true = None
    if A_true is not None:
        rho_true = spectral_radius(np.asarray(A_true, dtype=float) + B @ K)

    passed = (
        residual >= -RESIDUAL_PASS_TOL
        and failed == 0
        and (rho_true is None or rho_true < 1.0)
    )
    return VerificationReport(
        residual_min_eig=residual,
        true_system_spectral_radius=rho_true,
        n_samples=len(systems),
        samples_failed=failed,
        worst_margin=float(worst),
        passed=passed,
    )
