"""Stabilizing-gain synthesis from the data consistency set.

Four entry points: centralized synthesis (one LMI), row-structured
synthesis (zero row-blocks of the gain, complete for single-column-block
partitions), block-diagonal-Lyapunov synthesis (arbitrary block pattern on
the gain, complete within the block-diagonal P class), and an exhaustive
scan over patterns ordered by block count.

A certificate is accepted on the strength of its own numbers: the LMI
residual is re-evaluated independently of the solver and must clear
-feas_tol, whatever status the solver reported.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .blockmat import Partition, SparsityStructure
from .coneprog import (
    BlockdiagStructure,
    RowStructure,
    SolveResult,
    SolveStatus,
    SolverSettings,
    assemble_stab_lmi,
    solve,
)
from .datamodel import ConsistencySet
from .verify import residual_min_eig

DEFAULT_FEAS_TOL = 1e-8
MAX_PATTERN_BITS = 20


class SolverFailureError(RuntimeError):
    """Solver crashed or returned unusable output (distinct from infeasibility)."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class Infeasible:
    """Synthesis declared infeasible; carries the solver's account."""

    message: str
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class StabCertificate:
    """Solution of the stabilization LMI: gain K = L P^{-1} plus the
    multipliers and the independently recomputed residual."""

    P: np.ndarray
    L: np.ndarray
    alpha: float
    beta: float
    residual_min_eig: float
    K: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        L = np.atleast_2d(np.asarray(self.L, dtype=float))
        K = np.linalg.solve(P.T, L.T).T
        if np.linalg.norm(K @ P - L) > 1e-9 * max(1.0, np.linalg.norm(L)):
            raise ValueError("K P = L failed to hold; P is too ill-conditioned")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "K", K)

    def scaled(self, s: float) -> "StabCertificate":
        """Rescale (P, L, alpha, beta) by s > 0; K is unchanged and the
        residual scales linearly, so validity is preserved."""
        if s <= 0:
            raise ValueError("scale must be positive")
        return StabCertificate(
            P=s * self.P,
            L=s * self.L,
            alpha=s * self.alpha,
            beta=s * self.beta,
            residual_min_eig=s * self.residual_min_eig,
            diagnostics=dict(self.diagnostics),
        )


SynthesisOutcome = Union[StabCertificate, Infeasible]


def _certificate_from(
    result: SolveResult,
    cset: ConsistencySet,
    B,
    feas_tol: float,
) -> SynthesisOutcome:
    if result.status == SolveStatus.INFEASIBLE:
        return Infeasible(
            f"stabilization LMI infeasible "
            f"(solver status: {result.diagnostics.get('solver_status')})",
            result.diagnostics,
        )
    if result.status == SolveStatus.FAILED:
        raise SolverFailureError(
            f"conic solver failed: {result.diagnostics.get('error') or result.diagnostics}",
            result.diagnostics,
        )
    vals = result.values
    residual = residual_min_eig(
        vals["P"], vals["L"], vals["alpha"], vals["beta"], cset, B
    )
    if residual < -feas_tol:
        # The solver claimed a solution that does not check out numerically;
        # infeasibility cannot be concluded from that.
        raise SolverFailureError(
            f"solution failed the independent residual check "
            f"(min eig {residual:.3e} < -{feas_tol:g}; "
            f"solver status: {result.diagnostics.get('solver_status')})",
            result.diagnostics,
        )
    return StabCertificate(
        P=vals["P"],
        L=vals["L"],
        alpha=vals["alpha"],
        beta=vals["beta"],
        residual_min_eig=residual,
        diagnostics=result.diagnostics,
    )


def synthesize_centralized(
    cset: ConsistencySet,
    B,
    settings: SolverSettings = SolverSettings(),
    feas_tol: float = DEFAULT_FEAS_TOL,
) -> SynthesisOutcome:
    """Solve the centralized stabilization LMI.

    Returns a StabCertificate whose K = L P^{-1} stabilizes every system in
    the consistency set, or Infeasible when the data are not informative
    for quadratic stabilization. Raises SolverFailureError when the solver
    produces neither.
    """
    problem = assemble_stab_lmi(cset, B)
    return _certificate_from(solve(problem, settings), cset, B, feas_tol)


def synthesize_row_structured(
    cset: ConsistencySet,
    B,
    part: Partition,
    sigma_rows,
    settings: SolverSettings = SolverSettings(),
    feas_tol: float = DEFAULT_FEAS_TOL,
) -> SynthesisOutcome:
    """Synthesis with zero row-blocks of L (hence of K) where sigma_rows is 0.

    Complete for its structure class: an Infeasible return means no
    quadratically stabilizing gain with those zero rows exists, because
    zero rows of L and of K = L P^{-1} coincide for every invertible P.
    """
    structure = RowStructure(part, tuple(bool(v) for v in sigma_rows))
    problem = assemble_stab_lmi(cset, B, structure=structure)
    return _certificate_from(solve(problem, settings), cset, B, feas_tol)


def synthesize_blockdiag(
    cset: ConsistencySet,
    B,
    part: Partition,
    sigma,
    settings: SolverSettings = SolverSettings(),
    feas_tol: float = DEFAULT_FEAS_TOL,
) -> SynthesisOutcome:
    """Synthesis with block-diagonal P and gain pattern sigma.

    With P block-diagonal over the column partition, zero blocks of L and
    of K = L P^{-1} coincide, so the pattern constraint is exact; the
    search is complete only within the block-diagonal-Lyapunov class.
    """
    sigma = np.asarray(sigma, dtype=bool)
    structure = BlockdiagStructure(part, sigma)
    problem = assemble_stab_lmi(cset, B, structure=structure)
    return _certificate_from(solve(problem, settings), cset, B, feas_tol)


def enumerate_patterns(k: int, l: int, max_ones: Optional[int] = None):
    """Yield 0/1 patterns of shape (k, l) ordered by ones-count then by
    lexicographic position of the ones; includes the empty pattern."""
    total = k * l
    top = total if max_ones is None else min(max_ones, total)
    for count in range(top + 1):
        for positions in itertools.combinations(range(total), count):
            sigma = np.zeros(total, dtype=bool)
            sigma[list(positions)] = True
            yield sigma.reshape(k, l)


@dataclass(frozen=True)
class ExhaustiveResult:
    """Outcome of the exhaustive pattern scan.

    outcome is "found" (sigma/certificate hold the minimizer), "exhausted"
    (budget hit first), or "all_infeasible". solver_failures counts
    patterns whose solve crashed; completeness claims exclude those.
    """

    outcome: str
    sigma: Optional[SparsityStructure]
    certificate: Optional[StabCertificate]
    n_enumerated: int
    solver_failures: int


def exhaustive_min_bcard(
    cset: ConsistencySet,
    B,
    part: Partition,
    mode: str,
    budget: Optional[int] = None,
    force: bool = False,
    settings: SolverSettings = SolverSettings(),
) -> ExhaustiveResult:
    """Scan sparsity patterns by increasing block count until one admits a
    stabilizing gain.

    mode "rows" uses row-structured synthesis over the k row blocks
    (requires a single column block); mode "blockdiag" uses
    block-diagonal-Lyapunov synthesis over all k*l blocks. The first
    feasible pattern in (count, lexicographic) order is returned, which has
    minimum ones-count within the mode's structure class. Scans beyond
    MAX_PATTERN_BITS pattern bits are refused unless force is set.
    """
    if mode == "rows":
        if part.l != 1:
            raise ValueError("mode 'rows' requires a single column block")
        bits = part.k
    elif mode == "blockdiag":
        bits = part.k * part.l
    else:
        raise ValueError(f"unknown mode {mode!r}; expected 'rows' or 'blockdiag'")
    if bits > MAX_PATTERN_BITS and not force:
        raise ValueError(
            f"{bits} pattern bits exceed the guard of {MAX_PATTERN_BITS}; "
            f"pass force=True to scan anyway"
        )

    n_enumerated = 0
    failures = 0
    if mode == "rows":
        candidates = enumerate_patterns(part.k, 1)
    else:
        candidates = enumerate_patterns(part.k, part.l)
    for sigma in candidates:
        if budget is not None and n_enumerated >= budget:
            return ExhaustiveResult("exhausted", None, None, n_enumerated, failures)
        n_enumerated += 1
        try:
            if mode == "rows":
                outcome = synthesize_row_structured(
                    cset, B, part, tuple(sigma[:, 0]), settings
                )
            else:
                outcome = synthesize_blockdiag(cset, B, part, sigma, settings)
        except SolverFailureError:
            failures += 1
            continue
        if isinstance(outcome, StabCertificate):
            return ExhaustiveResult(
                "found",
                SparsityStructure(sigma, part),
                outcome,
                n_enumerated,
                failures,
            )
    return ExhaustiveResult("all_infeasible", None, None, n_enumerated, failures)
