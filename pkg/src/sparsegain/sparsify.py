"""Reweighted block-norm minimization of the feedback gain's block count.

Each iteration minimizes f_t(L) = sum of w_ij ||(L P_t^{-1})_ij||_F over
the stabilization LMI, with weights w_ij = 1 / ||(K_t)_ij||_F and infinite
weights on blocks already at zero (hard mode: those become equality
constraints). At a fixed point the weighted norm of every live block is 1,
so f equals the block count and the iterate minimizes it.

Two numerical safeguards, both invisible in exact arithmetic:

* The LMI is homogeneous in (P, L, alpha, beta), so the literal per-step
  argmin is scale-degenerate (the objective can be driven to zero by
  shrinking everything). Every step therefore pins trace(P) = n, and the
  initial certificate is rescaled onto that slice. K and the minimizing
  pattern are unchanged by this choice.
* Finite weights are normalized by their maximum inside the solve (the
  argmin is invariant); reported f values are in true units, recomputed
  from the returned iterate.

After the loop the achieved pattern is re-certified by a clean structured
solve (exact for patterns whose zero blocks fill whole rows, attempted via
a block-diagonal Lyapunov matrix otherwise) and the result is passed to
the verifier.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import cvxpy as cp
import numpy as np

from .blockmat import (
    DEFAULT_ZERO_TOL,
    Partition,
    bcard,
    block,
    structure_of,
)
from .coneprog import (
    SolveStatus,
    SolverSettings,
    assemble_reweighted_objective,
    assemble_stab_lmi,
    solve,
)
from .datamodel import ConsistencySet
from .synth import (
    Infeasible,
    SolverFailureError,
    StabCertificate,
    synthesize_blockdiag,
    synthesize_centralized,
    synthesize_row_structured,
)
from .verify import VerificationReport, residual_min_eig as _lmi_residual, verify_gain

DEFAULT_CONV_TOL = 1e-6
DEFAULT_MAX_ITER = 100
DEFAULT_EPSILON = 1e-6

REASON_FIXED_POINT = "fixed point"
REASON_MAX_ITERATIONS = "max iterations"
REASON_SOLVER_FAILURE = "solver failure"


class NotInformativeError(RuntimeError):
    """Raised when sparsification cannot start: the data admit no
    stabilizing certificate at all."""

    def __init__(self, infeasible: Infeasible):
        super().__init__(f"cannot initialize: data not informative ({infeasible.message})")
        self.infeasible = infeasible


@dataclass(frozen=True)
class SparsifyOptions:
    """Knobs of the reweighting loop; defaults follow the module contract."""

    max_iter: int = DEFAULT_MAX_ITER
    conv_tol: float = DEFAULT_CONV_TOL
    zero_tol: float = DEFAULT_ZERO_TOL
    weight_mode: str = "hard"
    epsilon: float = DEFAULT_EPSILON
    verify_samples: int = 100
    verify_seed: int = 0
    settings: SolverSettings = SolverSettings()

    def __post_init__(self):
        if self.weight_mode not in ("hard", "epsilon"):
            raise ValueError("weight_mode must be 'hard' or 'epsilon'")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")


@dataclass(frozen=True)
class ReweightState:
    """One iterate of the loop: certificate values, weights derived from
    K_t = L_t P_t^{-1}, and the objective value f_t achieved at this
    iterate (in true, unnormalized units)."""

    t: int
    L: np.ndarray
    P: np.ndarray
    alpha: float
    beta: float
    weights: np.ndarray
    f_value: float
    K: np.ndarray
    residual_min_eig: float
    solve_status: Optional[SolveStatus] = None
    prev_bcard: Optional[int] = None

    def pattern_bitmap(self, part: Partition, zero_tol: float) -> str:
        sigma = structure_of(self.K, part, zero_tol).sigma
        return "".join("1" if v else "0" for v in sigma.ravel())


@dataclass
class ReweightTrace:
    """Full iterate sequence plus the outcome of the run."""

    states: list
    converged: bool
    reason: str
    part: Partition
    zero_tol: float
    final_certificate: Optional[StabCertificate] = None
    polished: bool = False
    verification: Optional[VerificationReport] = None

    @property
    def final_state(self) -> ReweightState:
        return self.states[-1]

    def iteration_records(self) -> list[dict]:
        """Per-iteration summary used by the trace file and reports."""
        records = []
        for s in self.states:
            records.append(
                {
                    "t": s.t,
                    "bcard": bcard(s.K, self.part, self.zero_tol),
                    "f_value": s.f_value,
                    "pattern": s.pattern_bitmap(self.part, self.zero_tol),
                    "residual_min_eig": s.residual_min_eig,
                    "solve_status": None if s.solve_status is None else s.solve_status.value,
                }
            )
        return records

    def surrogate_violations(self, tol: float = 1e-6) -> list[int]:
        """Iterations whose objective exceeded the previous block count.

        f_t(L_{t+1}) <= bcard(K_t) holds at every exact step because the
        previous iterate is feasible and scores exactly bcard(K_t).
        """
        bad = []
        for s in self.states[1:]:
            if s.prev_bcard is not None and s.f_value > s.prev_bcard + tol:
                bad.append(s.t)
        return bad


def reweight(
    K,
    part: Partition,
    zero_tol: float = DEFAULT_ZERO_TOL,
    mode: str = "hard",
    epsilon: float = DEFAULT_EPSILON,
) -> np.ndarray:
    """Weights for the next minimization, one per block of K.

    Hard mode: 1/||K_ij||_F on nonzero blocks, infinity on blocks at or
    below zero_tol. Epsilon mode: 1/(||K_ij||_F + epsilon) everywhere.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    part.check_shape(K)
    w = np.empty((part.k, part.l))
    for i, j in part.iter_blocks():
        norm = float(np.linalg.norm(block(K, i, j, part)))
        if mode == "epsilon":
            w[i - 1, j - 1] = 1.0 / (norm + epsilon)
        else:
            w[i - 1, j - 1] = np.inf if norm <= zero_tol else 1.0 / norm
    return w


def _true_f_value(L, P_prev, weights, part: Partition) -> float:
    G = L @ np.linalg.inv(P_prev)
    total = 0.0
    for i, j in part.iter_blocks():
        w = weights[i - 1, j - 1]
        if np.isfinite(w):
            total += w * float(np.linalg.norm(block(G, i, j, part)))
    return float(total)


def initialize(
    cset: ConsistencySet,
    B,
    part: Partition,
    opts: SparsifyOptions = SparsifyOptions(),
) -> ReweightState:
    """State t=0 from centralized synthesis, rescaled onto trace(P) = n.

    Raises NotInformativeError when the centralized LMI is infeasible.
    """
    outcome = synthesize_centralized(cset, B, opts.settings)
    if isinstance(outcome, Infeasible):
        raise NotInformativeError(outcome)
    cert = outcome.scaled(cset.n / float(np.trace(outcome.P)))
    weights = reweight(cert.K, part, opts.zero_tol, opts.weight_mode, opts.epsilon)
    f0 = 0.0
    for i, j in part.iter_blocks():
        w = weights[i - 1, j - 1]
        if np.isfinite(w):
            f0 += w * float(np.linalg.norm(block(cert.K, i, j, part)))
    return ReweightState(
        t=0,
        L=cert.L,
        P=cert.P,
        alpha=cert.alpha,
        beta=cert.beta,
        weights=weights,
        f_value=float(f0),
        K=cert.K,
        residual_min_eig=cert.residual_min_eig,
        solve_status=None,
    )


def step(
    cset: ConsistencySet,
    B,
    part: Partition,
    state: ReweightState,
    opts: SparsifyOptions = SparsifyOptions(),
) -> ReweightState:
    """One reweighted minimization from the given state.

    Raises SolverFailureError when the solver returns nothing usable
    (including infeasibility, which with hard zero constraints means the
    locked pattern admits no certificate).
    """
    problem = assemble_stab_lmi(cset, B)
    n = cset.n
    problem.equalities.append(cp.trace(problem.var("P")) == float(n))
    try:
        assemble_reweighted_objective(problem, state.weights, state.P, part)
    except ValueError as exc:
        # An inaccurate previous solve can leave P_t numerically indefinite,
        # in which case no further step can be formed from it.
        raise SolverFailureError(f"cannot form reweighted step: {exc}") from exc
    result = solve(problem, opts.settings)
    if result.status == SolveStatus.INFEASIBLE:
        raise SolverFailureError(
            "reweighted step infeasible: the hard-zero pattern admits no "
            "stabilizing certificate",
            result.diagnostics,
        )
    if not result.ok:
        raise SolverFailureError(
            f"reweighted step failed: {result.diagnostics.get('error') or result.diagnostics}",
            result.diagnostics,
        )
    vals = result.values
    L_new, P_new = vals["L"], vals["P"]
    K_new = np.linalg.solve(P_new.T, L_new.T).T
    f_val = _true_f_value(L_new, state.P, state.weights, part)
    return ReweightState(
        t=state.t + 1,
        L=L_new,
        P=P_new,
        alpha=vals["alpha"],
        beta=vals["beta"],
        weights=reweight(K_new, part, opts.zero_tol, opts.weight_mode, opts.epsilon),
        f_value=f_val,
        K=K_new,
        residual_min_eig=_lmi_residual(P_new, L_new, vals["alpha"], vals["beta"], cset, B),
        solve_status=result.status,
        prev_bcard=bcard(state.K, part, opts.zero_tol),
    )


def _polish(trace: ReweightTrace, cset: ConsistencySet, B, part: Partition,
            opts: SparsifyOptions) -> None:
    """Re-certify the achieved pattern with a clean structured solve.

    The loop's last iterate can carry solver noise at the 1e-5 level; a
    feasibility solve at the fixed pattern restores an interior-point
    certificate without changing which blocks are zero.
    """
    K = trace.final_state.K
    sigma = structure_of(K, part, opts.zero_tol).sigma
    row_complete = all(sigma[i].all() or not sigma[i].any() for i in range(part.k))
    outcome = None
    if row_complete:
        row_part = Partition(part.p, (part.n,))
        outcome = synthesize_row_structured(
            cset, B, row_part, tuple(bool(sigma[i].any()) for i in range(part.k)),
            opts.settings,
        )
    else:
        try:
            outcome = synthesize_blockdiag(cset, B, part, sigma, opts.settings)
        except SolverFailureError:
            outcome = None
    if isinstance(outcome, StabCertificate):
        trace.final_certificate = outcome
        trace.polished = True
    else:
        # Fall back to the raw final iterate; its residual may sit below the
        # verifier's gate, which the verification report will show.
        try:
            trace.final_certificate = StabCertificate(
                P=trace.final_state.P,
                L=trace.final_state.L,
                alpha=trace.final_state.alpha,
                beta=trace.final_state.beta,
                residual_min_eig=trace.final_state.residual_min_eig,
            )
        except ValueError:
            trace.final_certificate = None
        trace.polished = False


def run(
    cset: ConsistencySet,
    B,
    part: Partition,
    opts: SparsifyOptions = SparsifyOptions(),
) -> ReweightTrace:
    """Run the reweighting loop to a fixed point or the iteration cap.

    Convergence requires both a relative K increment at or below conv_tol
    and an unchanged zero pattern. Non-convergence and solver failures are
    reported in the trace, not raised. The final certificate is re-derived
    at the achieved pattern and independently verified.
    """
    state = initialize(cset, B, part, opts)
    trace = ReweightTrace(
        states=[state],
        converged=False,
        reason=REASON_MAX_ITERATIONS,
        part=part,
        zero_tol=opts.zero_tol,
    )
    for _ in range(opts.max_iter):
        prev = state
        try:
            state = step(cset, B, part, prev, opts)
        except SolverFailureError:
            trace.reason = REASON_SOLVER_FAILURE
            break
        trace.states.append(state)
        dK = np.linalg.norm(state.K - prev.K)
        same_pattern = np.array_equal(
            structure_of(state.K, part, opts.zero_tol).sigma,
            structure_of(prev.K, part, opts.zero_tol).sigma,
        )
        if dK <= opts.conv_tol * (1.0 + np.linalg.norm(prev.K)) and same_pattern:
            trace.converged = True
            trace.reason = REASON_FIXED_POINT
            break
    _polish(trace, cset, B, part, opts)
    if trace.final_certificate is not None:
        trace.verification = verify_gain(
            trace.final_certificate,
            cset,
            B,
            n_samples=opts.verify_samples,
            rng_seed=opts.verify_seed,
        )
    return trace
