"""Conic-program assembly and the solver contract.

The stabilization condition is one linear matrix inequality in (P, L,
alpha, beta): the 3n x 3n block matrix

    [[P - beta I - alpha N11,  -alpha N12,  B L],
     [-alpha N21,              -alpha N22,  P  ],
     [L' B',                   P,           P  ]]  >= 0

together with P >= p_min I, alpha >= 0, beta >= beta_min.  The gain is
recovered as K = L P^{-1}.  Sparsification adds a weighted sum of block
Frobenius norms of L P_t^{-1} as the objective, with infinite weights
lowered to hard equality constraints.

N enters the LMI only through the products alpha * Nij, so the problem is
assembled against N / ||N||_2 and alpha is rescaled on extraction; solver
conditioning improves by the norm of N while returned certificates stay
in the caller's frame.

Solved values are never trusted blindly: every PSD constraint is
re-evaluated numerically and a claimed optimal status is downgraded to
inaccurate when a residual exceeds feas_tol.
"""

from __future__ import annotations

import enum
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import cvxpy as cp
import numpy as np

from .blockmat import Partition
from .datamodel import ConsistencySet

DEFAULT_P_MIN = 1e-6
DEFAULT_BETA_MIN = 1e-6
DEFAULT_FEAS_TOL = 1e-8


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    INACCURATE = "inaccurate"
    FAILED = "failed"

    @property
    def has_values(self) -> bool:
        return self in (SolveStatus.OPTIMAL, SolveStatus.INACCURATE)


@dataclass(frozen=True)
class RowStructure:
    """Row structure: L row-blocks forced to zero where sigma_rows is
    False. Requires a single column block (l = 1)."""

    partition: Partition
    sigma_rows: tuple[bool, ...]

    def __post_init__(self):
        if self.partition.l != 1:
            raise ValueError("row structure requires a single column block")
        if len(self.sigma_rows) != self.partition.k:
            raise ValueError("sigma_rows must have one entry per row block")
        object.__setattr__(self, "sigma_rows", tuple(bool(v) for v in self.sigma_rows))


@dataclass(frozen=True)
class BlockdiagStructure:
    """Block-diagonal Lyapunov structure: P block-diagonal over the column
    partition q, and L blocks forced to zero where sigma is 0."""

    partition: Partition
    sigma: np.ndarray

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=bool)
        if sigma.shape != (self.partition.k, self.partition.l):
            raise ValueError(
                f"sigma shape {sigma.shape} does not match partition blocks"
            )
        object.__setattr__(self, "sigma", sigma)


@dataclass
class ConeProblem:
    """Carrier for an assembled conic problem.

    variables maps names to cvxpy variables; psd_constraints holds affine
    symmetric expressions constrained PSD; equalities holds affine equality
    constraints; objective_terms holds (weight, affine matrix expression)
    pairs whose weighted Frobenius norms are minimized (empty = feasibility).
    value_scales maps variable names to multipliers applied on extraction.
    """

    variables: dict
    psd_constraints: list
    equalities: list = field(default_factory=list)
    objective_terms: list = field(default_factory=list)
    value_scales: dict = field(default_factory=dict)
    objective_offset: float = 0.0

    def var(self, name: str):
        return self.variables[name]

    def add_equality(self, expr) -> None:
        self.equalities.append(expr == 0)


@dataclass(frozen=True)
class SolverSettings:
    """Backend selection and tolerances for solve()."""

    solver: str = "CLARABEL"
    fallback: Optional[str] = "SCS"
    feas_tol: float = DEFAULT_FEAS_TOL
    clarabel_tol: float = 5e-10
    scs_eps: float = 1e-8
    verbose: bool = False


@dataclass(frozen=True)
class SolveResult:
    """Solver outcome; values present iff status is optimal or inaccurate."""

    status: SolveStatus
    values: Optional[dict]
    objective: Optional[float]
    diagnostics: dict

    @property
    def ok(self) -> bool:
        return self.status.has_values


def assemble_stab_lmi(
    cset: ConsistencySet,
    B,
    structure=None,
    p_min: float = DEFAULT_P_MIN,
    beta_min: float = DEFAULT_BETA_MIN,
) -> ConeProblem:
    """Assemble the stabilization LMI as a ConeProblem.

    structure may be None (centralized), a RowStructure (zero row-blocks of
    L), or a BlockdiagStructure (block-diagonal P plus zero blocks of L).
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = cset.n
    m = B.shape[1]
    if B.shape[0] != n:
        raise ValueError(f"B row count {B.shape[0]} does not match n={n}")

    scale = float(np.linalg.norm(cset.N, 2))
    if scale == 0.0:
        scale = 1.0
    Ns = cset.N / scale
    N11, N12 = Ns[:n, :n], Ns[:n, n:]
    N21, N22 = Ns[n:, :n], Ns[n:, n:]

    P = cp.Variable((n, n), symmetric=True, name="P")
    L = cp.Variable((m, n), name="L")
    alpha = cp.Variable(nonneg=True, name="alpha")
    beta = cp.Variable(name="beta")

    M = cp.bmat(
        [
            [P - beta * np.eye(n) - alpha * N11, -alpha * N12, B @ L],
            [-alpha * N21, -alpha * N22, P],
            [L.T @ B.T, P, P],
        ]
    )
    # beta >= beta_min enters as a 1x1 PSD block so the problem stays in
    # pure PSD-plus-equality form.
    psd = [M, P - p_min * np.eye(n), cp.reshape(beta - beta_min, (1, 1), order="F")]
    equalities = []

    if isinstance(structure, RowStructure):
        part = structure.partition
        if part.m != m:
            raise ValueError("structure partition rows do not match L")
        for i in range(1, part.k + 1):
            if not structure.sigma_rows[i - 1]:
                equalities.append(L[part.row_slice(i), :] == 0)
    elif isinstance(structure, BlockdiagStructure):
        part = structure.partition
        if part.m != m or part.n != n:
            raise ValueError("structure partition does not match L")
        qoff = np.cumsum((0,) + part.q)
        for a in range(part.l):
            for b in range(part.l):
                if a != b:
                    equalities.append(
                        P[qoff[a] : qoff[a + 1], qoff[b] : qoff[b + 1]] == 0
                    )
        for i in range(1, part.k + 1):
            for j in range(1, part.l + 1):
                if not structure.sigma[i - 1, j - 1]:
                    equalities.append(L[part.row_slice(i), part.col_slice(j)] == 0)
    elif structure is not None:
        raise ValueError(f"unknown structure type: {structure!r}")

    return ConeProblem(
        variables={"P": P, "L": L, "alpha": alpha, "beta": beta},
        psd_constraints=psd,
        equalities=equalities,
        value_scales={"alpha": 1.0 / scale},
    )


def assemble_reweighted_objective(
    problem: ConeProblem,
    weights,
    P_fixed,
    part: Partition,
) -> ConeProblem:
    """Attach the reweighted block-norm objective to an assembled LMI.

    For finite weights w_ij the objective gains w_ij * ||(L P_fixed^{-1})_ij||_F;
    infinite weights become hard equalities (L P_fixed^{-1})_ij = 0. Finite
    weights are normalized by their maximum before solving (the argmin is
    unchanged); the reported objective is scaled back.
    """
    weights = np.asarray(weights, dtype=float)
    P_fixed = np.asarray(P_fixed, dtype=float)
    if weights.shape != (part.k, part.l):
        raise ValueError(
            f"weights shape {weights.shape} does not match partition blocks"
        )
    if np.any(weights < 0) or np.any(np.isnan(weights)):
        raise ValueError("weights must be nonnegative or infinite")
    eigs = np.linalg.eigvalsh(0.5 * (P_fixed + P_fixed.T))
    if eigs[0] <= 0:
        raise ValueError("P_fixed must be positive definite")

    L = problem.var("L")
    G = L @ np.linalg.inv(P_fixed)
    finite = weights[np.isfinite(weights)]
    wmax = float(finite.max()) if finite.size else 1.0
    if wmax <= 0:
        wmax = 1.0
    terms = []
    for i in range(1, part.k + 1):
        for j in range(1, part.l + 1):
            blk = G[part.row_slice(i), part.col_slice(j)]
            w = weights[i - 1, j - 1]
            if np.isinf(w):
                problem.add_equality(blk)
            else:
                terms.append((w / wmax, blk))
    problem.objective_terms = terms
    problem.value_scales = dict(problem.value_scales)
    problem.objective_offset = 0.0
    problem.value_scales["__objective__"] = wmax
    return problem


def _backend_kwargs(solver: str, settings: SolverSettings) -> dict:
    if solver == "CLARABEL":
        t = settings.clarabel_tol
        return {"tol_gap_abs": t, "tol_gap_rel": t, "tol_feas": t}
    if solver == "SCS":
        return {"eps_abs": settings.scs_eps, "eps_rel": settings.scs_eps}
    return {}


def _psd_residual_ok(problem: ConeProblem, feas_tol: float) -> tuple[bool, float]:
    worst = np.inf
    for expr in problem.psd_constraints:
        val = expr.value
        if val is None:
            return False, -np.inf
        val = np.atleast_2d(np.asarray(val, dtype=float))
        eigs = np.linalg.eigvalsh(0.5 * (val + val.T))
        margin = float(eigs[0]) + feas_tol * (1.0 + float(np.abs(eigs).max()))
        worst = min(worst, margin)
    return worst >= 0.0, worst


def solve(problem: ConeProblem, settings: SolverSettings = SolverSettings()) -> SolveResult:
    """Solve a ConeProblem and return a checked SolveResult.

    Statuses map as: optimal -> OPTIMAL (downgraded to INACCURATE if the
    numerical PSD re-check fails), infeasible -> INFEASIBLE, any inaccurate
    solver status with values -> INACCURATE, everything else -> FAILED.
    On a hard solver error the fallback backend is tried once.
    """
    constraints = [expr >> 0 for expr in problem.psd_constraints]
    constraints += list(problem.equalities)
    if problem.objective_terms:
        objective = cp.Minimize(
            cp.sum([w * cp.norm(expr, "fro") for w, expr in problem.objective_terms])
        )
    else:
        objective = cp.Minimize(0)
    prob = cp.Problem(objective, constraints)

    backends = [settings.solver]
    if settings.fallback and settings.fallback != settings.solver:
        backends.append(settings.fallback)

    last_error = None
    for backend in backends:
        t0 = time.perf_counter()
        try:
            with warnings.catch_warnings():
                # The inaccurate-solution warning duplicates the status we
                # already map and re-check numerically.
                warnings.filterwarnings("ignore", message="Solution may be inaccurate")
                prob.solve(
                    solver=backend,
                    verbose=settings.verbose,
                    **_backend_kwargs(backend, settings),
                )
        except (cp.error.SolverError, ValueError, ArithmeticError) as exc:
            last_error = f"{backend}: {exc}"
            continue
        elapsed = time.perf_counter() - t0
        diagnostics = {
            "solver": backend,
            "solver_status": prob.status,
            "solve_time": elapsed,
            "iterations": getattr(prob.solver_stats, "num_iters", None),
        }
        if prob.status in (cp.INFEASIBLE, cp.UNBOUNDED):
            return SolveResult(SolveStatus.INFEASIBLE if prob.status == cp.INFEASIBLE
                               else SolveStatus.FAILED, None, None, diagnostics)
        if problem.var("P").value is None:
            last_error = f"{backend}: status {prob.status} without values"
            continue

        status = SolveStatus.INACCURATE
        if prob.status == cp.OPTIMAL:
            ok, worst = _psd_residual_ok(problem, settings.feas_tol)
            diagnostics["psd_recheck_margin"] = worst
            status = SolveStatus.OPTIMAL if ok else SolveStatus.INACCURATE
        else:
            _, worst = _psd_residual_ok(problem, settings.feas_tol)
            diagnostics["psd_recheck_margin"] = worst

        values = {}
        for name, var in problem.variables.items():
            v = var.value
            scale = problem.value_scales.get(name, 1.0)
            if np.isscalar(v) or np.ndim(v) == 0:
                values[name] = float(v) * scale
            else:
                values[name] = np.asarray(v, dtype=float) * scale
        obj_scale = problem.value_scales.get("__objective__", 1.0)
        obj = None if prob.value is None else float(prob.value) * obj_scale
        return SolveResult(status, values, obj, diagnostics)

    return SolveResult(
        SolveStatus.FAILED, None, None, {"solver": backends[-1], "error": last_error}
    )


def dump_problem(problem: ConeProblem, path: str, solver: str = "CLARABEL") -> None:
    """Write the canonicalized problem as plain-text sparse triplets."""
    constraints = [expr >> 0 for expr in problem.psd_constraints]
    constraints += list(problem.equalities)
    if problem.objective_terms:
        objective = cp.Minimize(
            cp.sum([w * cp.norm(expr, "fro") for w, expr in problem.objective_terms])
        )
    else:
        objective = cp.Minimize(0)
    data, _, _ = cp.Problem(objective, constraints).get_problem_data(solver)
    with open(path, "w") as fh:
        for key in ("c", "b"):
            if key in data and data[key] is not None:
                vec = np.asarray(data[key]).ravel()
                fh.write(f"# {key} (length {vec.size})\n")
                for idx, v in enumerate(vec):
                    if v != 0:
                        fh.write(f"{idx} {v:.17g}\n")
        if "A" in data and data["A"] is not None:
            A = data["A"].tocoo()
            fh.write(f"# A ({A.shape[0]} x {A.shape[1]}, {A.nnz} nonzeros)\n")
            for r, c, v in zip(A.row, A.col, A.data):
                fh.write(f"{r} {c} {v:.17g}\n")
