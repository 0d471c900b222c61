"""Block-partitioned matrix utilities.

A partitioned matrix splits its rows into k blocks of sizes p_1..p_k and
its columns into l blocks of sizes q_1..q_l.  Sparsity of a feedback gain
is measured per block: a block counts as zero when its Frobenius norm is
at or below a tolerance, and ``bcard`` counts the nonzero blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_ZERO_TOL = 1e-9


@dataclass(frozen=True)
class Partition:
    """Row/column block sizes for an m x n partitioned matrix.

    Parameters
    ----------
    p : tuple of int
        Row block sizes, all >= 1.
    q : tuple of int
        Column block sizes, all >= 1.
    """

    p: tuple[int, ...]
    q: tuple[int, ...]
    row_offsets: tuple[int, ...] = field(init=False, repr=False)
    col_offsets: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        p = tuple(int(v) for v in self.p)
        q = tuple(int(v) for v in self.q)
        if not p or not q:
            raise ValueError("partition needs at least one block per axis")
        if any(v < 1 for v in p) or any(v < 1 for v in q):
            raise ValueError("block sizes must be positive")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "row_offsets", tuple(int(v) for v in np.cumsum((0,) + p)))
        object.__setattr__(self, "col_offsets", tuple(int(v) for v in np.cumsum((0,) + q)))

    @property
    def k(self) -> int:
        return len(self.p)

    @property
    def l(self) -> int:
        return len(self.q)

    @property
    def m(self) -> int:
        return self.row_offsets[-1]

    @property
    def n(self) -> int:
        return self.col_offsets[-1]

    def check_shape(self, M) -> None:
        M = np.asarray(M)
        if M.shape != (self.m, self.n):
            raise ValueError(
                f"matrix shape {M.shape} does not match partition "
                f"({self.m}, {self.n})"
            )

    def row_slice(self, i: int) -> slice:
        if not 1 <= i <= self.k:
            raise ValueError(f"row block index {i} out of range 1..{self.k}")
        return slice(self.row_offsets[i - 1], self.row_offsets[i])

    def col_slice(self, j: int) -> slice:
        if not 1 <= j <= self.l:
            raise ValueError(f"column block index {j} out of range 1..{self.l}")
        return slice(self.col_offsets[j - 1], self.col_offsets[j])

    def iter_blocks(self):
        """Yield (i, j) over all block positions, row-major, 1-based."""
        for i in range(1, self.k + 1):
            for j in range(1, self.l + 1):
                yield i, j


@dataclass(frozen=True)
class SparsityStructure:
    """0/1 block pattern sigma over a partition; sigma[i-1, j-1] == 0 means
    block (i, j) is required to vanish."""

    sigma: np.ndarray
    partition: Partition

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=bool)
        if sigma.shape != (self.partition.k, self.partition.l):
            raise ValueError(
                f"sigma shape {sigma.shape} does not match partition blocks "
                f"({self.partition.k}, {self.partition.l})"
            )
        object.__setattr__(self, "sigma", sigma)

    def ones_count(self) -> int:
        return int(self.sigma.sum())

    def __le__(self, other: "SparsityStructure") -> bool:
        return bool(np.all(self.sigma <= other.sigma))


def block(M, i: int, j: int, part: Partition) -> np.ndarray:
    """Return the (i, j) block of M (1-based block indices)."""
    M = np.asarray(M, dtype=float)
    part.check_shape(M)
    return M[part.row_slice(i), part.col_slice(j)]


def block_frobenius(M, i: int, j: int, part: Partition) -> float:
    """Frobenius norm of the (i, j) block of M."""
    return float(np.linalg.norm(block(M, i, j, part)))


def phi(x: float, zero_tol: float = DEFAULT_ZERO_TOL) -> int:
    """Thresholded indicator: 0 if x <= zero_tol, else 1."""
    if zero_tol < 0:
        raise ValueError("zero_tol must be nonnegative")
    return 0 if x <= zero_tol else 1


def bcard(M, part: Partition, zero_tol: float = DEFAULT_ZERO_TOL) -> int:
    """Number of blocks of M with Frobenius norm above zero_tol."""
    M = np.asarray(M, dtype=float)
    part.check_shape(M)
    return sum(
        phi(block_frobenius(M, i, j, part), zero_tol)
        for i, j in part.iter_blocks()
    )


def structure_of(M, part: Partition, zero_tol: float = DEFAULT_ZERO_TOL) -> SparsityStructure:
    """Smallest pattern sigma the matrix conforms to under the tolerance."""
    M = np.asarray(M, dtype=float)
    part.check_shape(M)
    sigma = np.zeros((part.k, part.l), dtype=bool)
    for i, j in part.iter_blocks():
        sigma[i - 1, j - 1] = phi(block_frobenius(M, i, j, part), zero_tol) == 1
    return SparsityStructure(sigma, part)


def conforms(M, structure: SparsityStructure, zero_tol: float = DEFAULT_ZERO_TOL) -> bool:
    """True iff every block where sigma is 0 has norm <= zero_tol."""
    M = np.asarray(M, dtype=float)
    part = structure.partition
    part.check_shape(M)
    for i, j in part.iter_blocks():
        if not structure.sigma[i - 1, j - 1]:
            if block_frobenius(M, i, j, part) > zero_tol:
                return False
    return True
