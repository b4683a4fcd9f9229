"""Coupling matrices, the difference-reduction operator pair, and the reduced
coupling matrix.

Conventions
-----------
A coupling matrix L is m x m with zero row sums, nonnegative off-diagonal
entries and nonpositive diagonal.  Entry (i, j) weights how strongly agent i
uses agent j's state.

Edge direction: an edge record ``(i, j, w)`` means *agent i couples to agent
j's state* and contributes ``w`` to entry (i, j).  Indices are 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from consensus_kit.linalg import _as_real_matrix

__all__ = [
    "ROW_SUM_TOL",
    "OFFDIAG_TOL",
    "CouplingMatrix",
    "EdgeList",
    "validate_coupling",
    "laplacian_from_edges",
    "reduction_matrix",
    "reduction_pinverse",
    "reduced_coupling",
]

ROW_SUM_TOL = 1e-10   # row sums within this are repaired onto the diagonal
OFFDIAG_TOL = 1e-12   # off-diagonal entries above -this are clamped to zero


@dataclass(frozen=True)
class CouplingMatrix:
    """A validated coupling matrix: zero row sums, nonnegative off-diagonals."""

    m: int
    entries: np.ndarray

    def __post_init__(self):
        self.entries.setflags(write=False)


@dataclass(frozen=True)
class EdgeList:
    """Weighted directed edges over ``m`` agents; ``(i, j, w)`` adds w to L[i, j]."""

    m: int
    edges: tuple

    def __init__(self, m: int, edges: Iterable[Sequence]):
        object.__setattr__(self, "m", int(m))
        object.__setattr__(self, "edges", tuple((int(i), int(j), float(w)) for i, j, w in edges))


def validate_coupling(raw) -> CouplingMatrix:
    """Validate and normalize a raw square matrix into a :class:`CouplingMatrix`.

    Off-diagonal entries in (-1e-12, 0) are clamped to zero; row sums within
    1e-10 of zero are repaired by recomputing the diagonal.  Anything worse is
    rejected.
    """
    a = np.array(_as_real_matrix(raw, "coupling matrix", square=True), dtype=np.float64)
    m = a.shape[0]
    if m < 2:
        raise ValueError(f"coupling matrix needs at least 2 agents, got m={m}")
    off = ~np.eye(m, dtype=bool)
    worst_off = a[off].min() if m > 0 else 0.0
    if worst_off < -OFFDIAG_TOL:
        i, j = divmod(int(np.argmin(np.where(off, a, np.inf))), m)
        raise ValueError(
            f"off-diagonal entry ({i + 1},{j + 1}) = {a[i, j]!r} is negative beyond {-OFFDIAG_TOL}"
        )
    a[off & (a < 0.0)] = 0.0
    sums = a.sum(axis=1)
    if np.abs(sums).max() > ROW_SUM_TOL:
        i = int(np.argmax(np.abs(sums)))
        raise ValueError(
            f"row {i + 1} violates the zero-row-sum invariant (sum = {sums[i]!r})"
        )
    # Repair: recompute the diagonal so every row sums to exactly zero.
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(a, -a.sum(axis=1))
    return CouplingMatrix(m=m, entries=a)


def laplacian_from_edges(g: EdgeList) -> CouplingMatrix:
    """Build a coupling matrix from a directed edge list; duplicates accumulate."""
    m = g.m
    if m < 2:
        raise ValueError(f"edge list needs at least 2 agents, got m={m}")
    a = np.zeros((m, m))
    for i, j, w in g.edges:
        if not (1 <= i <= m and 1 <= j <= m):
            raise ValueError(f"edge ({i},{j}) is out of range for m={m}")
        if i == j:
            raise ValueError(f"self-loop ({i},{j}) is not allowed")
        if not math.isfinite(w) or w < 0.0:
            raise ValueError(f"edge ({i},{j}) has invalid weight {w!r}")
        a[i - 1, j - 1] += w
    np.fill_diagonal(a, -a.sum(axis=1))
    return validate_coupling(a)


def reduction_matrix(m: int) -> np.ndarray:
    """The (m-1) x m operator mapping stacked states to differences from agent 1."""
    if m < 2:
        raise ValueError(f"need at least 2 agents, got m={m}")
    r = np.zeros((m - 1, m))
    r[:, 0] = -1.0
    r[:, 1:] = np.eye(m - 1)
    return r


def reduction_pinverse(m: int) -> np.ndarray:
    """Moore-Penrose inverse of :func:`reduction_matrix`, in closed form."""
    if m < 2:
        raise ValueError(f"need at least 2 agents, got m={m}")
    p = np.full((m, m - 1), -1.0 / m)
    p[1:, :] += np.eye(m - 1) * 1.0  # lower block diagonal becomes (m-1)/m
    return p


def reduced_coupling(L: CouplingMatrix) -> np.ndarray:
    """The (m-1) x (m-1) reduced coupling matrix, via its closed form.

    Entry (i, j) is L[i+1, j+1] - L[0, j+1] (0-based); this equals the triple
    product R L R+ because L has zero row sums.
    """
    if not isinstance(L, CouplingMatrix):
        raise TypeError("L must be a validated CouplingMatrix")
    a = L.entries
    return a[1:, 1:] - a[0, 1:][None, :]
