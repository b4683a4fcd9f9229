"""Dense real/complex matrix kernels shared by every analysis stage.

All functions are pure and operate on plain numpy arrays: real matrices are
``float64``, complex ones ``complex128``.  A spectrum is a 1-D ``complex128``
array sorted descending by real part, ties broken by descending imaginary
part; the ordering is total, so identical input bytes always produce the
identical output ordering.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "MAX_DIM",
    "STRUCT_TOL",
    "RESIDUAL_TOL",
    "EIGVEC_COND_LIMIT",
    "NumericalBreakdownError",
    "NotDiagonalizableError",
    "SingularLyapunovError",
    "kron",
    "sym_part",
    "sort_spectrum",
    "eigenvalues",
    "eigen_decomposition",
    "is_hurwitz",
    "is_negative_definite",
    "is_positive_definite",
    "solve_lyapunov",
]

MAX_DIM = 64            # desk-scale contract for the dense eigensolver
STRUCT_TOL = 1e-10      # exact-by-construction structure checks
RESIDUAL_TOL = 1e-8     # solved-for / iterative results
EIGVEC_COND_LIMIT = 1e8  # beyond this the matrix is treated as defective


class NumericalBreakdownError(RuntimeError):
    """A dense kernel could not produce a trustworthy result."""


class NotDiagonalizableError(NumericalBreakdownError):
    """Eigenvector matrix too ill-conditioned to invert reliably."""


class SingularLyapunovError(NumericalBreakdownError):
    """The vectorized Lyapunov system is singular (two eigenvalues of the
    coefficient matrix sum to zero)."""


def _as_matrix(m, name: str = "matrix", square: bool = False) -> np.ndarray:
    a = np.asarray(m)
    if a.ndim != 2 or min(a.shape) == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if np.issubdtype(a.dtype, np.integer) or a.dtype == bool:
        a = a.astype(np.float64)
    elif not (np.issubdtype(a.dtype, np.floating) or np.issubdtype(a.dtype, np.complexfloating)):
        raise ValueError(f"{name} must be numeric, got dtype {a.dtype}")
    if square and a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _as_real_matrix(m, name: str = "matrix", square: bool = False) -> np.ndarray:
    a = _as_matrix(m, name, square)
    if np.iscomplexobj(a):
        raise ValueError(f"{name} must be real, got complex dtype")
    return a.astype(np.float64, copy=False)


def kron(a, b) -> np.ndarray:
    """Kronecker product of two dense matrices."""
    am = _as_matrix(a, "a")
    bm = _as_matrix(b, "b")
    return np.kron(am, bm)


def sym_part(h) -> np.ndarray:
    """Hermitian part (H* + H)/2 of a square matrix (H* = conjugate transpose)."""
    a = _as_matrix(h, "h", square=True)
    return (a.conj().T + a) / 2.0


def sort_spectrum(values) -> np.ndarray:
    """Sort eigenvalues descending by real part, ties by descending imaginary part."""
    v = np.asarray(values, dtype=np.complex128).ravel()
    order = np.lexsort((-v.imag, -v.real))
    return v[order]


def eigenvalues(m) -> np.ndarray:
    """All eigenvalues of a square matrix, in deterministic spectrum order.

    The matrix must be at most ``MAX_DIM`` square; real input is allowed and
    yields exactly conjugate pairs.
    """
    a = _as_matrix(m, "m", square=True)
    if a.shape[0] > MAX_DIM:
        raise ValueError(f"matrix dimension {a.shape[0]} exceeds the supported maximum {MAX_DIM}")
    try:
        w = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdownError(f"eigenvalue iteration failed: {exc}") from exc
    return sort_spectrum(w)


def eigen_decomposition(m, cond_limit: float = EIGVEC_COND_LIMIT):
    """Diagonalize ``m`` as Q^-1 diag(w) Q, refusing near-defective input.

    Returns ``(q_inv, w, q)`` with ``w`` in spectrum order such that
    ``q_inv @ diag(w) @ q`` reconstructs ``m``.  Raises
    :class:`NotDiagonalizableError` when the eigenvector matrix condition
    number exceeds ``cond_limit``.
    """
    a = _as_matrix(m, "m", square=True)
    if a.shape[0] > MAX_DIM:
        raise ValueError(f"matrix dimension {a.shape[0]} exceeds the supported maximum {MAX_DIM}")
    try:
        w, v = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdownError(f"eigenvalue iteration failed: {exc}") from exc
    order = np.lexsort((-w.imag, -w.real))
    w = w[order].astype(np.complex128)
    v = v[:, order].astype(np.complex128)
    cond = np.linalg.cond(v)
    if not np.isfinite(cond) or cond > cond_limit:
        raise NotDiagonalizableError(
            f"eigenvector matrix condition number {cond:.3e} exceeds {cond_limit:.1e}; "
            "matrix treated as defective"
        )
    q = np.linalg.inv(v)
    recon = v @ np.diag(w) @ q
    err = np.abs(recon - a).max()
    if err >= RESIDUAL_TOL:
        raise NumericalBreakdownError(f"eigen-decomposition reconstruction error {err:.3e}")
    return v, w, q


def is_hurwitz(m, margin: float = 0.0):
    """Whether all eigenvalues satisfy Re < -margin; also returns the worst real part."""
    w = eigenvalues(m)
    worst = float(w.real.max())
    return worst < -margin, worst


def is_negative_definite(s, epsilon: float = 0.0) -> bool:
    """True iff the Hermitian matrix ``s`` satisfies max eig(s) < -epsilon."""
    a = _as_matrix(s, "s", square=True)
    if np.abs(a - a.conj().T).max() > STRUCT_TOL:
        raise ValueError("s must be Hermitian within 1e-10; apply sym_part first")
    w = np.linalg.eigvalsh((a + a.conj().T) / 2.0)
    return bool(w[-1] < -epsilon)


def is_positive_definite(s) -> bool:
    """True iff the real symmetric matrix ``s`` has strictly positive eigenvalues."""
    a = _as_real_matrix(s, "s", square=True)
    if np.abs(a - a.T).max() > STRUCT_TOL:
        raise ValueError("s must be symmetric within 1e-10")
    w = np.linalg.eigvalsh((a + a.T) / 2.0)
    return bool(w[0] > 0.0)


def solve_lyapunov(a, w, tol: float = RESIDUAL_TOL) -> np.ndarray:
    """Solve Q a + a^T Q = -w for symmetric Q.

    Uses the dense vectorized form (kron(a^T, I) + kron(I, a^T)) vec(Q) = -vec(w);
    the output is symmetrized and validated against the residual tolerance.
    If ``a`` is Hurwitz and ``w`` is positive definite, Q is positive definite.
    """
    am = _as_real_matrix(a, "a", square=True)
    wm = _as_real_matrix(w, "w", square=True)
    n = am.shape[0]
    if wm.shape[0] != n:
        raise ValueError(f"w must match a, got {wm.shape} vs {am.shape}")
    if np.abs(wm - wm.T).max() > STRUCT_TOL:
        raise ValueError("w must be symmetric within 1e-10")
    if n > MAX_DIM:
        raise ValueError(f"matrix dimension {n} exceeds the supported maximum {MAX_DIM}")
    eye = np.eye(n)
    system = np.kron(am.T, eye) + np.kron(eye, am.T)
    try:
        vec = np.linalg.solve(system, -wm.ravel(order="F"))
    except np.linalg.LinAlgError as exc:
        raise SingularLyapunovError(
            "Lyapunov system is singular: a pair of eigenvalues of a sums to zero"
        ) from exc
    q = vec.reshape((n, n), order="F")
    q = (q + q.T) / 2.0
    resid = np.abs(q @ am + am.T @ q + wm).max()
    if not np.isfinite(resid) or resid >= tol:
        raise SingularLyapunovError(
            f"Lyapunov residual {resid:.3e} exceeds {tol:.1e}; "
            "the eigenvalue-sum condition is likely violated"
        )
    return q
