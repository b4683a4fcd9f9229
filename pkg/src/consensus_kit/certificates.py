"""Consensus certificates for linearly coupled agents.

Every criterion reduces consensus of the coupled system to properties of the
modal matrices A + c*lambda_k*Gamma, one per nonzero eigenvalue lambda_k of
the coupling matrix, or to a single Lyapunov-type matrix inequality.  Each
checker returns a :class:`ConsensusCertificate` carrying the verdict, a
margin (positive iff certified), per-mode details and any witness matrices,
so reports are reproducible byte-for-byte given the same inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from consensus_kit.coupling import CouplingMatrix, reduced_coupling
from consensus_kit.linalg import (
    SingularLyapunovError,
    _as_real_matrix,
    eigenvalues,
    is_hurwitz,
    is_positive_definite,
    solve_lyapunov,
    sym_part,
)
from consensus_kit.spectral import analyze_spectrum

__all__ = [
    "SystemSpec",
    "ConsensusCertificate",
    "Theorem3Constants",
    "ObserverDesignError",
    "modal_matrices",
    "check_theorem1",
    "check_theorem2",
    "check_theorem2_simplified",
    "check_observer",
    "design_observer_gain",
    "find_common_P",
    "theorem3_constants",
    "check_theorem3",
]

CRITERIA = ("theorem1", "theorem2", "theorem2-simplified", "corollary1", "corollary2", "theorem3")


class ObserverDesignError(RuntimeError):
    """The bounded observer-gain search found no valid candidate; the pair is
    either not detectable or numerically hard."""


@dataclass(frozen=True)
class SystemSpec:
    """A coupled linear system: state matrix A, inner coupling Gamma, coupling
    strength c and coupling matrix L.

    For output-coupled systems Gamma is the product F C of the injection gain
    and the output map.
    """

    A: np.ndarray
    Gamma: np.ndarray
    c: float
    L: CouplingMatrix

    def __post_init__(self):
        a = _as_real_matrix(self.A, "A", square=True)
        g = _as_real_matrix(self.Gamma, "Gamma", square=True)
        if g.shape != a.shape:
            raise ValueError(f"Gamma must match A, got {g.shape} vs {a.shape}")
        if not isinstance(self.L, CouplingMatrix):
            raise TypeError("L must be a validated CouplingMatrix")
        c = float(self.c)
        if not math.isfinite(c) or c < 0.0:
            raise ValueError(f"coupling strength must be finite and nonnegative, got {c!r}")
        a = a.copy()
        g = g.copy()
        a.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "Gamma", g)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.L.m


@dataclass(frozen=True)
class ConsensusCertificate:
    """Outcome of one consensus criterion.

    ``margin`` is positive exactly when ``verdict`` is true; ``per_mode``
    holds one ``(lambda_k, value)`` pair per tested mode, where the value is a
    worst real part (Hurwitz criteria) or the max eigenvalue of the tested
    Hermitian form (definiteness criteria).
    """

    criterion: str
    verdict: bool
    margin: float
    per_mode: tuple
    witnesses: Optional[dict] = None
    notes: str = ""


@dataclass(frozen=True)
class Theorem3Constants:
    """Weight matrix and scalar constants of the quadratic-form certificate.

    ``c1`` bounds the drift quadratic form, ``c2 < 0`` the coupling one; any
    coupling strength above ``c_min = c1 / (-c2)`` (0 when c1 <= 0) makes the
    combination c*c2 + c1 negative.
    """

    Q: np.ndarray
    c1: float
    c2: float
    c_min: float
    mu: np.ndarray
    nu: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray


def modal_matrices(s: SystemSpec) -> list:
    """The complex matrices A + c*lambda_k*Gamma, ordered like the reduced spectrum."""
    spec = analyze_spectrum(s.L)
    return [s.A + s.c * lam * s.Gamma for lam in spec.reduced]


def _require_spd(p, name: str) -> np.ndarray:
    mat = _as_real_matrix(p, name, square=True)
    try:
        ok = is_positive_definite(mat)
    except ValueError as exc:
        raise ValueError(f"{name} must be symmetric positive definite: {exc}") from exc
    if not ok:
        raise ValueError(f"{name} must be symmetric positive definite")
    return mat


def check_theorem1(s: SystemSpec, margin: float = 0.0) -> ConsensusCertificate:
    """Certify consensus by requiring every modal matrix to be Hurwitz.

    The certificate margin is the negated worst real part over all modes;
    the verdict demands strict stability beyond the requested margin.
    """
    if margin < 0.0:
        raise ValueError(f"margin must be nonnegative, got {margin!r}")
    spec = analyze_spectrum(s.L)
    per = []
    worst = -math.inf
    for lam, mat in zip(spec.reduced, modal_matrices(s)):
        _, w = is_hurwitz(mat, margin)
        per.append((complex(lam), w))
        worst = max(worst, w)
    return ConsensusCertificate(
        criterion="theorem1",
        verdict=worst < -margin,
        margin=-worst,
        per_mode=tuple(per),
        notes=f"modal Hurwitz test, required margin {margin:.12g}",
    )


def check_theorem2(s: SystemSpec, P, epsilon: float) -> ConsensusCertificate:
    """Certify consensus via a common quadratic form: for every mode, the
    Hermitian part of P (A + c*lambda_k*Gamma) must lie below -epsilon*I."""
    pm = _require_spd(P, "P")
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    if pm.shape != s.A.shape:
        raise ValueError(f"P must be {s.A.shape}, got {pm.shape}")
    spec = analyze_spectrum(s.L)
    per = []
    worst = -math.inf
    for lam, mat in zip(spec.reduced, modal_matrices(s)):
        top = float(np.linalg.eigvalsh(sym_part(pm @ mat))[-1])
        per.append((complex(lam), top))
        worst = max(worst, top)
    return ConsensusCertificate(
        criterion="theorem2",
        verdict=worst < -epsilon,
        margin=-(worst + epsilon),
        per_mode=tuple(per),
        witnesses={"P": pm},
        notes=f"common quadratic form, epsilon {epsilon:.12g}",
    )


def check_theorem2_simplified(s: SystemSpec, P, epsilon: float) -> ConsensusCertificate:
    """Single-inequality variant of :func:`check_theorem2`.

    Requires P*Gamma symmetric positive definite; tests
    P A + A^T P + c Re(lambda2) P Gamma < -epsilon I with lambda2 the slowest
    reduced eigenvalue.
    """
    pm = _require_spd(P, "P")
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    if pm.shape != s.A.shape:
        raise ValueError(f"P must be {s.A.shape}, got {pm.shape}")
    pg = pm @ s.Gamma
    try:
        _require_spd(pg, "P*Gamma")
    except ValueError as exc:
        raise ValueError(f"simplified condition needs P*Gamma symmetric positive definite: {exc}") from exc
    spec = analyze_spectrum(s.L)
    re2 = spec.lambda2.real
    form = pm @ s.A + s.A.T @ pm + s.c * re2 * pg
    top = float(np.linalg.eigvalsh((form + form.T) / 2.0)[-1])
    return ConsensusCertificate(
        criterion="theorem2-simplified",
        verdict=top < -epsilon,
        margin=-(top + epsilon),
        per_mode=((complex(spec.lambda2), top),),
        witnesses={"P": pm},
        notes=f"single inequality at Re(lambda2) = {re2:.12g}, epsilon {epsilon:.12g}",
    )


def check_observer(A, F, C, c: float, L: CouplingMatrix, *,
                   margin: Optional[float] = None, P=None,
                   epsilon: Optional[float] = None) -> ConsensusCertificate:
    """Certify an output-coupled system by delegating with Gamma = F C.

    Pass ``margin`` for the modal Hurwitz route, or ``P`` and ``epsilon`` for
    the quadratic-form route; the certificate is retagged accordingly.
    """
    am = _as_real_matrix(A, "A", square=True)
    fm = _as_real_matrix(F, "F")
    cm = _as_real_matrix(C, "C")
    n = am.shape[0]
    if fm.shape[0] != n or cm.shape[1] != n or fm.shape[1] != cm.shape[0]:
        raise ValueError(
            f"observer dimensions mismatch: A is {am.shape}, F is {fm.shape}, C is {cm.shape}"
        )
    if (P is None) != (epsilon is None):
        raise ValueError("pass both P and epsilon, or neither")
    if P is not None and margin is not None:
        raise ValueError("pass either margin or (P, epsilon), not both")
    s = SystemSpec(A=am, Gamma=fm @ cm, c=c, L=L)
    if P is None:
        base = check_theorem1(s, 0.0 if margin is None else margin)
        return replace(base, criterion="corollary1", notes="output coupling; " + base.notes)
    base = check_theorem2(s, P, epsilon)
    return replace(base, criterion="corollary2", notes="output coupling; " + base.notes)


def _filter_riccati_candidate(a: np.ndarray, c: np.ndarray, alpha: float):
    """Stabilizing solution X of A X + X A^T - X C^T C X + alpha I = 0 via the
    Hamiltonian eigenvector method; None when the stable subspace degenerates."""
    n = a.shape[0]
    ham = np.block([[a.T, -c.T @ c], [-alpha * np.eye(n), -a]])
    try:
        w, v = np.linalg.eig(ham)
    except np.linalg.LinAlgError:
        return None
    sel = w.real < 0.0
    if int(sel.sum()) != n:
        return None
    u_top = v[:n, sel]
    u_bot = v[n:, sel]
    try:
        x = u_bot @ np.linalg.inv(u_top)
    except np.linalg.LinAlgError:
        return None
    x = np.real(x)
    return (x + x.T) / 2.0


def design_observer_gain(A, C, epsilon: float, lambda2: Optional[complex] = None):
    """Search for P > 0 with P A + A^T P - C^T C < -epsilon I and gain F = P^-1 C^T.

    The search is a bounded candidate sweep (identity scalings, Lyapunov
    solves when A is stable, Riccati-based candidates otherwise), every
    candidate re-validated directly against the inequality.  Returns
    ``(P, F, c_min)`` where ``c_min = 1/|Re lambda2|`` is the coupling
    strength above which the certificate applies (None when ``lambda2`` is
    not supplied, inf when it has nonnegative real part).

    Raises :class:`ObserverDesignError` when the budget is exhausted, which
    signals a non-detectable or numerically hard pair.
    """
    am = _as_real_matrix(A, "A", square=True)
    cm = _as_real_matrix(C, "C")
    n = am.shape[0]
    if cm.shape[1] != n:
        raise ValueError(f"C must have {n} columns, got {cm.shape}")
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")

    ctc = cm.T @ cm
    eye = np.eye(n)
    candidates = [eye]
    hurwitz, _ = is_hurwitz(am)
    if hurwitz:
        for beta in (0.0, 0.5, 1.0):
            try:
                candidates.append(solve_lyapunov(am, (1.0 + epsilon) * eye + beta * ctc))
            except SingularLyapunovError:
                pass
    for scale in (0.5, 2.0, 0.25, 4.0, 0.1, 10.0):
        candidates.append(scale * eye)
    for alpha in (1.0, 4.0, 16.0, 64.0):
        x = _filter_riccati_candidate(am, cm, alpha)
        if x is None:
            continue
        try:
            candidates.append(np.linalg.inv(x))
        except np.linalg.LinAlgError:
            continue

    for cand in candidates[:20]:
        p = (cand + cand.T) / 2.0
        if not np.all(np.isfinite(p)):
            continue
        if not is_positive_definite(p):
            continue
        form = p @ am + am.T @ p - ctc
        top = float(np.linalg.eigvalsh((form + form.T) / 2.0)[-1])
        if top < -epsilon:
            f = np.linalg.solve(p, cm.T)
            if lambda2 is None:
                c_min = None
            elif complex(lambda2).real < 0.0:
                c_min = 1.0 / abs(complex(lambda2).real)
            else:
                c_min = math.inf
            return p, f, c_min
    raise ObserverDesignError(
        "no candidate satisfied P A + A^T P - C^T C < -epsilon I within the search budget; "
        "the pair (A, C) is likely not detectable"
    )


def _solve_lyapunov_hermitian(m: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Solve P m + m^H P = -w in complex arithmetic (dense vectorized form)."""
    n = m.shape[0]
    eye = np.eye(n)
    system = np.kron(m.T, eye) + np.kron(eye, m.conj().T)
    vec = np.linalg.solve(system, -w.astype(np.complex128).ravel(order="F"))
    p = vec.reshape((n, n), order="F")
    return (p + p.conj().T) / 2.0


def find_common_P(s: SystemSpec, epsilon: float):
    """Best-effort search for a P certifying :func:`check_theorem2`.

    Solves a Lyapunov equation for the slowest mode, takes the symmetrized
    real part as a search direction, rescales it to clear epsilon and
    validates against all modes (identity as fallback).  Returns None when no
    candidate validates; absence is not a proof of infeasibility.
    """
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    mods = modal_matrices(s)
    n = s.n
    directions = []
    slowest = mods[0]
    ok, _ = is_hurwitz(slowest)
    if ok:
        try:
            p0 = _solve_lyapunov_hermitian(slowest, np.eye(n))
            directions.append((np.real(p0) + np.real(p0).T) / 2.0)
        except np.linalg.LinAlgError:
            pass
    directions.append(np.eye(n))
    for d in directions:
        if not np.all(np.isfinite(d)):
            continue
        try:
            if not is_positive_definite(d):
                continue
        except ValueError:
            continue
        worst = max(
            float(np.linalg.eigvalsh(sym_part(d @ mat))[-1]) for mat in mods
        )
        if worst >= 0.0:
            continue
        p = d * (2.0 * epsilon / -worst)
        cert = check_theorem2(s, p, epsilon)
        if cert.verdict:
            return p
    return None


def theorem3_constants(A, Gamma, P, L: CouplingMatrix) -> Theorem3Constants:
    """Build the weight matrix Q and the scalar constants of the quadratic-form
    certificate.

    Q solves Q Lr + Lr^T Q = -I for the reduced coupling matrix Lr (which must
    be Hurwitz); P and P*Gamma must be symmetric positive definite.  The
    spectra are returned in descending order: ``mu`` of Q, ``nu`` of the
    symmetric part of P A, ``gamma`` of the symmetric part of Q Lr and
    ``theta`` of P*Gamma.
    """
    am = _as_real_matrix(A, "A", square=True)
    gm = _as_real_matrix(Gamma, "Gamma", square=True)
    pm = _require_spd(P, "P")
    if gm.shape != am.shape or pm.shape != am.shape:
        raise ValueError("A, Gamma and P must share the same square shape")
    pg = pm @ gm
    try:
        _require_spd(pg, "P*Gamma")
    except ValueError as exc:
        raise ValueError(f"certificate needs P*Gamma symmetric positive definite: {exc}") from exc
    lstar = reduced_coupling(L)
    lam = eigenvalues(lstar)
    if lam.real.max() >= 0.0:
        raise ValueError(
            "reduced coupling matrix is not Hurwitz (topology likely disconnected); "
            "the weight construction is undefined"
        )
    q = solve_lyapunov(lstar, np.eye(L.m - 1))
    if not is_positive_definite(q):
        raise ValueError("weight matrix Q failed the positive-definiteness check")
    mu = np.linalg.eigvalsh(q)[::-1]
    nu = np.linalg.eigvalsh((pm @ am + am.T @ pm) / 2.0)[::-1]
    qs = q @ lstar
    gamma = np.linalg.eigvalsh((qs + qs.T) / 2.0)[::-1]
    theta = np.linalg.eigvalsh((pg + pg.T) / 2.0)[::-1]
    c1 = float(np.max(np.outer(mu, nu)))
    c2 = float(gamma[0] * theta[-1])
    c_min = c1 / -c2 if c1 > 0.0 else 0.0
    return Theorem3Constants(
        Q=q, c1=c1, c2=c2, c_min=c_min,
        mu=mu.copy(), nu=nu.copy(), gamma=gamma.copy(), theta=theta.copy(),
    )


def check_theorem3(A, Gamma, P, L: CouplingMatrix, c: float) -> ConsensusCertificate:
    """Certify consensus via the quadratic form y^T (Q kron P) y.

    The verdict requires c*c2 + c1 < 0 strictly (decay of the quadratic
    form); the margin is its negation.  Witnesses carry both P and Q.
    """
    if not (c > 0.0 and math.isfinite(c)):
        raise ValueError(f"coupling strength must be positive, got {c!r}")
    k = theorem3_constants(A, Gamma, P, L)
    combo = c * k.c2 + k.c1
    return ConsensusCertificate(
        criterion="theorem3",
        verdict=combo < 0.0,
        margin=-combo,
        per_mode=(),
        witnesses={"P": _as_real_matrix(P, "P", square=True), "Q": k.Q},
        notes=(
            f"quadratic-form certificate: c1 = {k.c1:.12g}, c2 = {k.c2:.12g}, "
            f"decay requires c*c2 + c1 < 0, hence c_min = {k.c_min:.12g}"
        ),
    )
