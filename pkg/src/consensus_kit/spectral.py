"""Spectral analysis of coupling matrices: full vs reduced spectra, the
designated slowest nonzero eigenvalue, and the correspondence report."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from consensus_kit.coupling import CouplingMatrix, reduced_coupling
from consensus_kit.linalg import eigenvalues

__all__ = [
    "PAIRING_FLAG_TOL",
    "CouplingSpectrum",
    "analyze_spectrum",
    "connectivity_hint",
]

PAIRING_FLAG_TOL = 1e-4  # correspondence errors above this are flagged in reports


@dataclass(frozen=True)
class CouplingSpectrum:
    """Spectra of L and of its reduction, plus the pairing diagnostic.

    ``lambda2`` is the element of ``reduced`` with the largest real part: the
    slowest reduced mode, which governs the required coupling strength.
    ``correspondence_error`` is the max greedy pairing distance between the
    nonzero spectrum of L and the reduced spectrum (including the distance of
    the designated zero eigenvalue from zero).
    """

    full: np.ndarray
    reduced: np.ndarray
    lambda2: complex
    correspondence_error: float

    @property
    def correspondence_ok(self) -> bool:
        return self.correspondence_error < PAIRING_FLAG_TOL


def _greedy_pair_error(a: np.ndarray, b: np.ndarray) -> float:
    """Max distance of a greedy minimal-distance pairing between two multisets."""
    if len(a) != len(b):
        raise ValueError(f"cannot pair spectra of lengths {len(a)} and {len(b)}")
    if len(a) == 0:
        return 0.0
    used = np.zeros(len(b), dtype=bool)
    worst = 0.0
    for z in a:
        d = np.abs(b - z)
        d[used] = np.inf
        k = int(np.argmin(d))
        used[k] = True
        worst = max(worst, float(d[k]))
    return worst


def analyze_spectrum(L: CouplingMatrix) -> CouplingSpectrum:
    """Compute the spectra of L and of the reduced matrix and pair them.

    The eigenvalue of L with smallest modulus is designated as the structural
    zero; its modulus and the greedy pairing distances of the remaining
    eigenvalues against the reduced spectrum form the correspondence error.
    """
    full = eigenvalues(L.entries)
    reduced = eigenvalues(reduced_coupling(L))
    k0 = int(np.argmin(np.abs(full)))
    rest = np.delete(full, k0)
    err = max(float(np.abs(full[k0])), _greedy_pair_error(rest, reduced))
    return CouplingSpectrum(
        full=full,
        reduced=reduced,
        lambda2=complex(reduced[0]),
        correspondence_error=err,
    )


def connectivity_hint(spec: CouplingSpectrum, tol: float = 1e-6) -> bool:
    """True iff every reduced eigenvalue has real part below -tol.

    A false hint typically means the interaction topology is not connected
    (the reduced spectrum then contains a zero), in which case criteria that
    assume a Hurwitz reduced matrix do not apply.
    """
    return bool(np.all(spec.reduced.real < -tol))
