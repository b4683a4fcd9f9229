"""Fixed-step integration of the coupled, reduced and modal systems, plus
consensus diagnostics.

The integrator is classical 4th-order Runge-Kutta.  All simulated systems are
linear and autonomous, so one step equals multiplication by the degree-4
Taylor polynomial of the step operator; the polynomial is formed once per run
and applied per step, which keeps long horizons cheap and bit-deterministic.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple

import numpy as np

from consensus_kit.certificates import SystemSpec
from consensus_kit.coupling import reduced_coupling
from consensus_kit.linalg import _as_real_matrix, is_positive_definite

__all__ = [
    "DIVERGENCE_LIMIT",
    "SERIES_FLOOR",
    "SimConfig",
    "Trajectory",
    "TimeSeries",
    "simulate_full",
    "simulate_reduced",
    "simulate_modal",
    "disagreement",
    "decay_rate_estimate",
    "lyapunov_trace",
    "consensus_reached",
]

DIVERGENCE_LIMIT = 1e12  # state entries beyond this truncate the run
SERIES_FLOOR = 1e-14     # values at or below this are excluded from rate fits
MAX_STEPS = 10_000_000


@dataclass(frozen=True)
class SimConfig:
    """Fixed-step integration settings; every ``stride``-th step is recorded
    (the initial and final steps always are)."""

    dt: float = 1e-3
    t_end: float = 10.0
    stride: int = 1

    def __post_init__(self):
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not (self.t_end > 0.0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be positive, got {self.t_end!r}")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ValueError(f"stride must be a positive integer, got {self.stride!r}")
        if self.t_end / self.dt > MAX_STEPS:
            raise ValueError(
                f"t_end/dt = {self.t_end / self.dt:.3g} exceeds the {MAX_STEPS} step budget"
            )

    @property
    def n_steps(self) -> int:
        return max(1, int(math.ceil(self.t_end / self.dt - 1e-9)))


class TimeSeries(NamedTuple):
    times: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """Recorded states of all agents: ``states[k]`` is an (m, n) array at
    ``times[k]``.  ``metadata`` carries the system digest, the integration
    settings and the divergence flag."""

    times: np.ndarray
    states: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times.setflags(write=False)
        self.states.setflags(write=False)

    @property
    def diverged(self) -> bool:
        return bool(self.metadata.get("diverged", False))


def _rk4_transition(m: np.ndarray, dt: float) -> np.ndarray:
    dim = m.shape[0]
    phi = np.eye(dim, dtype=m.dtype)
    term = np.eye(dim, dtype=m.dtype)
    for k in range(1, 5):
        term = term @ m * (dt / k)
        phi = phi + term
    return phi


def _integrate(m: np.ndarray, v0: np.ndarray, cfg: SimConfig):
    phi = _rk4_transition(m, cfg.dt)
    n_steps = cfg.n_steps
    stride = int(cfg.stride)
    times = [0.0]
    rec = [v0]
    diverged = False
    v = v0
    for k in range(1, n_steps + 1):
        v = phi @ v
        if np.abs(v).max() > DIVERGENCE_LIMIT:
            diverged = True
            break
        if k % stride == 0 or k == n_steps:
            times.append(k * cfg.dt)
            rec.append(v)
    return np.asarray(times), np.stack(rec), diverged


def _digest(kind: str, cfg: SimConfig, *arrays, scalars=()) -> str:
    h = hashlib.sha256()
    h.update(kind.encode())
    for a in arrays:
        arr = np.ascontiguousarray(a)
        h.update(str(arr.shape).encode())
        h.update(str(arr.dtype).encode())
        h.update(arr.tobytes())
    for s in scalars:
        h.update(repr(float(s)).encode())
    h.update(repr((cfg.dt, cfg.t_end, cfg.stride)).encode())
    return h.hexdigest()


def _metadata(kind: str, cfg: SimConfig, digest: str, diverged: bool) -> dict:
    return {
        "kind": kind,
        "system": digest,
        "dt": cfg.dt,
        "t_end": cfg.t_end,
        "stride": int(cfg.stride),
        "diverged": diverged,
    }


def simulate_full(s: SystemSpec, x0, cfg: SimConfig) -> Trajectory:
    """Integrate the full coupled system from per-agent initial states.

    ``x0`` is an (m, n) array of agent states.  The stacked dynamics are
    kron(I, A) + c * kron(L, Gamma); runs whose state magnitude exceeds the
    divergence limit are truncated with a flag rather than emitting
    non-finite values.
    """
    x = np.asarray(x0, dtype=np.float64)
    m, n = s.m, s.n
    if x.shape != (m, n):
        raise ValueError(f"x0 must have shape ({m}, {n}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 has non-finite entries")
    sys_matrix = np.kron(np.eye(m), s.A) + s.c * np.kron(s.L.entries, s.Gamma)
    times, flat, diverged = _integrate(sys_matrix, x.reshape(-1), cfg)
    dig = _digest("full", cfg, s.A, s.Gamma, s.L.entries, scalars=(s.c,))
    return Trajectory(times, flat.reshape(len(times), m, n), _metadata("full", cfg, dig, diverged))


def simulate_reduced(s: SystemSpec, y0, cfg: SimConfig) -> Trajectory:
    """Integrate the difference system: m-1 blocks coupled by the reduced matrix."""
    y = np.asarray(y0, dtype=np.float64)
    m, n = s.m, s.n
    if y.shape != (m - 1, n):
        raise ValueError(f"y0 must have shape ({m - 1}, {n}), got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("y0 has non-finite entries")
    lstar = reduced_coupling(s.L)
    sys_matrix = np.kron(np.eye(m - 1), s.A) + s.c * np.kron(lstar, s.Gamma)
    times, flat, diverged = _integrate(sys_matrix, y.reshape(-1), cfg)
    dig = _digest("reduced", cfg, s.A, s.Gamma, s.L.entries, scalars=(s.c,))
    return Trajectory(times, flat.reshape(len(times), m - 1, n), _metadata("reduced", cfg, dig, diverged))


def simulate_modal(A, Gamma, c: float, lam: complex, z0, cfg: SimConfig) -> Trajectory:
    """Integrate a single complex mode A + c*lam*Gamma from a complex n-vector."""
    am = _as_real_matrix(A, "A", square=True)
    gm = _as_real_matrix(Gamma, "Gamma", square=True)
    if gm.shape != am.shape:
        raise ValueError(f"Gamma must match A, got {gm.shape} vs {am.shape}")
    z = np.asarray(z0, dtype=np.complex128).reshape(-1)
    if z.shape != (am.shape[0],):
        raise ValueError(f"z0 must be a length-{am.shape[0]} vector, got shape {np.shape(z0)}")
    if not np.all(np.isfinite(z)):
        raise ValueError("z0 has non-finite entries")
    mode = am.astype(np.complex128) + complex(c) * complex(lam) * gm.astype(np.complex128)
    times, flat, diverged = _integrate(mode, z, cfg)
    dig = _digest("modal", cfg, am, gm, scalars=(c, complex(lam).real, complex(lam).imag))
    return Trajectory(times, flat.reshape(len(times), 1, am.shape[0]), _metadata("modal", cfg, dig, diverged))


def disagreement(traj: Trajectory) -> TimeSeries:
    """Max pairwise Euclidean distance among agent states at each recorded time."""
    states = traj.states
    m = states.shape[1]
    if m < 2:
        raise ValueError(f"disagreement needs at least 2 agents, got {m}")
    worst = np.zeros(states.shape[0])
    for i in range(m):
        for j in range(i + 1, m):
            d = np.linalg.norm(states[:, i, :] - states[:, j, :], axis=1)
            np.maximum(worst, d, out=worst)
    return TimeSeries(traj.times, worst)


def decay_rate_estimate(series: TimeSeries, window: float = 0.5) -> float:
    """Least-squares slope of log(values) over the tail window.

    ``window`` is the fraction of the time span fitted, counted from the end;
    values at or below the floor (1e-14) are excluded.  Negative output means
    decay.  Raises when fewer than 10 usable points remain.
    """
    times = np.asarray(series.times, dtype=float)
    values = np.asarray(series.values, dtype=float)
    if not (0.0 < window <= 1.0):
        raise ValueError(f"window must be in (0, 1], got {window!r}")
    if times.shape != values.shape or times.ndim != 1:
        raise ValueError("series times and values must be matching 1-D arrays")
    t0 = times[-1] - window * (times[-1] - times[0])
    mask = (times >= t0) & (values > SERIES_FLOOR)
    if int(mask.sum()) < 10:
        raise ValueError(f"only {int(mask.sum())} usable points in the fit window; need at least 10")
    t = times[mask]
    logv = np.log(values[mask])
    design = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(design, logv, rcond=None)
    return float(coef[0])


def lyapunov_trace(traj: Trajectory, Q, P) -> TimeSeries:
    """Quadratic form y^T (Q kron P) y along a difference trajectory.

    ``Q`` weights the (m-1) difference blocks, ``P`` the state components;
    both must be symmetric positive definite.
    """
    qm = _as_real_matrix(Q, "Q", square=True)
    pm = _as_real_matrix(P, "P", square=True)
    if not is_positive_definite(qm):
        raise ValueError("Q must be symmetric positive definite")
    if not is_positive_definite(pm):
        raise ValueError("P must be symmetric positive definite")
    states = traj.states
    if np.iscomplexobj(states):
        raise ValueError("lyapunov_trace expects a real difference trajectory")
    if states.shape[1] != qm.shape[0] or states.shape[2] != pm.shape[0]:
        raise ValueError(
            f"trajectory blocks {states.shape[1:]} do not match Q {qm.shape} / P {pm.shape}"
        )
    inner = states @ pm  # (T, m-1, n): P applied to each block
    values = np.einsum("tin,ij,tjn->t", states, qm, inner)
    return TimeSeries(traj.times, values)


def consensus_reached(traj: Trajectory, tol: float) -> Tuple[bool, Optional[float]]:
    """First recorded time from which disagreement stays below ``tol``."""
    if not (tol > 0.0 and math.isfinite(tol)):
        raise ValueError(f"tol must be positive, got {tol!r}")
    d = disagreement(traj)
    below = d.values < tol
    suffix_ok = np.logical_and.accumulate(below[::-1])[::-1]
    if not suffix_ok.any():
        return False, None
    k = int(np.argmax(suffix_ok))
    return True, float(d.times[k])
