"""Time discretizations of the projection flows.

``euler`` is the explicit scheme ``u_{n+1} = u_n - lambda_n * c(||T(u_n)||) * T(u_n)``
used as the actual solver; ``integrate_reference`` runs classical RK4 at a
fine step as a stand-in for the continuous flow when measuring settling
times.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np

from .dynamics import EPS_ZERO, FlowParams, _residual_fast, gain, residual
from .errors import NonFiniteError
from .geometry import as_vector
from .problem import IqviProblem

__all__ = [
    "Fixed",
    "Harmonic",
    "StepSchedule",
    "StopCriteria",
    "Termination",
    "Trajectory",
    "euler",
    "integrate_reference",
    "measure_settling",
    "read_trajectory_csv",
]


@dataclass(frozen=True)
class Fixed:
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("step size must be positive")

    def __call__(self, n: int) -> float:
        return self.lam


@dataclass(frozen=True)
class Harmonic:
    """``lambda_n = c / n`` for ``n >= 1``; the first update uses ``lambda_1 = c``."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")

    def __call__(self, n: int) -> float:
        if n < 1:
            raise ValueError("harmonic steps are indexed from 1")
        return self.c / n


StepSchedule = Union[Fixed, Harmonic]


@dataclass(frozen=True)
class StopCriteria:
    """When to stop iterating. ``None`` disables a tolerance."""

    max_iter: int = 1000
    residual_tol: Optional[float] = None
    error_tol: Optional[float] = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        for name in ("residual_tol", "error_tol"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be nonnegative")


class Termination(str, Enum):
    MAX_ITER = "MaxIter"
    RESIDUAL_TOL = "ResidualTol"
    ERROR_TOL = "ErrorTol"
    END_TIME = "EndTime"


@dataclass
class Trajectory:
    """Iterates of a run, one row per record; record 0 is the initial state.

    ``extras`` holds additional per-record columns (e.g. the road-pricing step
    residual and tolled-link flows).
    """

    iters: np.ndarray
    times: np.ndarray
    states: np.ndarray
    residuals: np.ndarray
    errors: Optional[np.ndarray] = None
    termination: Termination = Termination.MAX_ITER
    extras: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.iters)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path) -> None:
        """Write ``iter,time,u_1..u_n,residual,error`` with 17 significant digits."""
        n = self.states.shape[1]
        header = ["iter", "time"] + [f"u_{i + 1}" for i in range(n)] + ["residual", "error"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for k in range(len(self)):
                err = "" if self.errors is None else _fmt(self.errors[k])
                w.writerow(
                    [int(self.iters[k]), _fmt(self.times[k])]
                    + [_fmt(x) for x in self.states[k]]
                    + [_fmt(self.residuals[k]), err]
                )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def read_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n = len(header) - 4
    data = np.array([[float(v) if v != "" else np.nan for v in r] for r in body]).reshape(len(body), len(header))
    errors = None if np.all(np.isnan(data[:, -1])) else data[:, -1]
    return Trajectory(
        iters=data[:, 0].astype(int),
        times=data[:, 1],
        states=data[:, 2 : 2 + n],
        residuals=data[:, 2 + n],
        errors=errors,
    )


class _Recorder:
    def __init__(self, p: IqviProblem):
        self.p = p
        self.iters, self.times, self.states, self.res, self.errs = [], [], [], [], []

    def add(self, k, t, u, rnorm):
        self.iters.append(k)
        self.times.append(t)
        self.states.append(u.copy())
        self.res.append(rnorm)
        self.errs.append(self.p.error(u))

    def build(self, reason) -> Trajectory:
        errs = None if self.p.known_solution is None else np.array(self.errs)
        return Trajectory(
            iters=np.array(self.iters, dtype=int),
            times=np.array(self.times),
            states=np.array(self.states),
            residuals=np.array(self.res),
            errors=errs,
            termination=reason,
        )


def _stop_reason(stop: StopCriteria, k: int, rnorm: float, err: Optional[float]):
    if stop.residual_tol is not None and rnorm <= stop.residual_tol:
        return Termination.RESIDUAL_TOL
    if stop.error_tol is not None and err is not None and err <= stop.error_tol:
        return Termination.ERROR_TOL
    if k >= stop.max_iter:
        return Termination.MAX_ITER
    return None


def euler(
    p: IqviProblem,
    fp: FlowParams,
    u0,
    sched: StepSchedule,
    stop: StopCriteria = StopCriteria(),
) -> Trajectory:
    """Forward-Euler iteration of the chosen flow.

    For ``FixedTime`` parameters this is ``u_{n+1} = u_n - lambda_n psi(u_n) T(u_n)``;
    for ``Nominal`` it is the plain projection method ``u_{n+1} = u_n - lambda_n sigma T(u_n)``.
    Once ``||T(u_n)|| <= EPS_ZERO`` the state is frozen.

    Raises
    ------
    NonFiniteError
        If an iterate leaves the finite range (step too large).
    """
    u = as_vector(u0, p.dim, "u0")
    rec = _Recorder(p)
    t_elapsed = 0.0
    k = 0
    residual(p, u)  # validates operator and set against the problem dimension
    while True:
        tvec = _residual_fast(p, u)
        rnorm = float(np.linalg.norm(tvec))
        rec.add(k, t_elapsed, u, rnorm)
        reason = _stop_reason(stop, k, rnorm, rec.errs[-1])
        if reason is not None:
            return rec.build(reason)
        lam = sched(k + 1)
        if rnorm > EPS_ZERO:
            with np.errstate(over="ignore", invalid="ignore"):
                u = u - (lam * gain(fp, rnorm)) * tvec
            if not np.all(np.isfinite(u)):
                raise NonFiniteError(k + 1)
        t_elapsed += lam
        k += 1


def integrate_reference(
    p: IqviProblem,
    fp: FlowParams,
    u0,
    dt: float,
    t_end: float,
    stop_tol: Optional[float] = None,
    settle_steps: int = 200,
) -> Trajectory:
    """Classical fourth-order Runge-Kutta with constant step ``dt`` up to ``t_end``.

    Every step is recorded. ``stop_tol`` optionally ends the run early once the
    error to the known solution (or the residual norm, if no solution is
    known) has stayed at or below it for ``settle_steps`` consecutive records;
    with ``None`` the run always reaches ``t_end``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_end >= dt:
        raise ValueError("t_end must be at least dt")
    u = as_vector(u0, p.dim, "u0")
    nsteps = int(math.ceil(t_end / dt - 1e-9))

    residual(p, u)  # validates operator and set against the problem dimension

    def f(x):
        tv = _residual_fast(p, x)
        c = gain(fp, float(np.linalg.norm(tv)))
        return -c * tv, tv

    rec = _Recorder(p)
    k1, tv = f(u)
    rec.add(0, 0.0, u, float(np.linalg.norm(tv)))
    calm = 0
    for k in range(1, nsteps + 1):
        k2, _ = f(u + 0.5 * dt * k1)
        k3, _ = f(u + 0.5 * dt * k2)
        k4, _ = f(u + dt * k3)
        with np.errstate(over="ignore", invalid="ignore"):
            u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(u)):
            raise NonFiniteError(k)
        k1, tv = f(u)
        rec.add(k, k * dt, u, float(np.linalg.norm(tv)))
        if stop_tol is not None:
            e = rec.errs[-1] if rec.errs[-1] is not None else rec.res[-1]
            calm = calm + 1 if e <= stop_tol else 0
            if calm >= settle_steps:
                known = p.known_solution is not None
                return rec.build(Termination.ERROR_TOL if known else Termination.RESIDUAL_TOL)
    return rec.build(Termination.END_TIME)


def measure_settling(traj: Trajectory, tol: float) -> Optional[float]:
    """Time of the first record after which the error stays ``<= tol``.

    Uses the error column when present, otherwise the residual norm. Returns
    ``None`` if the trajectory does not end inside the tolerance.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    vals = traj.errors if traj.errors is not None else traj.residuals
    above = np.nonzero(vals > tol)[0]
    idx = 0 if above.size == 0 else above[-1] + 1
    if idx >= len(vals):
        return None
    return float(traj.times[idx])
