"""Residual map and the right-hand sides of the projection flows.

The residual ``T(u) = f(u) - P_{Phi(u)}(f(u) - alpha*u)`` vanishes exactly at
solutions. Each flow moves against it with a different gain:

* nominal:     du/dt = -sigma * T(u)
* finite time: du/dt = -sigma * T(u) / ||T(u)||**((gamma-2)/(gamma-1))
* fixed time:  du/dt = -(a1 ||T||**(r1-1) + a2 ||T||**(r2-1)) * T(u)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .geometry import as_vector
from .problem import IqviProblem, eval_f

__all__ = [
    "EPS_ZERO",
    "Nominal",
    "FiniteTime",
    "FixedTime",
    "FlowParams",
    "residual",
    "psi",
    "gain",
    "rhs",
]

# residual norms at or below this count as zero (avoids negative powers of denormals)
EPS_ZERO = 1e-14


@dataclass(frozen=True)
class Nominal:
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class FiniteTime:
    sigma: float = 1.0
    gamma: float = 3.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.gamma > 2:
            raise ValueError("gamma must exceed 2")


@dataclass(frozen=True)
class FixedTime:
    a1: float
    a2: float
    r1: float
    r2: float

    def __post_init__(self):
        if not (self.a1 > 0 and self.a2 > 0):
            raise ValueError("a1 and a2 must be positive")
        if not 0 < self.r1 < 1:
            raise ValueError("r1 must lie in (0, 1)")
        if not self.r2 > 1:
            raise ValueError("r2 must exceed 1")

    @classmethod
    def from_nu(cls, nu: float, a1: float = 1.0, a2: float = 1.0) -> "FixedTime":
        """Exponents ``r1 = 1 - 2/nu`` and ``r2 = 1 + 2/nu`` for ``nu > 2``."""
        if not nu > 2:
            raise ValueError("nu must exceed 2")
        return cls(a1, a2, 1.0 - 2.0 / nu, 1.0 + 2.0 / nu)


FlowParams = Union[Nominal, FiniteTime, FixedTime]


def residual(p: IqviProblem, u) -> np.ndarray:
    u = as_vector(u, p.dim)
    fu = eval_f(p, u)
    return fu - p.phi.project(u, fu - p.alpha * u)


def _residual_fast(p: IqviProblem, u: np.ndarray) -> np.ndarray:
    # inner-loop variant: u is already a validated float vector of the right length
    fu = p.f(u)
    return fu - p.phi._project(u, fu - p.alpha * u)


def gain(fp: FlowParams, tnorm: float) -> float:
    """Scalar ``c`` with ``rhs = -c * T`` for a residual of norm ``tnorm``."""
    if isinstance(fp, Nominal):
        return fp.sigma
    if tnorm <= EPS_ZERO:
        return 0.0
    if isinstance(fp, FiniteTime):
        return fp.sigma * tnorm ** (-(fp.gamma - 2.0) / (fp.gamma - 1.0))
    if isinstance(fp, FixedTime):
        return fp.a1 * tnorm ** (fp.r1 - 1.0) + fp.a2 * tnorm ** (fp.r2 - 1.0)
    raise TypeError(f"unknown flow parameters {fp!r}")


def psi(p: IqviProblem, fp: FixedTime, u) -> float:
    """The fixed-time gain ``a1 ||T||**(r1-1) + a2 ||T||**(r2-1)``, zero on Zer(T)."""
    if not isinstance(fp, FixedTime):
        raise TypeError("psi is defined for FixedTime parameters only")
    return gain(fp, float(np.linalg.norm(residual(p, u))))


def rhs(p: IqviProblem, fp: FlowParams, u) -> np.ndarray:
    t = residual(p, u)
    c = gain(fp, float(np.linalg.norm(t)))
    if c == 0.0:
        return np.zeros_like(t)
    return -c * t
