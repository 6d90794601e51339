"""Metric projections onto closed convex sets that may move with a parameter.

A moving set maps a point ``u`` to a closed convex set ``Phi(u)``. Every set
here exposes ``project(u, w)``, returning the nearest point of ``Phi(u)`` to
``w``, and a declared modulus ``mu`` such that

    ||P_{Phi(u)}(w) - P_{Phi(v)}(w)|| <= mu * ||u - v||   for all u, v, w.

Box-shaped sets are projected by a componentwise clamp, which is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, InfeasibleProjection

__all__ = [
    "as_vector",
    "MovingSet",
    "FixedBox",
    "AbsBox",
    "TranslatedBox",
    "Singleton",
    "CustomSet",
    "project",
    "estimate_mu",
]


def as_vector(x, dim: Optional[int] = None, name: str = "u") -> np.ndarray:
    """Convert ``x`` to a finite 1-D float array, checking its length."""
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"{name} has length {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


class MovingSet:
    """Base class. Subclasses implement :meth:`_project`."""

    mu: float = 0.0
    dim: Optional[int] = None

    def project(self, u, w) -> np.ndarray:
        u = as_vector(u, self.dim, "u")
        w = as_vector(w, u.shape[0], "w")
        return self._project(u, w)

    def _project(self, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class _Box(MovingSet):
    def bounds(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def _project(self, u, w):
        lo, hi = self.bounds(u)
        # clip returns the bound itself on ties, no tolerance band
        return np.minimum(np.maximum(w, lo), hi)

    def contains(self, u, x, tol: float = 0.0) -> bool:
        lo, hi = self.bounds(as_vector(u, self.dim))
        x = as_vector(x, lo.shape[0], "x")
        return bool(np.all(x >= lo - tol) and np.all(x <= hi + tol))


@dataclass(frozen=True, eq=False)
class FixedBox(_Box):
    """The constant box ``lo <= x <= hi``. Infinite bounds are allowed."""

    lo: np.ndarray
    hi: np.ndarray
    mu: float = 0.0

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionError("lo and hi must be 1-D arrays of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise ValueError("FixedBox requires lo <= hi componentwise")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def bounds(self, u):
        return self.lo, self.hi


@dataclass(frozen=True, eq=False)
class AbsBox(_Box):
    """``Phi(u) = {x : |x_i| <= |u_i|}``, the rectangle cut by the lines x_i = +-|u_i|.

    The projector moves by at most ``||u - v||`` when u changes to v, so mu = 1.
    """

    mu: float = 1.0
    dim: Optional[int] = None

    def bounds(self, u):
        b = np.abs(u)
        return -b, b


@dataclass(frozen=True, eq=False)
class TranslatedBox(_Box):
    """``Phi(u) = {x : u + shift_lo <= x <= u + shift_hi}`` on ``active`` coordinates.

    Coordinates outside ``active`` are unconstrained. Translating a box by u
    moves its projector by at most ``||u - v||``, hence mu = 1.
    """

    shift_lo: np.ndarray
    shift_hi: np.ndarray
    active: Optional[np.ndarray] = None
    mu: float = 1.0
    dim: Optional[int] = None

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.shift_lo, dtype=float))
        b = np.atleast_1d(np.asarray(self.shift_hi, dtype=float))
        if a.shape != b.shape or a.ndim != 1:
            raise DimensionError("shift_lo and shift_hi must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("range shifts must be finite")
        if np.any(a > b):
            raise ValueError("TranslatedBox requires shift_lo <= shift_hi")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.active is None:
            idx = np.arange(a.shape[0])
        else:
            idx = np.asarray(self.active, dtype=int)
            if idx.shape != a.shape:
                raise DimensionError("active index list must match the shift length")
        object.__setattr__(self, "shift_lo", a)
        object.__setattr__(self, "shift_hi", b)
        object.__setattr__(self, "active", idx)

    def bounds(self, u):
        lo = np.full(u.shape, -np.inf)
        hi = np.full(u.shape, np.inf)
        if self.active.size and self.active.max() >= u.shape[0]:
            raise DimensionError("active index out of range for u")
        lo[self.active] = u[self.active] + self.shift_lo
        hi[self.active] = u[self.active] + self.shift_hi
        return lo, hi


@dataclass(frozen=True, eq=False)
class Singleton(MovingSet):
    point: np.ndarray
    mu: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "point", as_vector(self.point, name="point"))

    @property
    def dim(self) -> int:
        return self.point.shape[0]

    def _project(self, u, w):
        return self.point.copy()

    def contains(self, u, x, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(as_vector(x, self.dim) - self.point) <= tol))


@dataclass(frozen=True, eq=False)
class CustomSet(MovingSet):
    """A user-supplied projector ``projector(u, w) -> P_{Phi(u)}(w)``.

    The caller declares ``mu``; it is trusted by the certificates and can be
    spot-checked with :func:`estimate_mu`. ``contains(u, x)`` is optional. Every
    result is re-checked for feasibility, either with ``contains`` or, when that
    is absent, by requiring the projector to fix its own output. The hook must
    be reentrant.
    """

    projector: Callable[[np.ndarray, np.ndarray], np.ndarray]
    mu: float
    contains_hook: Optional[Callable[[np.ndarray, np.ndarray], bool]] = None
    dim: Optional[int] = None
    rtol: float = field(default=1e-12)

    def _project(self, u, w):
        v = np.asarray(self.projector(u, w), dtype=float)
        if v.shape != w.shape or not np.all(np.isfinite(v)):
            raise InfeasibleProjection("custom projector returned a malformed point")
        if self.contains_hook is not None:
            ok = bool(self.contains_hook(u, v))
        else:
            vv = np.asarray(self.projector(u, v), dtype=float)
            scale = max(1.0, float(np.max(np.abs(v))))
            ok = bool(np.max(np.abs(vv - v)) <= self.rtol * scale)
        if not ok:
            raise InfeasibleProjection("custom projector output fails the feasibility re-check")
        return v


def project(phi: MovingSet, u, w) -> np.ndarray:
    """Return ``P_{Phi(u)}(w)``."""
    return phi.project(u, w)


def estimate_mu(
    phi: MovingSet, dim: int, samples: int = 1000, radius: float = 10.0, seed: int = 0
) -> float:
    """Largest sampled ratio ``||P_{Phi(u)}(w) - P_{Phi(v)}(w)|| / ||u - v||``.

    Triples (u, v, w) are drawn uniformly from the cube ``[-radius, radius]^dim``.
    Being a maximum over samples, the result never exceeds the true modulus.
    """
    if samples < 2:
        raise ValueError("samples must be at least 2")
    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        u, v, w = rng.uniform(-radius, radius, size=(3, dim))
        d = np.linalg.norm(u - v)
        if d == 0.0:
            continue
        r = np.linalg.norm(phi.project(u, w) - phi.project(v, w)) / d
        best = max(best, float(r))
    return best
