"""Inverse quasi-variational inequality instances.

An instance asks for ``u*`` with ``f(u*) in Phi(u*)`` and
``<u*, y - f(u*)> >= 0`` for every ``y in Phi(u*)``. It bundles the operator
``f`` (with its declared Lipschitz constant ``L`` and strong-monotonicity
modulus ``beta``), the moving set ``Phi``, and the scaling ``alpha`` used by
the residual map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DimensionError
from .geometry import (
    AbsBox,
    FixedBox,
    MovingSet,
    Singleton,
    TranslatedBox,
    as_vector,
)

__all__ = [
    "Operator",
    "AffineOperator",
    "Scalar1DOperator",
    "CustomOperator",
    "IqviProblem",
    "eval_f",
    "estimate_constants",
    "example1_problem",
    "identity_problem",
    "problem_from_dict",
    "problem_to_dict",
    "load_problem",
    "save_problem",
]


class Operator:
    """Single-valued operator ``f`` with optional declared constants."""

    L: Optional[float] = None
    beta: Optional[float] = None
    dim: Optional[int] = None

    def __call__(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_constants(self):
        if self.L is not None and self.L <= 0:
            raise ValueError("declared L must be positive")
        if self.beta is not None and self.beta < 0:
            raise ValueError("declared beta must be nonnegative")
        if self.L is not None and self.beta is not None and self.beta > self.L:
            raise ValueError(
                f"declared beta={self.beta} exceeds declared L={self.L}; "
                "a Lipschitz constant always dominates the monotonicity modulus"
            )


@dataclass(frozen=True, eq=False)
class AffineOperator(Operator):
    """``f(u) = M u + b``."""

    matrix: np.ndarray
    offset: Optional[np.ndarray] = None
    L: Optional[float] = None
    beta: Optional[float] = None

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"affine operator matrix must be square, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix has non-finite entries")
        b = np.zeros(m.shape[0]) if self.offset is None else as_vector(self.offset, m.shape[0], "offset")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", b)
        self._check_constants()

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, u):
        return self.matrix @ u + self.offset


@dataclass(frozen=True, eq=False)
class Scalar1DOperator(Operator):
    """``f(u) = slope * u`` on the real line.

    Defaults ``L = beta = slope`` when the slope is positive.
    """

    slope: float
    L: Optional[float] = None
    beta: Optional[float] = None
    dim: int = 1

    def __post_init__(self):
        if self.slope > 0:
            if self.L is None:
                object.__setattr__(self, "L", float(self.slope))
            if self.beta is None:
                object.__setattr__(self, "beta", float(self.slope))
        self._check_constants()

    def __call__(self, u):
        return self.slope * u


@dataclass(frozen=True, eq=False)
class CustomOperator(Operator):
    func: Callable[[np.ndarray], np.ndarray]
    L: Optional[float] = None
    beta: Optional[float] = None
    dim: Optional[int] = None

    def __post_init__(self):
        self._check_constants()

    def __call__(self, u):
        return np.asarray(self.func(u), dtype=float)


@dataclass(frozen=True, eq=False)
class IqviProblem:
    """An operator, a moving set and the residual scaling ``alpha``.

    ``known_solution`` only feeds the error column of trajectories; solvers
    never read it.
    """

    f: Operator
    phi: MovingSet
    alpha: float
    known_solution: Optional[np.ndarray] = None
    dim: Optional[int] = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        dims = {d for d in (self.dim, self.f.dim, getattr(self.phi, "dim", None)) if d is not None}
        if self.known_solution is not None:
            ks = as_vector(self.known_solution, name="known_solution")
            dims.add(ks.shape[0])
            object.__setattr__(self, "known_solution", ks)
        if len(dims) > 1:
            raise DimensionError(f"inconsistent dimensions {sorted(dims)}")
        if dims:
            object.__setattr__(self, "dim", dims.pop())

    def error(self, u: np.ndarray) -> Optional[float]:
        if self.known_solution is None:
            return None
        return float(np.linalg.norm(u - self.known_solution))


def eval_f(p: IqviProblem, u) -> np.ndarray:
    u = as_vector(u, p.dim)
    out = np.asarray(p.f(u), dtype=float)
    if out.shape != u.shape:
        raise DimensionError(f"operator returned shape {out.shape}, expected {u.shape}")
    return out


def estimate_constants(
    p: IqviProblem, samples: int = 1000, radius: float = 1.0, seed: int = 0
) -> tuple[float, float]:
    """Sampled Lipschitz constant and strong-monotonicity modulus of ``f``.

    Returns ``(L_hat, beta_hat)``: the largest ratio ``||f(u)-f(v)|| / ||u-v||``
    and the smallest ratio ``<f(u)-f(v), u-v> / ||u-v||**2`` over random pairs
    drawn uniformly from the ball of the given radius.
    """
    if samples < 2:
        raise ValueError("samples must be at least 2")
    if p.dim is None:
        raise ValueError("problem dimension unknown; set IqviProblem.dim")
    rng = np.random.default_rng(seed)
    n = p.dim
    lhat, bhat = 0.0, np.inf
    for _ in range(samples):
        uv = rng.standard_normal((2, n))
        uv *= radius * rng.uniform(size=(2, 1)) ** (1.0 / n) / np.linalg.norm(uv, axis=1, keepdims=True)
        u, v = uv
        d = u - v
        dd = float(d @ d)
        if dd == 0.0:
            continue
        df = eval_f(p, u) - eval_f(p, v)
        lhat = max(lhat, float(np.sqrt(df @ df / dd)))
        bhat = min(bhat, float(df @ d / dd))
    return lhat, bhat


# ---------------------------------------------------------------- benchmarks

EXAMPLE1_MATRIX = np.array([[3.2, 2.0], [-0.6, 1.0]])


def example1_problem(alpha: float = 2.0) -> IqviProblem:
    """The 2-D affine benchmark: ``f(u) = A u`` with Phi(u) = [-|u1|,|u1|] x [-|u2|,|u2|].

    The declared constants L = 2.2 and beta = 2 are the eigenvalues of A, as
    used in the original experiment. For this non-symmetric A the operator
    norm (about 3.774) and the symmetric-part minimum eigenvalue (about 0.796)
    differ; :func:`iqvip.analysis.certify` reports the discrepancy.
    """
    return IqviProblem(
        f=AffineOperator(EXAMPLE1_MATRIX, L=2.2, beta=2.0),
        phi=AbsBox(mu=1.0, dim=2),
        alpha=alpha,
        known_solution=np.zeros(2),
    )


def identity_problem(alpha: float = 1.0) -> IqviProblem:
    """``f(u) = u`` on the line with ``Phi = {0}``; the residual is ``T(u) = u``."""
    return IqviProblem(
        f=Scalar1DOperator(1.0),
        phi=Singleton(np.zeros(1)),
        alpha=alpha,
        known_solution=np.zeros(1),
    )


# ------------------------------------------------------------- config files

_SET_KINDS = ("fixed_box", "abs_box", "translated_box", "singleton")
_OP_KINDS = ("affine", "scalar")


def _get(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise ConfigError(f"{where}{key}", "missing")
    return d[key]


def _floats(x, field: str, dim: Optional[int] = None) -> np.ndarray:
    try:
        v = np.asarray(x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(field, f"not numeric ({exc})") from None
    if v.ndim == 0:
        v = v.reshape(1)
    if dim is not None and v.shape[0] != dim:
        raise ConfigError(field, f"expected length {dim}, got {v.shape[0]}")
    return v


def _float(x, field: str) -> float:
    try:
        return float(x)
    except (TypeError, ValueError):
        raise ConfigError(field, f"not a number: {x!r}") from None


def problem_from_dict(cfg: dict) -> IqviProblem:
    """Build a problem from the decoded config document (see README for the schema)."""
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "expected a mapping")
    dim = _get(cfg, "dim", "")
    if not isinstance(dim, int) or dim < 1:
        raise ConfigError("dim", f"must be a positive integer, got {dim!r}")

    op = _get(cfg, "operator", "")
    kind = _get(op, "kind", "operator.")
    L = op.get("L")
    beta = op.get("beta")
    L = None if L is None else _float(L, "operator.L")
    beta = None if beta is None else _float(beta, "operator.beta")
    try:
        if kind == "affine":
            m = _floats(_get(op, "matrix", "operator."), "operator.matrix")
            if m.shape != (dim, dim):
                raise ConfigError("operator.matrix", f"expected shape ({dim}, {dim}), got {m.shape}")
            off = op.get("offset")
            off = None if off is None else _floats(off, "operator.offset", dim)
            f = AffineOperator(m, off, L=L, beta=beta)
        elif kind == "scalar":
            if dim != 1:
                raise ConfigError("operator.kind", "scalar operator requires dim = 1")
            f = Scalar1DOperator(_float(_get(op, "slope", "operator."), "operator.slope"), L=L, beta=beta)
        else:
            raise ConfigError("operator.kind", f"unknown kind {kind!r}, expected one of {_OP_KINDS}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("operator", str(exc)) from None

    st = _get(cfg, "set", "")
    skind = _get(st, "kind", "set.")
    params = st.get("params", {}) or {}
    mu = st.get("mu")
    try:
        if skind == "fixed_box":
            lo = _floats(_get(params, "lo", "set.params."), "set.params.lo", dim)
            hi = _floats(_get(params, "hi", "set.params."), "set.params.hi", dim)
            phi = FixedBox(lo, hi, mu=0.0 if mu is None else _float(mu, "set.mu"))
        elif skind == "abs_box":
            phi = AbsBox(mu=1.0 if mu is None else _float(mu, "set.mu"), dim=dim)
        elif skind == "translated_box":
            a = _floats(_get(params, "A", "set.params."), "set.params.A")
            b = _floats(_get(params, "B", "set.params."), "set.params.B", a.shape[0])
            active = params.get("active")
            phi = TranslatedBox(a, b, active, mu=1.0 if mu is None else _float(mu, "set.mu"), dim=dim)
        elif skind == "singleton":
            pt = _floats(params.get("point", np.zeros(dim)), "set.params.point", dim)
            phi = Singleton(pt, mu=0.0 if mu is None else _float(mu, "set.mu"))
        else:
            raise ConfigError("set.kind", f"unknown kind {skind!r}, expected one of {_SET_KINDS}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("set", str(exc)) from None

    alpha = _float(_get(cfg, "alpha", ""), "alpha")
    if alpha <= 0:
        raise ConfigError("alpha", "must be positive")
    ks = cfg.get("known_solution")
    ks = None if ks is None else _floats(ks, "known_solution", dim)
    return IqviProblem(f=f, phi=phi, alpha=alpha, known_solution=ks, dim=dim)


def problem_to_dict(p: IqviProblem) -> dict:
    f, phi = p.f, p.phi
    if isinstance(f, AffineOperator):
        op = {"kind": "affine", "matrix": f.matrix.tolist(), "offset": f.offset.tolist()}
    elif isinstance(f, Scalar1DOperator):
        op = {"kind": "scalar", "slope": f.slope}
    else:
        raise TypeError(f"cannot serialize operator {type(f).__name__}")
    op["L"], op["beta"] = f.L, f.beta
    if isinstance(phi, FixedBox):
        st = {"kind": "fixed_box", "params": {"lo": phi.lo.tolist(), "hi": phi.hi.tolist()}}
    elif isinstance(phi, AbsBox):
        st = {"kind": "abs_box", "params": {}}
    elif isinstance(phi, TranslatedBox):
        st = {
            "kind": "translated_box",
            "params": {"A": phi.shift_lo.tolist(), "B": phi.shift_hi.tolist(), "active": phi.active.tolist()},
        }
    elif isinstance(phi, Singleton):
        st = {"kind": "singleton", "params": {"point": phi.point.tolist()}}
    else:
        raise TypeError(f"cannot serialize set {type(phi).__name__}")
    st["mu"] = phi.mu
    return {
        "dim": p.dim,
        "operator": op,
        "set": st,
        "alpha": p.alpha,
        "known_solution": None if p.known_solution is None else p.known_solution.tolist(),
    }


def load_problem(path) -> IqviProblem:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read ({exc.strerror})") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return problem_from_dict(cfg)


def save_problem(p: IqviProblem, path) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(p), indent=2) + "\n")

