"""Stability certificates and settling-time bounds.

With ``rho = sqrt(L**2 + alpha**2 - 2*alpha*beta)`` the two conditions checked
are ``rho + mu < alpha`` (existence and uniqueness of the solution) and
``rho + mu < beta`` (finite- and fixed-time convergence). The bound calculators
require the second one; the solvers never consult certificates.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .dynamics import FiniteTime, FixedTime
from .errors import ConditionViolated, ExponentMismatch, InvalidCertificate
from .problem import IqviProblem, estimate_constants

__all__ = [
    "StabilityCertificate",
    "FixedTimeBound",
    "FiniteTimeBound",
    "ErrorEnvelope",
    "certify",
    "certificate_from_constants",
    "fixed_time_bound",
    "finite_time_bound",
    "error_envelope",
    "build_report",
    "format_report",
    "report_json",
]


@dataclass(frozen=True)
class StabilityCertificate:
    L: float
    beta: float
    mu: float
    alpha: float
    rho: float
    condition_a: bool
    condition_beta: bool
    declared_used: bool
    L_estimated: Optional[float] = None
    beta_estimated: Optional[float] = None
    estimated_discrepancy: Optional[str] = None

    @property
    def margin(self) -> float:
        """``beta - mu - rho``; positive exactly when ``condition_beta`` holds."""
        return self.beta - self.mu - self.rho


def certificate_from_constants(
    L: float, beta: float, mu: float, alpha: float, declared_used: bool = True
) -> StabilityCertificate:
    disc = L * L + alpha * alpha - 2.0 * alpha * beta
    if disc < 0:
        raise InvalidCertificate(disc)
    rho = math.sqrt(disc)
    return StabilityCertificate(
        L=L,
        beta=beta,
        mu=mu,
        alpha=alpha,
        rho=rho,
        condition_a=rho + mu < alpha,
        condition_beta=rho + mu < beta,
        declared_used=declared_used,
    )


def certify(
    p: IqviProblem,
    use_declared: bool = True,
    estimate: bool = True,
    samples: int = 2000,
    radius: float = 1.0,
    seed: int = 0,
) -> StabilityCertificate:
    """Compute rho and both conditions for ``p``.

    With ``use_declared`` the operator's declared ``L`` and ``beta`` are used,
    and (if ``estimate``) sampled estimates are attached with a note whenever
    the estimated L exceeds the declared one, or the estimated beta falls
    below the declared one, by more than 1%. Otherwise the sampled constants
    themselves are certified, as they are when the operator declares none.
    ``mu`` is always the set's declared modulus.
    """
    Ld, bd = p.f.L, p.f.beta
    if Ld is None or bd is None:
        # nothing declared: certify the sampled constants
        use_declared = False
    est = None
    if estimate or not use_declared:
        est = estimate_constants(p, samples=samples, radius=radius, seed=seed)
    if use_declared:
        L, beta = float(Ld), float(bd)
    else:
        L, beta = est
    cert = certificate_from_constants(L, beta, float(p.phi.mu), float(p.alpha), use_declared)
    note = None
    if est is not None and Ld is not None and bd is not None:
        parts = []
        if est[0] > 1.01 * Ld:
            parts.append(f"estimated L={est[0]:.6g} exceeds declared L={Ld:.6g}")
        if est[1] < 0.99 * bd:
            parts.append(f"estimated beta={est[1]:.6g} below declared beta={bd:.6g}")
        if parts:
            note = "; ".join(parts)
    return StabilityCertificate(
        **{
            **asdict(cert),
            "L_estimated": None if est is None else est[0],
            "beta_estimated": None if est is None else est[1],
            "estimated_discrepancy": note,
        }
    )


# ------------------------------------------------------------------ bounds


@dataclass(frozen=True)
class FixedTimeBound:
    r1: float
    r2: float
    q1: float
    q2: float
    p1: float
    p2: float
    s1: float
    s2: float
    t_max_general: float
    t_max_symmetric: Optional[float] = None
    xi: Optional[float] = None


def fixed_time_bound(cert: StabilityCertificate, fp: FixedTime) -> FixedTimeBound:
    """Settling-time bound of the fixed-time flow.

    Along the flow ``V = ||u - u*||**2 / 2`` obeys
    ``dV/dt <= -(s1 V**p1 + s2 V**p2)`` with

        q1 = a1 (beta - mu - rho) / (L + mu + rho)**(1 - r1)
        q2 = a2 (beta - mu - rho)**r2
        p_i = (1 + r_i) / 2,   s_i = 2**p_i q_i

    so every trajectory settles before ``1/(s1 (1-p1)) + 1/(s2 (p2-1))``.
    When ``r1 + r2 == 2`` the exponents are symmetric, ``p = 1 -+ 1/(2 xi)``
    with ``xi = 1/(1 - r1)``, and the sharper bound ``pi xi / sqrt(s1 s2)`` is
    also reported.
    """
    if not isinstance(fp, FixedTime):
        raise TypeError("fixed_time_bound needs FixedTime parameters")
    if not cert.condition_beta:
        raise ConditionViolated(
            f"rho + mu = {cert.rho + cert.mu:.6g} is not below beta = {cert.beta:.6g}"
        )
    m = cert.margin
    q1 = fp.a1 * m / (cert.L + cert.mu + cert.rho) ** (1.0 - fp.r1)
    q2 = fp.a2 * m**fp.r2
    p1 = 0.5 * (1.0 + fp.r1)
    p2 = 0.5 * (1.0 + fp.r2)
    s1 = 2.0**p1 * q1
    s2 = 2.0**p2 * q2
    tg = 1.0 / (s1 * (1.0 - p1)) + 1.0 / (s2 * (p2 - 1.0))
    ts = xi = None
    if math.isclose(fp.r1 + fp.r2, 2.0, rel_tol=0.0, abs_tol=1e-12):
        xi = 1.0 / (1.0 - fp.r1)
        ts = math.pi * xi / math.sqrt(s1 * s2)
    return FixedTimeBound(fp.r1, fp.r2, q1, q2, p1, p2, s1, s2, tg, ts, xi)


@dataclass(frozen=True)
class FiniteTimeBound:
    p: float
    M: float
    K: float
    d0: float
    t_max: float

    def t_max_at(self, d0: float) -> float:
        if d0 < 0:
            raise ValueError("distance must be nonnegative")
        return d0 ** (2.0 * (1.0 - self.p)) / (2.0 ** (1.0 - self.p) * self.K * (1.0 - self.p))


def finite_time_bound(cert: StabilityCertificate, fp: FiniteTime, d0: float) -> FiniteTimeBound:
    """Settling-time bound of the finite-time flow from distance ``d0`` to the solution.

    ``p = gamma / (2 (gamma - 1))``, ``M = sigma (beta - rho - mu)**(gamma/(gamma-1))``,
    ``K = 2**p M`` and ``T_max = d0**(2(1-p)) / (2**(1-p) K (1-p))``.
    """
    if not isinstance(fp, FiniteTime):
        raise TypeError("finite_time_bound needs FiniteTime parameters")
    if not cert.condition_beta:
        raise ConditionViolated(
            f"rho + mu = {cert.rho + cert.mu:.6g} is not below beta = {cert.beta:.6g}"
        )
    if d0 < 0:
        raise ValueError("d0 must be nonnegative")
    g = fp.gamma
    p = g / (2.0 * (g - 1.0))
    M = fp.sigma * cert.margin ** (g / (g - 1.0))
    K = M * 2.0**p
    t_max = d0 ** (2.0 * (1.0 - p)) / (2.0 ** (1.0 - p) * K * (1.0 - p))
    return FiniteTimeBound(p=p, M=M, K=K, d0=float(d0), t_max=t_max)


@dataclass(frozen=True)
class ErrorEnvelope:
    """Error bound for the fixed-step Euler iterates of the fixed-time flow.

    For ``n <= n_star``::

        ||u_n - u*|| < sqrt(2) (sqrt(s1/s2) tan(pi/2 - sqrt(s1 s2) lam n / nu))**(nu/2) + eps

    and ``eps`` afterwards. The ``sqrt(2)`` is ``1/sqrt(c)`` for the quadratic
    growth constant ``c = 1/2`` of ``V = ||u - u*||**2 / 2``.
    """

    nu: float
    lam: float
    epsilon: float
    s1: float
    s2: float
    n_star: int

    def bound(self, n: int) -> float:
        if n <= 0:
            return math.inf
        if n > self.n_star:
            return self.epsilon
        arg = math.pi / 2 - math.sqrt(self.s1 * self.s2) * self.lam * n / self.nu
        if arg <= 0:
            # rounding near n_star
            return self.epsilon
        base = math.sqrt(self.s1 / self.s2) * math.tan(arg)
        return math.sqrt(2.0) * base ** (self.nu / 2.0) + self.epsilon

    def bounds(self, n_max: int) -> np.ndarray:
        return np.array([self.bound(n) for n in range(n_max + 1)])


def error_envelope(ftb: FixedTimeBound, nu: float, lam: float, epsilon: float) -> ErrorEnvelope:
    if not nu > 2:
        raise ValueError("nu must exceed 2")
    if not (lam > 0 and epsilon > 0):
        raise ValueError("lam and epsilon must be positive")
    if not (
        math.isclose(ftb.r1, 1 - 2 / nu, rel_tol=0, abs_tol=1e-12)
        and math.isclose(ftb.r2, 1 + 2 / nu, rel_tol=0, abs_tol=1e-12)
    ):
        raise ExponentMismatch(
            f"exponents (r1, r2) = ({ftb.r1}, {ftb.r2}) do not match "
            f"(1 - 2/nu, 1 + 2/nu) = ({1 - 2 / nu}, {1 + 2 / nu})"
        )
    n_star = math.ceil(nu * math.pi / (2.0 * lam * math.sqrt(ftb.s1 * ftb.s2)))
    return ErrorEnvelope(nu, lam, epsilon, ftb.s1, ftb.s2, max(int(n_star), 1))


# ----------------------------------------------------------------- reports


def build_report(
    cert: StabilityCertificate,
    fixed: Optional[FixedTimeBound] = None,
    finite: Optional[FiniteTimeBound] = None,
) -> dict:
    rep = {"certificate": asdict(cert)}
    if fixed is not None:
        rep["fixed_time_bound"] = asdict(fixed)
    if finite is not None:
        rep["finite_time_bound"] = asdict(finite)
    return rep


def format_report(rep: dict) -> str:
    """Flatten a report into ``section.key: value`` lines."""
    lines = []
    for section, body in rep.items():
        for k, v in body.items():
            if isinstance(v, float):
                v = format(v, ".10g")
            lines.append(f"{section}.{k}: {v}")
    return "\n".join(lines) + "\n"


def report_json(rep: dict) -> str:
    return json.dumps(rep, indent=2, sort_keys=False) + "\n"
