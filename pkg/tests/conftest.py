import numpy as np
import pytest

from iqvip.geometry import FixedBox
from iqvip.problem import AffineOperator, IqviProblem


def random_affine_box_problem(rng, n=None, min_margin=0.1):
    """Random ``f(u) = M u + b`` on a constant box, declared constants exact.

    ``M`` is a symmetric positive definite part plus a small skew part; L and
    beta are the spectral norm and the smallest eigenvalue of the symmetric
    part, computed by numpy's eigen-solvers. With alpha = beta the certificate
    margin is ``beta - sqrt(L^2 - beta^2)``; draws with a relative margin below
    ``min_margin`` are rejected.
    """
    while True:
        dim = int(rng.integers(1, 11)) if n is None else n
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        d = rng.uniform(1.0, 1.3, dim)
        k = rng.standard_normal((dim, dim)) * 0.1
        m = q @ np.diag(d) @ q.T + (k - k.T) / 2
        L = float(np.linalg.norm(m, 2))
        beta = float(np.linalg.eigvalsh((m + m.T) / 2).min())
        rho = np.sqrt(max(L * L - beta * beta, 0.0))
        if beta - rho < min_margin * beta:
            continue
        lo = rng.uniform(-2.0, 0.0, dim)
        hi = lo + rng.uniform(0.1, 3.0, dim)
        b = rng.uniform(-2.0, 2.0, dim)
        return IqviProblem(
            f=AffineOperator(m, b, L=L * (1 + 1e-12), beta=beta * (1 - 1e-12)),
            phi=FixedBox(lo, hi),
            alpha=beta,
        )


def oracle_solution(p, tol=1e-12, max_iter=200_000):
    """Fixed point of the nominal Euler map with step halving.

    Written against numpy directly (clamp onto the box) so it shares no code
    with the solver under test.
    """
    m, b = p.f.matrix, p.f.offset
    lo, hi = p.phi.lo, p.phi.hi
    lam = 1.0
    while lam > 1e-8:
        u = np.zeros(p.dim)
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(max_iter):
                fu = m @ u + b
                t = fu - np.clip(fu - p.alpha * u, lo, hi)
                nt = np.linalg.norm(t)
                if not np.isfinite(nt):
                    break
                if nt <= tol:
                    return u
                u = u - lam * t
        lam /= 2
    raise RuntimeError("oracle failed to converge")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
