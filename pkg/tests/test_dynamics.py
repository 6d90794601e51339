import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from iqvip.dynamics import EPS_ZERO, FiniteTime, FixedTime, Nominal, gain, psi, residual, rhs
from iqvip.geometry import Singleton
from iqvip.problem import IqviProblem, Scalar1DOperator, example1_problem, identity_problem

from conftest import oracle_solution, random_affine_box_problem


def slope2():
    return IqviProblem(Scalar1DOperator(2.0), Singleton([0.0]), alpha=1.0, known_solution=[0.0])


def test_residual_at_solution():
    assert np.array_equal(residual(example1_problem(), np.zeros(2)), np.zeros(2))


def test_residual_example1_hand_value():
    assert np.allclose(residual(example1_problem(), [1.0, 1.0]), [4.2, 1.4])


def test_residual_scalar():
    assert residual(slope2(), [0.5])[0] == pytest.approx(1.0)


def test_psi_examples():
    p = slope2()
    assert psi(p, FixedTime(1, 1, 0.3, 1.7), [0.5]) == pytest.approx(2.0)  # ||T|| = 1
    assert psi(p, FixedTime(1, 1, 0.5, 2.0), [0.0]) == 0.0
    assert psi(p, FixedTime(1, 1, 0.5, 2.0), [2.0]) == pytest.approx(4.5)  # ||T|| = 4
    with pytest.raises(TypeError):
        psi(p, Nominal(), [1.0])


def test_rhs_examples():
    p = slope2()
    assert rhs(p, FixedTime(1, 1, 0.5, 2.0), [0.5])[0] == pytest.approx(-2.0)
    for fp in (Nominal(), FiniteTime(), FixedTime(1, 1, 0.5, 2.0)):
        assert np.array_equal(rhs(p, fp, [0.0]), [0.0])


def test_finite_time_rhs_vector_example():
    # T(u) = (3, 4) for f = identity, Phi = {0}, alpha = 1
    p = IqviProblem(Scalar1DOperator(1.0, dim=2), Singleton([0.0, 0.0]), alpha=1.0)
    r = rhs(p, FiniteTime(1.0, 3.0), [3.0, 4.0])
    assert np.allclose(r, -np.array([3.0, 4.0]) / math.sqrt(5.0))
    assert np.linalg.norm(r) == pytest.approx(math.sqrt(5.0))


def test_flow_parameter_bounds():
    with pytest.raises(ValueError):
        Nominal(0.0)
    with pytest.raises(ValueError):
        FiniteTime(1.0, 2.0)
    with pytest.raises(ValueError):
        FixedTime(1, 1, 1.0, 2.0)
    with pytest.raises(ValueError):
        FixedTime(1, 1, 0.5, 1.0)
    with pytest.raises(ValueError):
        FixedTime(0, 1, 0.5, 2.0)
    fp = FixedTime.from_nu(4)
    assert (fp.r1, fp.r2) == (0.5, 1.5)


def test_gain_zero_threshold():
    assert gain(FiniteTime(), EPS_ZERO) == 0.0
    assert gain(FixedTime(1, 1, 0.5, 2), 0.0) == 0.0
    assert gain(Nominal(2.0), 0.0) == 2.0
    assert gain(FiniteTime(), 2 * EPS_ZERO) > 0


norms = st.floats(1e-10, 1e6)


@settings(max_examples=200, deadline=None)
@given(
    t=norms,
    a1=st.floats(0.1, 10),
    a2=st.floats(0.1, 10),
    r1=st.floats(0.05, 0.95),
    r2=st.floats(1.05, 3.0),
    sigma=st.floats(0.1, 10),
    gamma=st.floats(2.1, 10),
)
def test_rhs_norm_identities(t, a1, a2, r1, r2, sigma, gamma):
    p = identity_problem()
    u = np.array([t])  # T(u) = u
    fx = rhs(p, FixedTime(a1, a2, r1, r2), u)
    assert abs(fx[0]) == pytest.approx(a1 * t**r1 + a2 * t**r2, rel=1e-12)
    assert abs(rhs(p, Nominal(sigma), u)[0]) == pytest.approx(sigma * t, rel=1e-12)
    ft = rhs(p, FiniteTime(sigma, gamma), u)
    assert abs(ft[0]) == pytest.approx(sigma * t ** (1 / (gamma - 1)), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_residual_lipschitz(seed):
    rng = np.random.default_rng(seed)
    p = random_affine_box_problem(rng)
    const = 2 * p.f.L + p.alpha + p.phi.mu
    for _ in range(50):
        u, v = rng.uniform(-5, 5, (2, p.dim))
        lhs = np.linalg.norm(residual(p, u) - residual(p, v))
        assert lhs <= const * np.linalg.norm(u - v) + 1e-9


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_descent_and_sandwich(seed):
    rng = np.random.default_rng(seed)
    p = random_affine_box_problem(rng)
    us = oracle_solution(p)
    rho = math.sqrt(p.f.L**2 + p.alpha**2 - 2 * p.alpha * p.f.beta)
    mu = p.phi.mu
    for _ in range(50):
        u = us + rng.uniform(-3, 3, p.dim)
        t = residual(p, u)
        d = np.linalg.norm(u - us)
        assert np.dot(u - us, t) >= (p.f.beta - rho - mu) * d * d - 1e-9
        assert np.linalg.norm(t) <= (p.f.L + mu + rho) * d + 1e-9
        assert np.linalg.norm(t) >= abs(p.f.beta - mu - rho) * d - 1e-9


@settings(max_examples=200, deadline=None)
@given(u=arrays(np.float64, 2, elements=st.floats(-10, 10)))
def test_equilibrium_equivalence_example1(u):
    p = example1_problem()
    zero = np.linalg.norm(residual(p, u)) <= EPS_ZERO
    for fp in (Nominal(), FiniteTime(), FixedTime(20, 20, 0.95, 1.5)):
        assert (np.linalg.norm(rhs(p, fp, u)) <= EPS_ZERO) == zero
