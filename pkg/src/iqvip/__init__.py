"""Finite-time and fixed-time projection flows for inverse quasi-variational inequalities.

The problem: find ``u*`` with ``f(u*)`` in ``Phi(u*)`` and
``<alpha u*, v - f(u*)> >= 0`` for every ``v`` in ``Phi(u*)``, where ``Phi`` is
a moving closed convex set. Solutions are the zeros of the residual map
``T(u) = f(u) - P_{Phi(u)}(f(u) - alpha u)``.
"""

from .analysis import (
    ErrorEnvelope,
    FiniteTimeBound,
    FixedTimeBound,
    StabilityCertificate,
    certificate_from_constants,
    certify,
    error_envelope,
    finite_time_bound,
    fixed_time_bound,
)
from .dynamics import EPS_ZERO, FiniteTime, FixedTime, Nominal, gain, psi, residual, rhs
from .errors import (
    ConditionViolated,
    ConfigError,
    DimensionError,
    ExponentMismatch,
    InfeasibleProjection,
    InvalidCertificate,
    IqvipError,
    NonFiniteError,
    UnreachableDestination,
)
from .geometry import AbsBox, CustomSet, FixedBox, MovingSet, Singleton, TranslatedBox, estimate_mu, project
from .integrate import (
    Fixed,
    Harmonic,
    StopCriteria,
    Termination,
    Trajectory,
    euler,
    integrate_reference,
    measure_settling,
)
from .problem import (
    AffineOperator,
    CustomOperator,
    IqviProblem,
    Scalar1DOperator,
    estimate_constants,
    example1_problem,
    identity_problem,
    load_problem,
)

__version__ = "0.1.0"
