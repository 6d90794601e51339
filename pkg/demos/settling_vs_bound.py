"""Settling times of the finite-time and fixed-time flows on u' = -T(u), T(u) = u.

The fixed-time settling time saturates as the start moves away, while the
finite-time one keeps growing like 2 sqrt(d0).
"""

from iqvip import FiniteTime, FixedTime, certify, finite_time_bound, fixed_time_bound, identity_problem
from iqvip.integrate import integrate_reference, measure_settling

p = identity_problem()
cert = certify(p, estimate=False)
fixed = FixedTime(1, 1, 0.5, 3.0)
finite = FiniteTime(1.0, 3.0)
t_fixed = fixed_time_bound(cert, fixed).t_max_general

print(f"fixed-time bound (any start): {t_fixed:.5f}\n")
print(f"{'u0':>7} {'fixed':>9} {'finite':>9} {'finite bound':>13}")
for u0 in (0.1, 1.0, 10.0, 100.0):
    tr = integrate_reference(p, fixed, [u0], 1e-4, t_fixed, stop_tol=1e-6)
    bound = finite_time_bound(cert, finite, u0).t_max
    tr2 = integrate_reference(p, finite, [u0], 5e-4, bound + 0.1, stop_tol=1e-6)
    print(f"{u0:7g} {measure_settling(tr, 1e-6):9.4f} {measure_settling(tr2, 1e-6):9.4f} {bound:13.4f}")
