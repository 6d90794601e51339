"""Euler iterates of the symmetric fixed-time flow against the tan-shaped envelope."""

from iqvip import FixedTime, certify, error_envelope, fixed_time_bound, identity_problem
from iqvip.integrate import Fixed, StopCriteria, euler

p = identity_problem()
fp = FixedTime.from_nu(4)
ftb = fixed_time_bound(certify(p, estimate=False), fp)

for lam in (0.1, 0.05, 0.025):
    env = error_envelope(ftb, 4.0, lam, 1e-3)
    tr = euler(p, fp, [1.0], Fixed(lam), StopCriteria(max_iter=env.n_star + 50))
    inside = all(tr.errors[n] < env.bound(n) for n in range(1, env.n_star + 1))
    tail = tr.errors[env.n_star + 1 :].max()
    print(f"lambda={lam:<6g} n*={env.n_star:<4d} inside envelope: {inside!s:<5}  max error after n*: {tail:.2e}")
