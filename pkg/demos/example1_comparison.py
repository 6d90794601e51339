"""Fixed-time Euler scheme vs the plain projection iteration on the 2-D benchmark.

Run with ``python3 demos/example1_comparison.py``. Prints the error of both
sequences every ten steps and the step at which each first drops below 1e-4.
"""

import numpy as np

from iqvip import FixedTime, Nominal, certify, example1_problem, fixed_time_bound
from iqvip.integrate import Fixed, StopCriteria, euler

p = example1_problem()
cert = certify(p, estimate=False)
fp = FixedTime(20, 20, 0.95, 1.5)
print(f"rho = {cert.rho:.6f}, rho + mu = {cert.rho + cert.mu:.6f} < beta = {cert.beta}: {cert.condition_beta}")
print(f"continuous settling bound: {fixed_time_bound(cert, fp).t_max_general:.4f}")

stop = StopCriteria(max_iter=150)
fast = euler(p, fp, [1.0, 1.0], Fixed(0.00146), stop)
base = euler(p, Nominal(), [1.0, 1.0], Fixed(0.00146), stop)

print(f"\n{'n':>4} {'fixed-time':>12} {'nominal':>12}")
for n in range(0, 151, 10):
    print(f"{n:4d} {fast.errors[n]:12.4e} {base.errors[n]:12.4e}")

hit = np.nonzero(fast.errors < 1e-4)[0]
print(f"\nfixed-time error first below 1e-4 at n = {hit[0]}")
print(f"max-norm error at n = 100: {np.max(np.abs(fast.states[100])):.4e}")
