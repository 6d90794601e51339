"""Toll iteration on the shipped river-crossing network.

Three of the four crossings are tolled. The target is to keep each tolled
crossing's flow inside the band [u + A, u + B] around its toll u.
"""

import numpy as np

from iqvip import FixedTime
from iqvip.integrate import Harmonic, StopCriteria
from iqvip.traffic import solve_road_pricing, synthetic_network, user_equilibrium

net, od = synthetic_network()
free = user_equilibrium(net, od, gap_tol=1e-8)
print("untolled crossing flows:", np.round(free.flows[list(net.tolled)], 3))
print("target bands at zero toll:", [(float(a), float(b)) for a, b in zip(net.A, net.B)])

res = solve_road_pricing(net, od, FixedTime(0.75, 0.75, 0.65, 1.5), Harmonic(4.0), 0.5,
                         stop=StopCriteria(max_iter=200), gap_tol=1e-8)
R = res.trajectory.extras["R"]
for n in (1, 2, 5, 7, 10, 20, 50, 100, 200):
    if n < len(R):
        print(f"n={n:3d}  R_n={R[n]:.3e}  tolls={np.round(res.trajectory.states[n], 4)}")
print("final tolls:", np.round(res.tolls, 4))
print("final flows:", np.round(res.flows, 4))
print("flows - tolls:", np.round(res.flows - res.tolls, 4), "vs bands", [(float(a), float(b)) for a, b in zip(net.A, net.B)])
