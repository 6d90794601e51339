"""Road pricing on a congested network.

Tolls ``u`` on a subset ``J`` of links shift the fixed-demand user equilibrium;
the equilibrium flows on ``J`` define the implicit operator ``f(u)``. The
authority wants ``u + A <= f(u) <= u + B`` and updates tolls by

    u_{n+1} = u_n + lambda_n psi(u_n) [f(u_n) - P_{Phi(u_n)}(f(u_n) + alpha u_n)],
    Phi(u) = {x : u + A <= x <= u + B}.

Link travel times follow the BPR curve ``t0 (1 + 0.15 (f/c)**4)`` and the
equilibrium is computed with Frank-Wolfe using exact line search on the
Beckmann objective.
"""

from __future__ import annotations

import csv
import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Optional, Sequence

import numpy as np

from .dynamics import EPS_ZERO, FixedTime, gain
from .errors import ConfigError, DimensionError, NonFiniteError, UnreachableDestination
from .geometry import TranslatedBox, as_vector
from .integrate import StepSchedule, StopCriteria, Termination, Trajectory, _fmt
from .problem import Operator

__all__ = [
    "Link",
    "TrafficNetwork",
    "ODMatrix",
    "UEResult",
    "RoadPricingResult",
    "bpr_time",
    "bpr_integral",
    "shortest_paths",
    "all_or_nothing",
    "user_equilibrium",
    "road_pricing_operator",
    "TrafficOperator",
    "solve_road_pricing",
    "load_links_csv",
    "load_od_csv",
    "synthetic_network",
    "write_toll_trajectory_csv",
]

BPR_ALPHA = 0.15
BPR_POWER = 4


def bpr_time(t0, c, f):
    """BPR travel time ``t0 * (1 + 0.15 * (f / c)**4)``; works elementwise on arrays."""
    t0 = np.asarray(t0, dtype=float)
    c = np.asarray(c, dtype=float)
    f = np.asarray(f, dtype=float)
    if np.any(t0 <= 0) or np.any(c <= 0):
        raise ValueError("free-flow time and capacity must be positive")
    if np.any(f < 0):
        raise ValueError("flow must be nonnegative")
    out = t0 * (1.0 + BPR_ALPHA * (f / c) ** BPR_POWER)
    return float(out) if out.ndim == 0 else out


def bpr_integral(t0, c, f):
    """``integral_0^f bpr_time(t0, c, x) dx``."""
    t0 = np.asarray(t0, dtype=float)
    c = np.asarray(c, dtype=float)
    f = np.asarray(f, dtype=float)
    return t0 * (f + BPR_ALPHA * c * (f / c) ** (BPR_POWER + 1) / (BPR_POWER + 1))


@dataclass(frozen=True)
class Link:
    id: Hashable
    tail: Hashable
    head: Hashable
    t0: float
    capacity: float


@dataclass(frozen=True, eq=False)
class TrafficNetwork:
    """Directed network with BPR links and a tolled subset.

    ``tolled`` lists positions into ``links``; ``A`` and ``B`` are the lower and
    upper range shifts on those links.
    """

    links: tuple
    tolled: tuple = ()
    A: np.ndarray = field(default_factory=lambda: np.zeros(0))
    B: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nodes: tuple = ()

    def __post_init__(self):
        links = tuple(self.links)
        if not links:
            raise ValueError("network has no links")
        for lk in links:
            if not (lk.t0 > 0 and lk.capacity > 0):
                raise ValueError(f"link {lk.id!r}: t0 and capacity must be positive")
        nodes = list(self.nodes)
        seen = set(nodes)
        for lk in links:
            for n in (lk.tail, lk.head):
                if n not in seen:
                    seen.add(n)
                    nodes.append(n)
        tolled = tuple(int(j) for j in self.tolled)
        if any(j < 0 or j >= len(links) for j in tolled) or len(set(tolled)) != len(tolled):
            raise ValueError("tolled indices must be distinct positions into links")
        A = np.atleast_1d(np.asarray(self.A, dtype=float))
        B = np.atleast_1d(np.asarray(self.B, dtype=float))
        if A.shape != (len(tolled),) or B.shape != (len(tolled),):
            raise DimensionError("A and B must have one entry per tolled link")
        if np.any(A > B):
            raise ValueError("range shifts require A <= B")
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "nodes", tuple(nodes))
        object.__setattr__(self, "tolled", tolled)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        node_index = {n: i for i, n in enumerate(nodes)}
        out_links = [[] for _ in nodes]
        for k, lk in enumerate(links):
            out_links[node_index[lk.tail]].append(k)
        object.__setattr__(self, "node_index", node_index)
        object.__setattr__(self, "_out", out_links)
        object.__setattr__(self, "_tail", np.array([node_index[lk.tail] for lk in links]))
        object.__setattr__(self, "_head", np.array([node_index[lk.head] for lk in links]))
        object.__setattr__(self, "t0", np.array([lk.t0 for lk in links], dtype=float))
        object.__setattr__(self, "capacity", np.array([lk.capacity for lk in links], dtype=float))

    @property
    def n_links(self) -> int:
        return len(self.links)

    def toll_vector(self, tolls) -> np.ndarray:
        """Spread tolls on ``J`` into a full per-link array."""
        tolls = as_vector(tolls, len(self.tolled), "tolls") if len(self.tolled) else np.zeros(0)
        full = np.zeros(self.n_links)
        full[list(self.tolled)] = tolls
        return full

    def costs(self, flows, tolls=None) -> np.ndarray:
        c = bpr_time(self.t0, self.capacity, flows)
        if tolls is not None and len(self.tolled):
            c = c + self.toll_vector(tolls)
        return c

    def moving_set(self) -> TranslatedBox:
        return TranslatedBox(self.A, self.B, mu=1.0, dim=len(self.tolled))


@dataclass(frozen=True)
class ODMatrix:
    entries: tuple

    def __post_init__(self):
        ents = []
        for o, d, q in self.entries:
            q = float(q)
            if not math.isfinite(q) or q < 0:
                raise ValueError(f"demand {o!r}->{d!r} must be finite and nonnegative")
            ents.append((o, d, q))
        object.__setattr__(self, "entries", tuple(ents))

    def by_origin(self) -> dict:
        out: dict = {}
        for o, d, q in self.entries:
            out.setdefault(o, []).append((d, q))
        return out

    def total(self) -> float:
        return sum(q for _, _, q in self.entries)


@dataclass
class UEResult:
    flows: np.ndarray
    relative_gap: float
    iterations: int
    converged: bool = True
    costs: Optional[np.ndarray] = None


def shortest_paths(net: TrafficNetwork, costs, origin) -> tuple[np.ndarray, np.ndarray]:
    """Label-setting (Dijkstra) shortest-path tree from ``origin``.

    Returns ``(dist, pred)`` indexed by node position (see ``net.node_index``);
    ``pred[i]`` is the link entering node ``i`` on its shortest path, or -1.
    Unreachable nodes have ``dist = inf``.
    """
    costs = np.asarray(costs, dtype=float)
    if costs.shape != (net.n_links,):
        raise DimensionError("one cost per link expected")
    if np.any(costs < 0) or not np.all(np.isfinite(costs)):
        raise ValueError("link costs must be finite and nonnegative")
    if origin not in net.node_index:
        raise KeyError(f"unknown origin {origin!r}")
    n = len(net.nodes)
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=int)
    done = np.zeros(n, dtype=bool)
    s = net.node_index[origin]
    dist[s] = 0.0
    heap = [(0.0, s)]
    head = net._head
    while heap:
        d, i = heapq.heappop(heap)
        if done[i]:
            continue
        done[i] = True
        for k in net._out[i]:
            j = head[k]
            nd = d + costs[k]
            if nd < dist[j]:
                dist[j] = nd
                pred[j] = k
                heapq.heappush(heap, (nd, j))
    return dist, pred


def all_or_nothing(net: TrafficNetwork, od: ODMatrix, costs) -> tuple[np.ndarray, float]:
    """Load every OD demand on its current shortest path.

    Returns the link flows and the total shortest-path cost ``sum q * dist``.
    Origins are processed in first-appearance order so sums are reproducible.
    """
    flows = np.zeros(net.n_links)
    spc = 0.0
    for o, dests in od.by_origin().items():
        if all(q == 0 for _, q in dests):
            continue
        dist, pred = shortest_paths(net, costs, o)
        for d, q in dests:
            if q == 0:
                continue
            if d not in net.node_index:
                raise KeyError(f"unknown destination {d!r}")
            j = net.node_index[d]
            if not np.isfinite(dist[j]):
                raise UnreachableDestination(o, d)
            spc += q * dist[j]
            s = net.node_index[o]
            while j != s:
                k = pred[j]
                flows[k] += q
                j = net._tail[k]
    return flows, spc


def _line_search(net, x, d, tolls_full, width=1e-10) -> Optional[float]:
    """Step minimizing the Beckmann objective along ``x + theta d`` on [0, 1].

    Bisection on the directional derivative down to ``width``; returns ``None``
    when the derivative is not finite at the bracket ends.
    """
    t0, cap = net.t0, net.capacity
    base = t0 @ d + tolls_full @ d
    coef = BPR_ALPHA * t0 * d

    def slope(theta):
        r = np.maximum(x + theta * d, 0.0) / cap
        r2 = r * r
        return base + float(coef @ (r2 * r2))

    g0, g1 = slope(0.0), slope(1.0)
    if not (math.isfinite(g0) and math.isfinite(g1)):
        return None
    if g0 >= 0:
        return 0.0
    if g1 <= 0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _bpr_fast(net, x):
    r = x / net.capacity
    r2 = r * r
    return net.t0 * (1.0 + BPR_ALPHA * r2 * r2)


def _bpr_slope(net, x):
    r = x / net.capacity
    return net.t0 * BPR_ALPHA * BPR_POWER * r * r * r / net.capacity


def user_equilibrium(
    net: TrafficNetwork,
    od: ODMatrix,
    tolls=None,
    gap_tol: float = 1e-6,
    max_iter: int = 1000,
    x0: Optional[np.ndarray] = None,
    method: str = "fw",
) -> UEResult:
    """Fixed-demand user equilibrium by Frank-Wolfe.

    Generalized link cost is BPR time plus toll. Starts from the
    all-or-nothing loading at free-flow costs (plus tolls) unless ``x0`` is
    given. Stops when the relative gap
    ``(c(x).x - c(x).y) / c(x).x`` (``y`` the all-or-nothing response) drops to
    ``gap_tol``; otherwise returns the last iterate with ``converged=False``.

    ``method="cfw"`` selects the conjugate Frank-Wolfe direction (Mitradjieva
    and Lindberg), which mixes the previous search target into the new
    all-or-nothing loading so that successive directions are conjugate
    with respect to the diagonal Hessian ``t'(x)``. It needs far fewer
    iterations for tight gaps; the line search and gap are the same.
    """
    if not gap_tol > 0:
        raise ValueError("gap_tol must be positive")
    if method not in ("fw", "cfw"):
        raise ValueError(f"unknown method {method!r}")
    tfull = np.zeros(net.n_links) if tolls is None else net.toll_vector(tolls)
    if od.total() == 0:
        # nothing to route, so costs (even negative ones) are irrelevant
        return UEResult(np.zeros(net.n_links), 0.0, 0, True, net.t0 + tfull)
    if np.any(net.t0 + tfull < 0):
        raise ValueError("toll makes a free-flow generalized cost negative")
    if x0 is None:
        x, _ = all_or_nothing(net, od, net.t0 + tfull)
    else:
        x = np.array(x0, dtype=float)
    s_prev = None
    it = 0
    while True:
        c = _bpr_fast(net, x) + tfull
        y, spc = all_or_nothing(net, od, c)
        tstt = float(c @ x)
        gap = max((tstt - spc) / tstt, 0.0) if tstt > 0 else 0.0
        if gap <= gap_tol or it >= max_iter:
            break
        target = y
        if method == "cfw" and s_prev is not None:
            h = _bpr_slope(net, x)
            a = s_prev - x
            num = float(a @ (h * (y - x)))
            den = float(a @ (h * (y - s_prev)))
            mix = 0.0
            if den != 0.0:
                mix = num / den
                mix = min(max(mix, 0.0), 1.0 - _CFW_DELTA)
            target = mix * s_prev + (1.0 - mix) * y
        d = target - x
        theta = _line_search(net, x, d, tfull)
        if theta is None:
            theta = 2.0 / (it + 2.0)
        x = np.maximum(x + theta * d, 0.0)
        s_prev = target
        it += 1
    return UEResult(x, gap, it, gap <= gap_tol, c)


# keeps the conjugate mix strictly below 1 so the new loading always enters
_CFW_DELTA = 0.05


def road_pricing_operator(
    net: TrafficNetwork,
    od: ODMatrix,
    tolls,
    gap_tol: float = 1e-6,
    max_iter: int = 1000,
    method: str = "cfw",
) -> np.ndarray:
    """Equilibrium flows on the tolled links as a function of their tolls."""
    res = user_equilibrium(net, od, tolls, gap_tol=gap_tol, max_iter=max_iter, method=method)
    return res.flows[list(net.tolled)]


@dataclass(frozen=True, eq=False)
class TrafficOperator(Operator):
    """``f(u)`` = equilibrium flows on tolled links; constants unknown unless declared."""

    net: TrafficNetwork
    od: ODMatrix
    gap_tol: float = 1e-6
    max_iter: int = 1000
    L: Optional[float] = None
    beta: Optional[float] = None
    method: str = "cfw"

    @property
    def dim(self) -> int:
        return len(self.net.tolled)

    def __call__(self, u):
        return road_pricing_operator(self.net, self.od, u, self.gap_tol, self.max_iter, self.method)


@dataclass
class RoadPricingResult:
    """Outer-loop output.

    ``trajectory.states`` are the tolls, ``trajectory.residuals`` the norms of
    ``f(u) - P_{Phi(u)}(f(u) + alpha u)``, and ``trajectory.extras`` holds
    ``"R"`` (step length ``||u_{n+1} - u_n||``) and ``"flows"``.
    """

    trajectory: Trajectory
    equilibrium: UEResult
    converged: bool

    @property
    def tolls(self) -> np.ndarray:
        return self.trajectory.final_state

    @property
    def flows(self) -> np.ndarray:
        return self.trajectory.extras["flows"][-1]


def solve_road_pricing(
    net: TrafficNetwork,
    od: ODMatrix,
    fp: FixedTime,
    sched: StepSchedule,
    alpha: float,
    u0=None,
    stop: StopCriteria = StopCriteria(max_iter=200),
    gap_tol: float = 1e-6,
    ue_max_iter: int = 1000,
    r_threshold: float = 0.1,
    ue_method: str = "cfw",
) -> RoadPricingResult:
    """Iterate the toll update until ``stop`` fires.

    ``stop.residual_tol`` is compared with ``R_n`` (the step length), the
    quantity usually plotted for this benchmark. ``converged`` is False when
    the run ended on ``max_iter`` with the last ``R_n`` above ``r_threshold``.
    Each equilibrium solve is warm-started from the previous flows.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    m = len(net.tolled)
    u = np.zeros(m) if u0 is None else as_vector(u0, m, "u0")
    phi = net.moving_set()
    J = list(net.tolled)
    iters, times, states, res, Rs, flows = [], [], [], [], [], []
    t_elapsed = 0.0
    x_prev = None
    k = 0
    while True:
        ue = user_equilibrium(
            net, od, u, gap_tol=gap_tol, max_iter=ue_max_iter, x0=x_prev, method=ue_method
        )
        x_prev = ue.flows
        fu = ue.flows[J]
        tvec = fu - phi.project(u, fu + alpha * u)
        rnorm = float(np.linalg.norm(tvec))
        lam = sched(k + 1)
        step = lam * gain(fp, rnorm) * tvec if rnorm > EPS_ZERO else np.zeros(m)
        R = float(np.linalg.norm(step))
        iters.append(k)
        times.append(t_elapsed)
        states.append(u.copy())
        res.append(rnorm)
        Rs.append(R)
        flows.append(fu.copy())
        reason = None
        if stop.residual_tol is not None and R <= stop.residual_tol:
            reason = Termination.RESIDUAL_TOL
        elif k >= stop.max_iter:
            reason = Termination.MAX_ITER
        if reason is not None:
            break
        u = u + step
        if not np.all(np.isfinite(u)):
            raise NonFiniteError(k + 1)
        t_elapsed += lam
        k += 1
    traj = Trajectory(
        iters=np.array(iters, dtype=int),
        times=np.array(times),
        states=np.array(states),
        residuals=np.array(res),
        errors=None,
        termination=reason,
        extras={"R": np.array(Rs), "flows": np.array(flows)},
    )
    converged = not (reason is Termination.MAX_ITER and Rs[-1] > r_threshold)
    return RoadPricingResult(traj, ue, converged)


def write_toll_trajectory_csv(result: RoadPricingResult, path) -> None:
    """``iter,u_1..u_m,R_n,flow_1..flow_m`` with 17 significant digits."""
    traj = result.trajectory
    m = traj.states.shape[1]
    header = ["iter"] + [f"u_{i + 1}" for i in range(m)] + ["R_n"] + [f"flow_{i + 1}" for i in range(m)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(len(traj)):
            w.writerow(
                [int(traj.iters[k])]
                + [_fmt(x) for x in traj.states[k]]
                + [_fmt(traj.extras["R"][k])]
                + [_fmt(x) for x in traj.extras["flows"][k]]
            )


def ue_result_json(ue: UEResult, net: TrafficNetwork) -> str:
    doc = {
        "relative_gap": float(ue.relative_gap),
        "iterations": int(ue.iterations),
        "converged": bool(ue.converged),
        "link_flows": {str(lk.id): float(x) for lk, x in zip(net.links, ue.flows)},
    }
    return json.dumps(doc, indent=2) + "\n"


# -------------------------------------------------------------------- files


def _node(s: str):
    s = s.strip()
    try:
        return int(s)
    except ValueError:
        return s


def load_links_csv(path) -> TrafficNetwork:
    """Read ``link_id,from,to,t0,capacity,tolled,A,B`` (A, B blank when untolled)."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read links file ({exc.strerror})") from None
    with fh:
        reader = csv.DictReader(fh)
        need = ["link_id", "from", "to", "t0", "capacity", "tolled", "A", "B"]
        if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != need:
            raise ConfigError(f"{path}:header", f"expected columns {','.join(need)}")
        links, tolled, A, B = [], [], [], []
        for line, row in enumerate(reader, start=2):
            try:
                lk = Link(
                    row["link_id"].strip(),
                    _node(row["from"]),
                    _node(row["to"]),
                    float(row["t0"]),
                    float(row["capacity"]),
                )
                if lk.t0 <= 0 or lk.capacity <= 0:
                    raise ValueError("t0 and capacity must be positive")
                if row["tolled"].strip() not in ("0", "1"):
                    raise ValueError("tolled must be 0 or 1")
                if row["tolled"].strip() == "1":
                    tolled.append(len(links))
                    A.append(float(row["A"]))
                    B.append(float(row["B"]))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{path}:{line}", str(exc)) from None
            links.append(lk)
    try:
        return TrafficNetwork(tuple(links), tuple(tolled), np.array(A), np.array(B))
    except ValueError as exc:
        raise ConfigError(str(path), str(exc)) from None


def load_od_csv(path) -> ODMatrix:
    """Read ``origin,destination,demand``."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read OD file ({exc.strerror})") from None
    with fh:
        reader = csv.DictReader(fh)
        need = ["origin", "destination", "demand"]
        if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != need:
            raise ConfigError(f"{path}:header", f"expected columns {','.join(need)}")
        ents = []
        for line, row in enumerate(reader, start=2):
            try:
                ents.append((_node(row["origin"]), _node(row["destination"]), float(row["demand"])))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{path}:{line}", str(exc)) from None
    try:
        return ODMatrix(tuple(ents))
    except ValueError as exc:
        raise ConfigError(str(path), str(exc)) from None


_DATA = Path(__file__).parent / "data"


def synthetic_network() -> tuple[TrafficNetwork, ODMatrix]:
    """The shipped 8-node, 16-link river-crossing instance with three tolled bridges."""
    return load_links_csv(_DATA / "river_links.csv"), load_od_csv(_DATA / "river_od.csv")
