import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iqvip.dynamics import FixedTime
from iqvip.errors import ConfigError, UnreachableDestination
from iqvip.integrate import Harmonic, StopCriteria, Termination
from iqvip.traffic import (
    Link,
    ODMatrix,
    TrafficNetwork,
    TrafficOperator,
    all_or_nothing,
    bpr_integral,
    bpr_time,
    load_links_csv,
    load_od_csv,
    road_pricing_operator,
    shortest_paths,
    solve_road_pricing,
    synthetic_network,
    ue_result_json,
    user_equilibrium,
    write_toll_trajectory_csv,
)


def two_link(t0a=10.0, ca=100.0, t0b=10.0, cb=100.0, tolled=()):
    links = (Link("a", "o", "d", t0a, ca), Link("b", "o", "d", t0b, cb))
    n = len(tolled)
    return TrafficNetwork(links, tolled, np.zeros(n), np.full(n, 1e3))


def wardrop_two_link(t0a, ca, t0b, cb, demand, toll_a=0.0):
    """Bisection on x_a for t_a(x_a) + toll = t_b(D - x_a)."""
    g = lambda x: bpr_time(t0a, ca, x) + toll_a - bpr_time(t0b, cb, demand - x)
    if g(0.0) >= 0:
        return 0.0
    if g(demand) <= 0:
        return demand
    lo, hi = 0.0, demand
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if g(mid) < 0 else (lo, mid)
    return 0.5 * (lo + hi)


def test_bpr_values():
    assert bpr_time(10.0, 100.0, 100.0) == pytest.approx(11.5)
    assert bpr_time(10.0, 100.0, 0.0) == 10.0
    assert bpr_integral(10.0, 100.0, 100.0) == pytest.approx(10 * 100 + 10 * 0.15 * 100 / 5)


def test_shortest_paths_and_unreachable():
    net = TrafficNetwork((Link(1, 1, 2, 1.0, 1.0), Link(2, 2, 3, 1.0, 1.0), Link(3, 1, 3, 5.0, 1.0)))
    dist, pred = shortest_paths(net, np.array([1.0, 1.0, 5.0]), 1)
    assert dist[net.node_index[3]] == 2.0
    assert pred[net.node_index[3]] == 1
    with pytest.raises(UnreachableDestination):
        all_or_nothing(net, ODMatrix(((3, 1, 1.0),)), net.t0)
    with pytest.raises(ValueError):
        shortest_paths(net, np.array([-1.0, 1.0, 1.0]), 1)


def test_symmetric_split():
    res = user_equilibrium(two_link(), ODMatrix((("o", "d", 150.0),)), gap_tol=1e-8)
    assert np.allclose(res.flows, [75.0, 75.0], atol=1e-3)


@pytest.mark.parametrize("demand", [50.0, 150.0, 400.0])
def test_asymmetric_against_oracle(demand):
    net = two_link(10.0, 80.0, 14.0, 150.0)
    res = user_equilibrium(net, ODMatrix((("o", "d", demand),)), gap_tol=1e-4, max_iter=500)
    assert res.converged and res.iterations <= 500
    x = wardrop_two_link(10.0, 80.0, 14.0, 150.0, demand)
    assert res.flows[0] == pytest.approx(x, abs=1e-3 * max(1.0, demand / 100))


def test_toll_shifts_flow():
    net = two_link(tolled=(0,))
    od = ODMatrix((("o", "d", 150.0),))
    res = user_equilibrium(net, od, [2.0], gap_tol=1e-10, method="cfw")
    x = wardrop_two_link(10.0, 100.0, 10.0, 100.0, 150.0, toll_a=2.0)
    assert res.flows[0] == pytest.approx(x, abs=1e-4)
    assert res.flows[0] < 75.0


def test_negative_generalized_cost_rejected():
    net = two_link(tolled=(0,))
    with pytest.raises(ValueError):
        user_equilibrium(net, ODMatrix((("o", "d", 1.0),)), [-20.0])


def test_zero_demand():
    net, _ = synthetic_network()
    od = ODMatrix(((1, 5, 0.0),))
    res = user_equilibrium(net, od)
    assert np.all(res.flows == 0.0) and res.converged


def _beckmann(net, x, tolls_full):
    return float(np.sum(bpr_integral(net.t0, net.capacity, x)) + tolls_full @ x)


def test_cfw_agrees_with_fw():
    net, od = synthetic_network()
    a = user_equilibrium(net, od, gap_tol=1e-5, max_iter=20000, method="fw")
    b = user_equilibrium(net, od, gap_tol=1e-8, method="cfw")
    assert a.converged and b.relative_gap <= 1e-8
    # the gap bounds the objective suboptimality, not the flow distance
    za, zb = _beckmann(net, a.flows, np.zeros(16)), _beckmann(net, b.flows, np.zeros(16))
    assert zb <= za + 1e-9 * abs(za)
    assert za - zb <= 1e-5 * float(a.costs @ a.flows)


def test_single_link_single_od():
    net = TrafficNetwork((Link(1, "a", "b", 3.0, 10.0),))
    res = user_equilibrium(net, ODMatrix((("a", "b", 7.0),)))
    assert res.flows[0] == pytest.approx(7.0)


def test_two_unit_links():
    res = user_equilibrium(two_link(1.0, 1.0, 1.0, 1.0), ODMatrix((("o", "d", 2.0),)), gap_tol=1e-10)
    assert np.allclose(res.flows, [1.0, 1.0], atol=1e-6)
    res = user_equilibrium(two_link(1.0, 1.0, 2.0, 1.0), ODMatrix((("o", "d", 2.0),)), gap_tol=1e-10, method="cfw")
    assert res.flows[0] == pytest.approx(wardrop_two_link(1.0, 1.0, 2.0, 1.0, 2.0), abs=1e-3)


def test_shortest_path_small_graphs():
    net = TrafficNetwork((Link(1, "x", "y", 5.0, 1.0),))
    dist, _ = shortest_paths(net, np.array([5.0]), "x")
    assert dist[net.node_index["y"]] == 5.0
    tri = TrafficNetwork((Link(1, "a", "b", 1, 1), Link(2, "b", "c", 1, 1), Link(3, "a", "c", 3, 1)))
    dist, _ = shortest_paths(tri, np.array([1.0, 1.0, 3.0]), "a")
    assert dist[tri.node_index["c"]] == 2.0
    dist, _ = shortest_paths(tri, np.zeros(3), "a")
    assert np.all(dist == 0.0)


def test_bpr_strictly_increasing():
    f = np.linspace(0, 500, 2001)
    assert np.all(np.diff(bpr_time(10.0, 100.0, f)) > 0)
    assert bpr_time(10.0, 100.0, 200.0) == pytest.approx(34.0)


def test_wardrop_condition_two_links():
    gap = 1e-6
    net = two_link(10.0, 80.0, 14.0, 150.0)
    res = user_equilibrium(net, ODMatrix((("o", "d", 250.0),)), gap_tol=gap, method="cfw")
    c = res.costs
    used = res.flows > 1e-6 * 250.0
    assert np.all(c[used] - c.min() <= 10 * gap * c.min())


def test_monotone_substitution():
    net = two_link(tolled=(0,))
    od = ODMatrix((("o", "d", 150.0),))
    lo = road_pricing_operator(net, od, [1.0], gap_tol=1e-10)
    hi = road_pricing_operator(net, od, [3.0], gap_tol=1e-10)
    assert hi[0] <= lo[0]


def test_unique_routes_make_operator_constant():
    links = (Link(1, 1, 2, 5.0, 10.0), Link(2, 3, 4, 5.0, 10.0))
    net = TrafficNetwork(links, (0, 1), np.zeros(2), np.ones(2))
    od = ODMatrix(((1, 2, 4.0), (3, 4, 6.0)))
    for u in ([0.0, 0.0], [3.0, 1.0]):
        assert np.allclose(road_pricing_operator(net, od, u), [4.0, 6.0])


def _conservation_residual(net, od, x):
    n = len(net.nodes)
    bal = np.zeros(n)
    np.add.at(bal, net._tail, -x)
    np.add.at(bal, net._head, x)
    for o, d, q in od.entries:
        bal[net.node_index[o]] += q
        bal[net.node_index[d]] -= q
    return np.max(np.abs(bal))


@settings(max_examples=25, deadline=None)
@given(
    demands=st.lists(st.floats(0.0, 300.0), min_size=3, max_size=3),
    tolls=st.lists(st.floats(0.0, 50.0), min_size=3, max_size=3),
)
def test_equilibrium_fuzz(demands, tolls):
    # light traffic can leave the gap above tolerance after max_iter; the
    # structural invariants must hold regardless
    net, _ = synthetic_network()
    od = ODMatrix(((1, 5, demands[0]), (2, 7, demands[1]), (4, 6, demands[2])))
    res = user_equilibrium(net, od, tolls, gap_tol=1e-6, max_iter=200, method="cfw")
    assert np.all(res.flows >= 0)
    assert _conservation_residual(net, od, res.flows) <= 1e-9 * max(1.0, od.total())
    assert res.relative_gap >= 0
    assert res.converged == (res.relative_gap <= 1e-6)


def test_operator_and_problem_wrapper():
    net, od = synthetic_network()
    f = TrafficOperator(net, od, gap_tol=1e-8)
    assert f.dim == 3
    assert np.allclose(f(np.zeros(3)), road_pricing_operator(net, od, np.zeros(3), 1e-8))


def test_road_pricing_shipped_instance():
    net, od = synthetic_network()
    res = solve_road_pricing(
        net, od, FixedTime(0.75, 0.75, 0.65, 1.5), Harmonic(4.0), 0.5, gap_tol=1e-8
    )
    R = res.trajectory.extras["R"]
    assert np.any(R[:201] < 0.1)
    assert res.converged
    u, f = res.tolls, res.flows
    assert np.all(f >= u + net.A - 1e-3) and np.all(f <= u + net.B + 1e-3)


def test_road_pricing_stops_on_R(tmp_path):
    net, od = synthetic_network()
    res = solve_road_pricing(
        net, od, FixedTime(0.75, 0.75, 0.65, 1.5), Harmonic(4.0), 0.5,
        stop=StopCriteria(max_iter=200, residual_tol=0.1), gap_tol=1e-8,
    )
    assert res.trajectory.termination is Termination.RESIDUAL_TOL
    assert res.trajectory.extras["R"][-1] <= 0.1
    path = tmp_path / "tolls.csv"
    write_toll_trajectory_csv(res, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iter,u_1,u_2,u_3,R_n,flow_1,flow_2,flow_3"
    assert len(lines) == len(res.trajectory) + 1
    doc = json.loads(ue_result_json(res.equilibrium, net))
    assert set(doc["link_flows"]) == {str(i) for i in range(1, 17)}


def test_road_pricing_zero_demand():
    # zero flows are feasible at u = 0 when A <= 0 <= B: the tolls never move
    links = (Link("a", "o", "d", 10.0, 100.0), Link("b", "o", "d", 10.0, 100.0))
    net = TrafficNetwork(links, (0,), np.array([-10.0]), np.array([10.0]))
    od = ODMatrix((("o", "d", 0.0),))
    res = solve_road_pricing(net, od, FixedTime(0.75, 0.75, 0.65, 1.5), Harmonic(4.0), 0.5,
                             stop=StopCriteria(max_iter=20))
    assert np.all(res.trajectory.states == 0.0)
    assert np.all(res.trajectory.extras["flows"] == 0.0)


def test_road_pricing_feasible_start_is_fixed_point():
    net, od = synthetic_network()
    f0 = road_pricing_operator(net, od, np.zeros(3), gap_tol=1e-10)
    u0 = f0 - 0.5 * (net.A + net.B)  # f(u0) - u0 is mid-range, so f(u0) is not exactly f0
    res = solve_road_pricing(net, od, FixedTime(0.75, 0.75, 0.65, 1.5), Harmonic(4.0), 0.5,
                             u0=np.zeros(3), stop=StopCriteria(max_iter=1), gap_tol=1e-10)
    assert res.trajectory.residuals[0] > 0  # the shipped start is infeasible
    net2 = TrafficNetwork(net.links, net.tolled, net.A - 1e3, net.B + 1e3)
    res2 = solve_road_pricing(net2, od, FixedTime(0.75, 0.75, 0.65, 1.5), Harmonic(4.0), 0.5,
                              stop=StopCriteria(max_iter=5), gap_tol=1e-10)
    assert np.all(res2.trajectory.states == 0.0)
    assert np.all(res2.trajectory.extras["R"] == 0.0)


def test_road_pricing_two_link_oracle():
    links = (Link("a", "o", "d", 10.0, 100.0), Link("b", "o", "d", 10.0, 100.0))
    net = TrafficNetwork(links, (0,), np.array([0.0]), np.array([60.0]))
    od = ODMatrix((("o", "d", 150.0),))
    res = solve_road_pricing(net, od, FixedTime(0.75, 0.75, 0.65, 1.5), Harmonic(0.2), 0.5,
                             stop=StopCriteria(max_iter=300), gap_tol=1e-10)
    u, f = res.tolls[0], res.flows[0]
    assert f == pytest.approx(wardrop_two_link(10.0, 100.0, 10.0, 100.0, 150.0, toll_a=u), abs=1e-3)
    assert u - 1e-3 <= f <= u + 60.0 + 1e-3
    assert u > 0


def test_loaders(tmp_path):
    net, od = synthetic_network()
    assert len(net.links) == 16 and len(net.nodes) == 8
    assert net.tolled == (0, 1, 2)
    assert np.array_equal(net.A, [40, 0, 100]) and np.array_equal(net.B, [90, 50, 200])
    bad = tmp_path / "links.csv"
    bad.write_text("link_id,from,to,t0,capacity,tolled,A,B\n1,1,2,abc,1,0,,\n")
    with pytest.raises(ConfigError) as ei:
        load_links_csv(bad)
    assert f"{bad}:2" in str(ei.value)
    bad.write_text("id,from,to\n")
    with pytest.raises(ConfigError):
        load_links_csv(bad)
    with pytest.raises(ConfigError) as ei:
        load_od_csv(tmp_path / "nope.csv")
    assert "nope.csv" in str(ei.value)
    odf = tmp_path / "od.csv"
    odf.write_text("origin,destination,demand\n1,2,-5\n")
    with pytest.raises(ConfigError):
        load_od_csv(odf)
