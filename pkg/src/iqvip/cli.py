"""Command-line front end.

Four subcommands::

    iqvip check           certificate and settling-time bounds for a problem file
    iqvip solve           Euler (or reference RK4) run, trajectory CSV
    iqvip bench-example1  fixed-time vs nominal error curves on the 2-D benchmark
    iqvip traffic         road-pricing iteration on a network

With no flags every command runs on the shipped benchmark data. Exit status is
0 whenever the computation completes (whatever the mathematical verdict), 2 on
bad input files or parameters and 3 when an iteration blows up.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analysis, traffic
from .dynamics import FiniteTime, FixedTime, Nominal
from .errors import IqvipError, NonFiniteError
from .integrate import Fixed, Harmonic, StopCriteria, euler, integrate_reference
from .problem import load_problem

DATA_DIR = Path(__file__).parent / "data"
EXAMPLE1_CONFIG = DATA_DIR / "example1.json"

# benchmark defaults
EX1 = dict(lam=0.00146, a1=20.0, a2=20.0, r1=0.95, r2=1.5, u0=(1.0, 1.0), iters=100)
TRAFFIC = dict(alpha=0.5, a1=0.75, a2=0.75, r1=0.65, r2=1.5, harmonic=4.0, iters=200, gap_tol=1e-8)


class _Usage(Exception):
    pass


def _vec(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_flow_args(ap, d):
    g = ap.add_argument_group("flow")
    g.add_argument("--system", choices=("nominal", "finite", "fixed"), default="fixed")
    g.add_argument("--sigma", type=float, default=1.0)
    g.add_argument("--gamma", type=float, default=3.0)
    g.add_argument("--a1", type=float, default=d["a1"])
    g.add_argument("--a2", type=float, default=d["a2"])
    g.add_argument("--r1", type=float, default=d["r1"])
    g.add_argument("--r2", type=float, default=d["r2"])


def _add_sched_args(ap, lam=None, harmonic=None):
    g = ap.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lam", type=float, default=lam, help="constant step size")
    g.add_argument("--harmonic", type=float, default=harmonic, help="step size C/n")


def _common(ap):
    ap.add_argument("--out", type=Path, default=Path("."), help="output directory")
    ap.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="iqvip", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="stability certificate and bounds")
    c.add_argument("--config", type=Path, default=EXAMPLE1_CONFIG)
    _add_flow_args(c, EX1)
    c.add_argument("--u0", type=_vec, default=None, help="initial state for the finite-time bound")
    c.add_argument("--d0", type=float, default=None, help="initial distance (overrides --u0)")
    c.add_argument("--estimated", action="store_true", help="certify sampled instead of declared constants")
    c.add_argument("--samples", type=int, default=2000)
    _common(c)

    s = sub.add_parser("solve", help="integrate a flow, write trajectory.csv")
    s.add_argument("--config", type=Path, default=EXAMPLE1_CONFIG)
    _add_flow_args(s, EX1)
    _add_sched_args(s, lam=None)
    s.add_argument("--u0", type=_vec, default=None)
    s.add_argument("--iters", type=int, default=EX1["iters"])
    s.add_argument("--tol", type=float, default=None, help="stop once the residual norm is below")
    s.add_argument("--continuous", action="store_true", help="reference RK4 instead of Euler")
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--tend", type=float, default=10.0)
    _common(s)

    b = sub.add_parser("bench-example1", help="fixed-time vs nominal on the 2-D benchmark")
    b.add_argument("--lambda", dest="lam", type=float, default=EX1["lam"])
    b.add_argument("--iters", type=int, default=EX1["iters"])
    b.add_argument("--a1", type=float, default=EX1["a1"])
    b.add_argument("--a2", type=float, default=EX1["a2"])
    b.add_argument("--r1", type=float, default=EX1["r1"])
    b.add_argument("--r2", type=float, default=EX1["r2"])
    _common(b)

    t = sub.add_parser("traffic", help="road-pricing iteration")
    t.add_argument("--links", type=Path, default=DATA_DIR / "river_links.csv")
    t.add_argument("--od", type=Path, default=DATA_DIR / "river_od.csv")
    t.add_argument("--alpha", type=float, default=TRAFFIC["alpha"])
    t.add_argument("--a1", type=float, default=TRAFFIC["a1"])
    t.add_argument("--a2", type=float, default=TRAFFIC["a2"])
    t.add_argument("--r1", type=float, default=TRAFFIC["r1"])
    t.add_argument("--r2", type=float, default=TRAFFIC["r2"])
    _add_sched_args(t, harmonic=TRAFFIC["harmonic"])
    t.add_argument("--iters", type=int, default=TRAFFIC["iters"])
    t.add_argument("--tol", type=float, default=None, help="stop once R_n is below")
    t.add_argument("--gap-tol", type=float, default=TRAFFIC["gap_tol"])
    t.add_argument("--u0", type=_vec, default=None)
    _common(t)
    return ap


def _flow(args):
    if args.system == "nominal":
        return Nominal(args.sigma)
    if args.system == "finite":
        return FiniteTime(args.sigma, args.gamma)
    return FixedTime(args.a1, args.a2, args.r1, args.r2)


def _sched(args):
    if args.harmonic is not None:
        return Harmonic(args.harmonic)
    if args.lam is not None:
        return Fixed(args.lam)
    return Fixed(EX1["lam"])


def _u0(args, p) -> np.ndarray:
    if args.u0 is not None:
        if args.u0.shape[0] != p.dim:
            raise _Usage(f"--u0 has {args.u0.shape[0]} entries, problem dimension is {p.dim}")
        return args.u0
    # the benchmark start (1, 1) generalizes to the all-ones vector
    return np.ones(p.dim)


def _outdir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_check(args) -> int:
    p = load_problem(args.config)
    cert = analysis.certify(
        p, use_declared=not args.estimated, samples=args.samples, seed=args.seed
    )
    fixed = finite = None
    if cert.condition_beta:
        try:
            fixed = analysis.fixed_time_bound(cert, FixedTime(args.a1, args.a2, args.r1, args.r2))
        except ValueError as exc:
            raise _Usage(str(exc)) from None
        if args.d0 is not None:
            d0 = args.d0
        elif p.known_solution is not None:
            d0 = float(np.linalg.norm(_u0(args, p) - p.known_solution))
        else:
            d0 = 1.0
        finite = analysis.finite_time_bound(cert, FiniteTime(args.sigma, args.gamma), d0)
    rep = analysis.build_report(cert, fixed, finite)
    sys.stdout.write(analysis.format_report(rep))
    (_outdir(args.out) / "certificate.json").write_text(analysis.report_json(rep))
    return 0


def cmd_solve(args) -> int:
    p = load_problem(args.config)
    fp, u0 = _flow(args), _u0(args, p)
    if args.continuous:
        traj = integrate_reference(p, fp, u0, args.dt, args.tend, stop_tol=args.tol)
    else:
        stop = StopCriteria(max_iter=args.iters, residual_tol=args.tol)
        traj = euler(p, fp, u0, _sched(args), stop)
    out = _outdir(args.out) / "trajectory.csv"
    traj.to_csv(out)
    print(f"termination: {traj.termination.value}")
    print(f"records: {len(traj)}")
    print(f"final_state: {' '.join(format(x, '.10g') for x in traj.final_state)}")
    print(f"final_residual: {traj.residuals[-1]:.6e}")
    if traj.errors is not None:
        print(f"final_error: {traj.errors[-1]:.6e}")
    print(f"wrote {out}")
    return 0


def cmd_bench_example1(args) -> int:
    p = load_problem(EXAMPLE1_CONFIG)
    u0 = np.array(EX1["u0"])
    stop = StopCriteria(max_iter=args.iters)
    fast = euler(p, FixedTime(args.a1, args.a2, args.r1, args.r2), u0, Fixed(args.lam), stop)
    base = euler(p, Nominal(), u0, Fixed(args.lam), stop)
    out = _outdir(args.out) / "example1_comparison.csv"
    with open(out, "w") as fh:
        fh.write("iter,error_fixed_time,error_nominal\n")
        for k, ef, en in zip(fast.iters, fast.errors, base.errors):
            fh.write(f"{k},{ef:.17g},{en:.17g}\n")
    print(f"fixed_time_error_at_{args.iters}: {fast.errors[-1]:.6e}")
    print(f"fixed_time_max_norm_error_at_{args.iters}: {np.max(np.abs(fast.final_state)):.6e}")
    print(f"nominal_error_at_{args.iters}: {base.errors[-1]:.6e}")
    print(f"wrote {out}")
    return 0


def cmd_traffic(args) -> int:
    net = traffic.load_links_csv(args.links)
    od = traffic.load_od_csv(args.od)
    fp = FixedTime(args.a1, args.a2, args.r1, args.r2)
    res = traffic.solve_road_pricing(
        net,
        od,
        fp,
        _sched(args),
        args.alpha,
        u0=args.u0,
        stop=StopCriteria(max_iter=args.iters, residual_tol=args.tol),
        gap_tol=args.gap_tol,
    )
    out = _outdir(args.out)
    traffic.write_toll_trajectory_csv(res, out / "tolls.csv")
    (out / "equilibrium.json").write_text(traffic.ue_result_json(res.equilibrium, net))
    R = res.trajectory.extras["R"]
    print(f"termination: {res.trajectory.termination.value}")
    print(f"tolls: {' '.join(format(x, '.6f') for x in res.tolls)}")
    print(f"flows: {' '.join(format(x, '.6f') for x in res.flows)}")
    print(f"R_n: {R[-1]:.6e}")
    below = np.nonzero(R < 0.1)[0]
    print(f"first_iter_R_below_0.1: {int(below[0]) if below.size else 'never'}")
    print(f"converged: {str(res.converged).lower()}")
    print(f"wrote {out / 'tolls.csv'} and {out / 'equilibrium.json'}")
    return 0


_COMMANDS = {
    "check": cmd_check,
    "solve": cmd_solve,
    "bench-example1": cmd_bench_example1,
    "traffic": cmd_traffic,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except NonFiniteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (IqvipError, _Usage, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
