"""Drift of the quadratic integral of a magnetic system across a grid of energy levels.

The integral is built for one design level; the table shows where it is conserved.

    python scripts/level_experiment.py --family trig --levels 0.5 0.8 1 1.25 2
    python scripts/level_experiment.py --family cubic --T 30
"""
import argparse

from torus_integrals.flow_sim import IntegrationControls
from torus_integrals.fourier_field import TorusLattice
from torus_integrals.magnetic import dgrw_cubic, dgrw_trig, multi_level_test


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", choices=["trig", "cubic"], default="trig")
    ap.add_argument("--E", type=float, default=1.0, help="design level")
    ap.add_argument("--levels", type=float, nargs="+", default=[0.5, 0.9, 1.0, 1.1, 2.0])
    ap.add_argument("--T", type=float, default=50.0)
    ap.add_argument("--points", type=int, default=8)
    ap.add_argument("--rtol", type=float, default=1e-11)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if args.family == "trig":
        s = dgrw_trig(E=args.E)
    else:
        s = dgrw_cubic(E=args.E, lattice=TorusLattice(N=64), band=12)
    print("construction audit:", {k: v for k, v in s.audit().items() if k != "alpha"})
    print("f coefficients:", [round(a, 12) for a in s.f_coeffs])
    ctl = IntegrationControls(rtol=args.rtol, atol=args.rtol, samples=501)
    ml = multi_level_test(s.spec, s.F2, args.levels, T=args.T, controls=ctl, n_points=args.points, seed=args.seed)
    print(f"{'E':>6} {'max drift':>11} {'median drift':>13}")
    for r in ml.levels:
        mark = "  <- design" if abs(r.E - args.E) < 1e-12 else ""
        print(f"{r.E:>6.3f} {r.max_drift:>11.3e} {r.median_drift:>13.3e}{mark}")
    print("levels with small drift:", ml.small_levels)


if __name__ == "__main__":
    main()
