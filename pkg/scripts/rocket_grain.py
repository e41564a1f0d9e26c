"""Annular rocket grain: AR assignment, burn simulation and midpoint-thrust convergence."""

import argparse
from pathlib import Path

import numpy as np

from microsynth.io import export_vtk, write_thrust_csv
from microsynth.rocket import annulus_section, assign_ar, decaying_profile, simulate_burn, volume_of_revolution


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--layers", type=int, nargs="+", default=[8, 16, 32])
    ap.add_argument("--out", default="out/rocket")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    revolved = volume_of_revolution(annulus_section())
    prof = decaying_profile()
    prev = None
    print(f"{'n':>4} {'max rel err':>12} {'bound 2/n':>10} {'order':>8} {'burnout spread':>15}")
    for n in args.layers:
        g = assign_ar(revolved, n, prof)
        b = simulate_burn(g)
        err = float(np.abs(b.relative_midpoint_thrust / prof(np.arange(1, n + 1) / n) - 1).max())
        order = "" if prev is None else f"{np.log2(prev[1] / err) / np.log2(n / prev[0]):.4f}"
        print(f"{n:>4} {err:>12.6f} {2 / n:>10.6f} {order:>8} {b.burnout_spread(g):>15.2e}")
        write_thrust_csv(b.times, b.relative_thrust, out / f"thrust_{n}.csv")
        export_vtk(g, out / f"grain_{n}.vtk")
        prev = (n, err)


if __name__ == "__main__":
    main()
