"""Angular gap between normalized LERP and SLERP along a short arc.

Prints the midpoint gap, the largest gap over t in [0, 1] and where it occurs,
next to the cubic reference curves Omega^3 / 48 and sqrt(3) Omega^3 / 108.
"""

import argparse

import numpy as np
from scipy.optimize import minimize_scalar

from geovad.sphere import lerp_normalized, slerp


def arc(p, q):
    return 2.0 * np.arcsin(min(1.0, float(np.linalg.norm(p - q)) / 2.0))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--omegas", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.5, 1.0])
    args = ap.parse_args()
    print(f"{'omega':>7} {'gap(t=0.5)':>12} {'max gap':>12} {'t*':>7} {'O^3/48':>12} {'sqrt3 O^3/108':>14}")
    for om in args.omegas:
        p = np.array([1.0, 0.0, 0.0])
        q = np.array([np.cos(om), np.sin(om), 0.0])

        def gap(t):
            return arc(lerp_normalized(p, q, t), slerp(p, q, t))

        best = minimize_scalar(lambda t: -gap(t), bounds=(0.0, 0.5), method="bounded", options={"xatol": 1e-10})
        print(f"{om:7.3f} {gap(0.5):12.3e} {-best.fun:12.3e} {best.x:7.4f} {om**3 / 48:12.3e} "
              f"{np.sqrt(3) * om**3 / 108:14.3e}")


if __name__ == "__main__":
    main()
