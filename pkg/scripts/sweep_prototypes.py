"""Sweep prototype counts on a synthetic world and print the AP table."""

import argparse

from geovad.config import preset
from geovad.evalkit import sweep
from geovad.synthgen import preset_world


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--world", default="B", choices=["A", "B", "C", "D"])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--k-n", type=int, nargs="+", default=[1, 4, 12])
    ap.add_argument("--k-a", type=int, nargs="+", default=[1, 2, 4, 8, 18])
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()
    w = preset_world(args.world, args.seed)
    rows = sweep(w.dataset, w.syn_normal, w.syn_abn, preset("default"),
                 {"k_n": args.k_n, "k_a": args.k_a}, threads=args.threads)
    print("k_n \\ k_a " + "".join(f"{k:>9d}" for k in args.k_a))
    for i, kn in enumerate(args.k_n):
        cells = rows[i * len(args.k_a) : (i + 1) * len(args.k_a)]
        print(f"{kn:9d} " + "".join(f"{r.ap:9.4f}" for r in cells))


if __name__ == "__main__":
    main()
