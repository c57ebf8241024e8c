"""
Shrinking metrics and expansivity.

The cat map is kept fixed while, for i >= 0, the metric on component i
scales stable components by a^i and unstable ones by b^i.  The family stays
hyperbolic, but a pair of points on a common unstable line can now approach
each other in both time directions once forward expansion (about 2.618 per
step) is beaten by the metric shrinking.  We scan a few
values of a = b and report what the probe finds.

    python3 demos/example23_expansivity.py
"""

import argparse
import math

from anosovfam import cat_family, example23_family
from anosovfam.families import CAT_LAMBDA
from anosovfam.orbits import expansivity_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--values", type=float, nargs="+", default=[0.3, 0.35, 0.5, 0.9])
    ap.add_argument("--horizon", type=int, default=40)
    args = ap.parse_args()

    print(f"unstable eigenvalue 1/lambda = {1 / CAT_LAMBDA:.4f}")
    print(f"the separation itself contracts forward only for a < {CAT_LAMBDA:.4f}; for larger a the")
    print("distance is eventually capped by the torus diameter, which shrinks like a^n\n")
    print("   a     a/lambda   witness   fwd slope   bwd slope")
    for a in args.values:
        fam = example23_family(a, a, window=args.horizon + 40)
        r = expansivity_probe(fam, horizon=args.horizon, start=(0.2, 0.3))
        print(
            f"{a:5.2f}   {a / CAT_LAMBDA:7.3f}    {'yes' if r.witness is not None else 'no ':3s}"
            f"      {r.forward_slope:+.3f}      {r.backward_slope:+.3f}"
        )

    flat = expansivity_probe(cat_family(), horizon=args.horizon, start=(0.2, 0.3))
    print(f"\nflat cat map: witness {'yes' if flat.witness is not None else 'no'}, forward slope {flat.forward_slope:+.3f}")
    print(f"(log of the unstable eigenvalue is {math.log(1 / CAT_LAMBDA):+.3f})")
    print("\nFor a close to 1 the cap only takes over after a long horizon (try --horizon 100).")


if __name__ == "__main__":
    main()
