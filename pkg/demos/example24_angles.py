"""
Angles between the stable and unstable directions.

The metric on component i has Gram matrix [[1, zeta_i], [zeta_i, 1]] in the
unit eigenbasis of the cat map, so the splitting angle satisfies
cos(theta_i) = zeta_i.  Letting zeta_i creep towards 1 closes the angle; the
property-of-angles check and the coincidence quantities both notice.

    python3 demos/example24_angles.py --law harmonic
"""

import argparse
import math

from anosovfam import TorusPoint, example24_family
from anosovfam.families import zeta_law
from anosovfam.hyperbolicity import angles_sequence, frames_along_orbit, property_of_angles
from anosovfam.orbits import coincidence_for_family


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--law", choices=("constant", "harmonic", "geometric"), default="harmonic")
    ap.add_argument("--span", type=int, default=30)
    ap.add_argument("--margin", type=float, default=1e-6)
    args = ap.parse_args()

    law = zeta_law(args.law, value=0.5, offset=2.0, base=0.5, ratio=0.5)
    fam = example24_family(law, window=args.span + 40)
    p = TorusPoint(0, (0.1, 0.2))
    ang = angles_sequence(fam, frames_along_orbit(fam, p, -args.span, args.span))

    print("   i    zeta_i     cos(theta_i)   theta_i")
    for i, c, t in zip(ang.indices, ang.cos, ang.theta):
        if abs(i) % 5 == 0:
            print(f"{i:4d}  {law(i):.6f}   {c:.12f}   {t:.4f}")
    err = max(abs(c - law(i)) for i, c in zip(ang.indices, ang.cos))
    print(f"max |cos(theta_i) - zeta_i| = {err:.1e}")

    holds, mu = property_of_angles(ang, args.margin)
    print(f"\nproperty of angles at margin {args.margin:g}: {holds} (max cos = {mu:.6f})")
    for margin in (1e-3, 1e-2, 5e-2):
        print(f"  margin {margin:g}: {property_of_angles(ang, margin)[0]}")

    rep, _, _ = coincidence_for_family(fam, p, 10)
    print(f"\ncoincidence over horizon 10: angles {rep.omega_angle:.4f}, {rep.theta_angle:.4f} (degrees "
          f"{math.degrees(rep.theta_angle):.1f}); margins {rep.omega_tilde:+.4f}, {rep.theta_tilde:+.4f}; "
          f"satisfied: {rep.satisfied}")


if __name__ == "__main__":
    main()
