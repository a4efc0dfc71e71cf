"""Nested Monte Carlo variance formula next to the direct ensemble estimate."""
import argparse
import math

from idsclt.experiments import run_ensemble, variance_estimate, variance_formula
from idsclt.scenarios import reference_spec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L", type=int, default=256, help="box size of the direct estimate")
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--L-p", type=int, default=64, help="proxy box size of the formula")
    ap.add_argument("--N-out", type=int, default=400)
    ap.add_argument("--N-in", type=int, default=32)
    ap.add_argument("--Q", type=int, default=8)
    args = ap.parse_args()
    spec = reference_spec(args.L, args.samples)
    direct = variance_estimate(run_ensemble(spec))
    formula = variance_formula(spec, args.L_p, args.N_out, args.N_in, args.Q)
    gap = abs(direct.value - formula.value) / math.hypot(direct.se, formula.se)
    print(f"direct  {direct.value:.4e} +- {direct.se:.2e}")
    print(f"formula {formula.value:.4e} +- {formula.se:.2e}")
    print(f"difference {gap:.2f} combined SE")


if __name__ == "__main__":
    main()
