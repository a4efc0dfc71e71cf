"""Interior trace gaps and resolvent block norms at one fixed disorder configuration."""
import argparse

from idsclt.experiments import combes_thomas_profile, fixed_operator, interior_trace_gap
from idsclt.scenarios import reference_spec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--L", type=int, default=128)
    ap.add_argument("--sample", type=int, default=0)
    args = ap.parse_args()
    spec = reference_spec(args.L, 2)
    for name, prof in interior_trace_gap(spec, (2, 4, 8, 16), sample=args.sample).items():
        gaps = " ".join(f"{g:.2e}" for g in prof.gaps)
        fit = f"slope {prof.fit.slope:.3f} r2 {prof.fit.r2:.4f}" if prof.fit else "no fit: a gap is exactly zero"
        print(f"{name:18s} {gaps}  {fit}")
    ct = combes_thomas_profile(fixed_operator(spec, args.sample), spec.f.pole, spec.f.laurent.m, range(2, 21, 2))
    print(f"{'block norm':18s} slope {ct.slope:.3f} r2 {ct.r2:.4f}")


if __name__ == "__main__":
    main()
