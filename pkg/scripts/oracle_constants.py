"""Leading bias and variance constants of the estimator at t for the simulation
design, the implied AMSE-optimal bandwidth constant c* (h* = c* sd(T) n^-0.2),
and the partial-effect variance across step sizes.

    python3 scripts/oracle_constants.py --t 0 --draws 1000000
"""
import argparse
import sys

from contdml.simulation import (
    DgpSpec,
    amse_constant,
    oracle_partial_effect_variance,
    oracle_bias_variance_constants,
)


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--draws", type=int, default=1_000_000)
    p.add_argument("--kernel", default="epanechnikov")
    p.add_argument("--d-x", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    spec = DgpSpec(d_x=args.d_x)
    oc = oracle_bias_variance_constants(args.t, spec, args.kernel, args.draws, args.seed)
    print(f"B_t = {oc.b_t:.5f}   V_t = {oc.v_t:.5f}   sd(T) = {oc.sd_t:.5f}   E[1/f] = {oc.mean_inv_density:.5f}")
    print(f"c*  = {amse_constant(args.t, spec, args.kernel, args.draws, args.seed):.4f}")
    for rho in (0.0, 0.5, 1.0, 2.0, float("inf")):
        v = oracle_partial_effect_variance(args.t, rho, spec, args.kernel, args.draws, args.seed)
        print(f"partial-effect variance, eta/h = {rho:>4}: {v:.5f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
