"""Survey of the parameter regions produced by the tuple synthesizers.

For each instance, draws tuples from every synthesizer, re-checks them, and
reports the pass fraction together with the spread of the largest feasible
continuous rate eps and discrete contraction parameter xi.
"""

import argparse

import numpy as np

from gimvi_dyn.core import canonical_instance, compute_c, compute_c1, make_affine_instance
from gimvi_dyn.params import (check_thm32, check_thm42, continuous_pack, discrete_pack,
                              max_feasible_eps, max_feasible_xi, synth_common, synth_cor35,
                              synth_cor43, synth_eps2, synth_thm36)


def survey(inst, draws):
    c, c1 = compute_c(inst), compute_c1(inst)
    out = {}

    def cont(p, eps):
        pack = continuous_pack(c1, p.a0, p.a1, p.a2)
        return check_thm32(pack, c, c1, p.a0, p.a1, p.a2, eps).verdict, max_feasible_eps(pack, c, c1, p)

    def disc(p):
        pack = discrete_pack(c1, p.a0, p.a1, p.a2)
        xi = max_feasible_xi(pack, c, c1, p)
        return xi > 0 and check_thm42(pack, c, c1, p.a0, p.a1, p.a2, xi).verdict, xi

    rows = {
        "small-rate": [cont(p, max(max_feasible_eps(continuous_pack(c1, p.a0, p.a1, p.a2), c, c1, p), 1e-300))
                       for p in (synth_cor35(c1, s, c=c) for s in range(draws))],
        "unit-rate": [cont(synth_thm36(c, c1, s).params, 1.0) for s in range(draws)],
        "rate-two": [cont(synth_eps2(c, c1, s).params, 2.0) for s in range(draws)],
        "discrete": [disc(synth_cor43(c1, s, c=c)) for s in range(draws)],
        "common": [disc(synth_common(c1, s)) for s in range(draws)],
    }
    for name, results in rows.items():
        ok = np.array([r[0] for r in results])
        val = np.array([r[1] for r in results])
        out[name] = (ok.mean(), np.min(val), np.median(val), np.max(val))
    return c, c1, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=3)
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--draws", type=int, default=100)
    args = ap.parse_args()

    cases = [("canonical", canonical_instance())]
    cases += [(f"spd-{s}", make_affine_instance(args.dim, s)) for s in range(args.instances)]
    for name, inst in cases:
        c, c1, out = survey(inst, args.draws)
        print(f"{name}: c={c:.4g} c1={c1:.4g}")
        print(f"  {'region':<12}{'passed':>8}{'min':>12}{'median':>12}{'max':>12}")
        for region, (frac, lo, med, hi) in out.items():
            print(f"  {region:<12}{frac:>8.0%}{lo:>12.4g}{med:>12.4g}{hi:>12.4g}")


if __name__ == "__main__":
    main()
