"""Fitted residual decay rates of the first-, second- and third-order flows.

Runs each system from the same starting point on the canonical instance and
on a batch of random SPD affine instances, then prints one row per instance.

    python3 scripts/rate_comparison.py --instances 5 --horizon 40 --json rates.json
"""

import argparse
import json

import numpy as np

from gimvi_dyn.analysis import fit_exponential_rate, noise_floor, reference_solution
from gimvi_dyn.core import canonical_instance, compute_c, compute_c1, make_affine_instance, make_rng
from gimvi_dyn.dynamics import (DynParams, integrate_first_order_baseline,
                                integrate_second_order_baseline, integrate_third_order, stable_step)
from gimvi_dyn.errors import DegenerateData
from gimvi_dyn.params import synth_eps2


def slope(traj, floor):
    try:
        return fit_exponential_rate(traj, floor=floor).slope
    except DegenerateData as exc:
        return exc.slope


def rates(inst, horizon, dt, seed):
    w_star = reference_solution(inst, 1e-12, seed=seed)
    w0 = w_star + make_rng(seed).standard_normal(inst.dim)
    zero = np.zeros_like(w0)
    floor = noise_floor(inst, 1e-12, float(np.linalg.norm(w0 - w_star)))
    row = {}
    row["first"] = slope(integrate_first_order_baseline(inst, 1.0, w0, 0, horizon, dt, w_star=w_star), floor)
    row["second"] = slope(integrate_second_order_baseline(inst, 2.0, 1.0, (w0, zero), 0, horizon, dt,
                                                          w_star=w_star), floor)
    row["third"] = slope(integrate_third_order(inst, DynParams(8.0, 12.0, 6.0), (w0, zero, zero), 0,
                                               horizon, dt, w_star=w_star), floor)
    p, _ = synth_eps2(compute_c(inst), compute_c1(inst), seed)
    h = min(dt, stable_step(inst, p))
    row["third_rate_two"] = slope(integrate_third_order(inst, p, (w0, zero, zero), 0, horizon, h,
                                                        w_star=w_star, stop_below=floor), floor)
    return row


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=5, help="random SPD instances besides the canonical one")
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--horizon", type=float, default=40.0)
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--json", help="write the table here as JSON")
    args = ap.parse_args()

    cases = [("canonical", canonical_instance())]
    cases += [(f"spd-{s}", make_affine_instance(args.dim, s)) for s in range(args.instances)]
    table = []
    print(f"{'instance':<12}{'first':>12}{'second':>12}{'third':>12}{'rate-two':>12}")
    for i, (name, inst) in enumerate(cases):
        row = rates(inst, args.horizon, args.dt, i)
        table.append({"instance": name, **row})
        print(f"{name:<12}" + "".join(f"{row[k]:>12.4f}" for k in ("first", "second", "third", "third_rate_two")))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(table, fh, indent=2)


if __name__ == "__main__":
    main()
