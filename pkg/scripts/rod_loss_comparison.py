"""Rod benchmark: collocation vs energy loss over several seeds.

Prints one row per (loss, seed) with the RMS errors of u, eps and sigma,
the iteration count and the training CPU time, then the per-loss medians.
"""

import argparse
import json
import logging
from statistics import median

from elastopinn.harness import RunConfig, run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--json", help="write all rows to this file")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING)

    rows = []
    print(f"{'loss':12s} {'seed':>4s} {'RMS u':>10s} {'RMS eps':>10s} {'RMS sigma':>10s} {'iters':>6s} {'cpu s':>7s}")
    for loss in ("collocation", "energy"):
        for seed in range(args.seeds):
            rep = run(RunConfig("rod1d", loss, seed=seed)).report
            row = dict(loss=loss, seed=seed, rms_u=rep.rms["u"], rms_eps=rep.rms["eps_x"],
                       rms_sigma=rep.rms["sigma_x"], iterations=rep.iterations, cpu_seconds=rep.cpu_seconds)
            rows.append(row)
            print(f"{loss:12s} {seed:4d} {row['rms_u']:10.2e} {row['rms_eps']:10.2e} "
                  f"{row['rms_sigma']:10.2e} {row['iterations']:6d} {row['cpu_seconds']:7.2f}")
    print()
    for loss in ("collocation", "energy"):
        sel = [r for r in rows if r["loss"] == loss]
        print(f"median {loss:12s} RMS u {median(r['rms_u'] for r in sel):.2e}  "
              f"iterations {median(r['iterations'] for r in sel):.0f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
