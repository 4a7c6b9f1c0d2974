#!/usr/bin/env python3
"""Run the grasp procedure once and print what happened in each phase.

    python scripts/grasp_demo.py --out trace.csv
    python scripts/grasp_demo.py --set grasp.compensation=false
"""
import argparse
import sys

import numpy as np

from hapticforceps.config import load_config
from hapticforceps.errors import PhaseTimeout
from hapticforceps.sim import run_grasp_procedure


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="default")
    ap.add_argument("--set", action="append", default=[], metavar="SEC.FIELD=VALUE")
    ap.add_argument("--out", help="write the trace CSV here")
    args = ap.parse_args()

    cfg = load_config(args.config).with_overrides(args.set)
    try:
        trace, status = run_grasp_procedure(cfg.grasp_config(), cfg.plant(), cfg.estimator()), 0
    except PhaseTimeout as exc:
        print(f"timeout: {exc}", file=sys.stderr)
        trace, status = exc.trace, 4

    tip = trace.column("tip")
    print(f"{'phase':<10} {'frames':>6} {'secs':>6} {'F_g est':>8} {'F_g true':>8} "
          f"{'F_p,z est':>9} {'F_p,z true':>10} {'tip move':>9}")
    for ph in trace.phases():
        idx = trace.phase_frames(ph)
        last = trace.records[idx[-1]]
        print(f"{ph.value:<10} {len(idx):6d} {trace.phase_duration(ph):6.2f} "
              f"{last.F_g_est:8.3f} {last.F_g_true:8.3f} {last.F_p_est[2]:9.3f} {last.F_p_true[2]:10.3f} "
              f"{tip[idx[-1]] - tip[idx[0]]:9.4f}")
    s = trace.summary()
    print(f"mean |error|: F_s {s['F_s_mean_abs_err']:.4f} N, F_g {s['F_g_mean_abs_err']:.4f} N, "
          f"F_p {s['F_p_mean_abs_err']:.4f} N")
    print(f"peak tissue energy {np.max(trace.column('tissue_energy')):.3f} N mm")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(trace.to_csv())
        print(f"trace written to {args.out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
