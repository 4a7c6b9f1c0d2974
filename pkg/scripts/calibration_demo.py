#!/usr/bin/env python3
"""Fit the flexure stiffness from noisy synthetic samples and check the fit.

Samples follow f = K d with multiplicative force noise, as a desk load cell
would give. Writes a CSV that ``hapticforceps calibrate`` accepts.

    python scripts/calibration_demo.py --samples 50 --noise 0.01 --csv samples.csv
"""
import argparse
import csv

import numpy as np

from hapticforceps.forces import DEFAULT_STIFFNESS, calibrate_stiffness, spring_displacement


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=50)
    ap.add_argument("--noise", type=float, default=0.01, help="relative force noise")
    ap.add_argument("--range", type=float, default=1.0, help="displacement range (mm)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="also write the samples here")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    K_true = DEFAULT_STIFFNESS
    D = rng.uniform(-args.range, args.range, (args.samples, 3))
    F = D @ K_true.T
    F *= 1 + args.noise * rng.normal(size=F.shape)

    K = calibrate_stiffness(D, F)
    rel = np.abs(K - K_true) / np.abs(np.diag(K_true))[:, None]
    np.set_printoptions(precision=5, suppress=True)
    print("fitted K (N/mm):")
    print(K)
    print(f"worst entry error: {100 * rel.max():.3f}% of the row diagonal")

    # how far off the inverse is for a typical grasp load
    f = np.array([0.0, 0.0, -0.4])
    print(f"d for {f} N: fitted {spring_displacement(K, f)}, true {spring_displacement(K_true, f)}")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["d_x", "d_y", "d_z", "f_x", "f_y", "f_z"])
            w.writerows(np.hstack([D, F]).tolist())
        print(f"samples written to {args.csv}")


if __name__ == "__main__":
    main()
