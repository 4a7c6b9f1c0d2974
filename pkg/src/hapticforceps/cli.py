"""Command-line entry point: ``hapticforceps <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 runtime or numerical error,
4 phase timeout. Every failure prints one line naming the error class.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from .config import Config, config_from_dict, load_config
from .errors import ConfigError, ForcepsError, PhaseTimeout
from .forces import calibrate_stiffness
from .geometry import Pose
from .imaging import read_pgm, render_target, write_pgm
from .metrics import error_stats, mean_hausdorff
from .sim import fmt, run_grasp_procedure, target_pose
from .tracking import Tracker

TRACK_COLUMNS = (["frame_index", "m_detected", "m_registered"]
                 + [f"d_s_{a}" for a in "xyz"] + [f"rotvec_{a}" for a in "xyz"] + ["flags"])


def _config(args) -> Config:
    cfg = load_config(args.config)
    if getattr(args, "set", None):
        cfg = cfg.with_overrides(args.set)
    return cfg


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- render -------------------------------------------------------------------

def cmd_render(args) -> int:
    cfg = _config(args)
    rig = cfg.rig()
    d = np.array(args.displacement, dtype=float)
    # configured tilt model first, then any extra rotation about the target centre
    pose = target_pose(d, rig) @ Pose.from_rotvec(args.rotvec)
    img = render_target(rig.intr, pose, rig.layout, rig.render, frame=args.frame)
    write_pgm(args.out, img)
    print(f"wrote {args.out} ({img.width}x{img.height})")
    return 0


# -- track --------------------------------------------------------------------

def _synthetic_displacements(n, amplitude, depth):
    k = np.arange(n)
    ph = 2 * np.pi * k / max(n, 1)
    return np.column_stack([amplitude * np.sin(ph), amplitude * np.sin(2 * ph),
                            -depth * 0.5 * (1 - np.cos(ph))])


def cmd_track(args) -> int:
    cfg = _config(args)
    est = cfg.estimator()
    truth = None
    if args.frames:
        paths = sorted(Path(args.frames).glob("*.pgm"))
        if not paths:
            raise FileNotFoundError(f"no .pgm frames in {args.frames}")
        frames = (read_pgm(p) for p in paths)
    else:
        rig = cfg.rig()
        truth = _synthetic_displacements(args.synthetic, args.amplitude, args.depth)
        frames = (render_target(rig.intr, target_pose(d, rig), rig.layout, rig.render, frame=k)
                  for k, d in enumerate(truth))
    tracker: Tracker = est.tracker
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACK_COLUMNS)
    for k, img in enumerate(frames):
        det = est.detect(img)
        rec = tracker.reinit(det) if k == 0 else tracker.step(det)
        w.writerow([rec.frame_index, rec.m_detected, rec.m_registered]
                   + [fmt(v) for v in rec.d_s] + [fmt(v) for v in rec.rotvec] + [rec.flags])
    _write_text(args.out, buf.getvalue())
    if truth is not None and args.truth_out:
        tb = io.StringIO()
        tw = csv.writer(tb, lineterminator="\n")
        tw.writerow(["frame_index"] + [f"d_s_{a}" for a in "xyz"])
        for k, d in enumerate(truth):
            tw.writerow([k] + [fmt(v) for v in d])
        _write_text(args.truth_out, tb.getvalue())
    return 0


# -- calibrate ----------------------------------------------------------------

CAL_COLUMNS = ["d_x", "d_y", "d_z", "f_x", "f_y", "f_z"]


def read_numeric_csv(path):
    """Header plus float columns; non-numeric columns are dropped."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        try:
            cols[name] = np.array([float(r[j]) for r in body])
        except (ValueError, IndexError):
            continue
    return header, cols


def cmd_calibrate(args) -> int:
    _, cols = read_numeric_csv(args.samples)
    missing = [c for c in CAL_COLUMNS if c not in cols]
    if missing:
        raise ValueError(f"{args.samples}: missing columns {missing}")
    D = np.column_stack([cols[c] for c in CAL_COLUMNS[:3]])
    F = np.column_stack([cols[c] for c in CAL_COLUMNS[3:]])
    K = calibrate_stiffness(D, F)
    resid = F - D @ K.T
    report = {
        "samples": int(len(D)),
        "K": K.tolist(),
        "residual_rms": np.sqrt((resid ** 2).mean(axis=0)).tolist(),
        "condition_number": float(np.linalg.cond(K)),
    }
    lines = [f"samples: {report['samples']}", "K (N/mm):"]
    lines += ["  " + " ".join(f"{v: .6f}" for v in row) for row in K]
    lines.append("residual rms (N): " + " ".join(f"{v:.3g}" for v in report["residual_rms"]))
    print("\n".join(lines))
    if args.json:
        _write_text(args.json, _dump_json(report))
    if args.yaml:
        _write_text(args.yaml, yaml.safe_dump({"stiffness": {"matrix": K.tolist()}}))
    return 0


# -- simulate-grasp -----------------------------------------------------------

def _simulate(cfg: Config):
    try:
        trace = run_grasp_procedure(cfg.grasp_config(), cfg.plant(), cfg.estimator())
        return trace, None
    except PhaseTimeout as exc:
        return exc.trace, exc


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if args.seed is not None:
        cfg = cfg.with_overrides([f"grasp.rng_seed={args.seed}"])
    trace, timeout = _simulate(cfg)
    if trace is not None:
        _write_text(args.out, trace.to_csv())
        summary = trace.summary()
        summary["status"] = "timeout" if timeout else "ok"
        if args.summary:
            _write_text(args.summary, _dump_json(summary))
        print(f"terminal phase: {summary['terminal_phase']}  frames: {summary['frames']}",
              file=sys.stderr if args.out in (None, "-") else sys.stdout)
    if timeout is not None:
        raise timeout
    return 0


# -- evaluate -----------------------------------------------------------------

def cmd_evaluate(args) -> int:
    _, est = read_numeric_csv(args.estimated)
    _, ref = read_numeric_csv(args.reference)
    pairs = []
    if args.pair:
        for p in args.pair:
            a, sep, b = p.partition(":")
            if not sep:
                raise ValueError(f"--pair '{p}' is not of the form est_col:ref_col")
            pairs.append((a, b))
    else:
        names = args.columns or [c for c in est if c in ref]
        pairs = [(c, c) for c in names]
    for a, b in pairs:
        if a not in est or b not in ref:
            raise ValueError(f"column '{a}' or '{b}' not found or not numeric")
    report = {"columns": {}, "point_sets": None}
    lines = [f"{'column':<24} {'mean':>12} {'max':>12} {'rms':>12} {'%mean':>9} {'%max':>9} {'%rms':>9}"]
    for a, b in pairs:
        s = error_stats(est[a], ref[b], mfa=args.mfa)
        key = a if a == b else f"{a}:{b}"
        report["columns"][key] = s.as_dict()
        pct = s.pct_of_mfa
        ptxt = ("{:9.3f} {:9.3f} {:9.3f}".format(float(pct["mean"]), float(pct["max"]), float(pct["rms"]))
                if pct else f"{'-':>9} {'-':>9} {'-':>9}")
        lines.append(f"{key:<24} {float(s.mean_abs):12.6g} {float(s.max_abs):12.6g} "
                     f"{float(s.rms):12.6g} {ptxt}")
    if args.points:
        a_cols, _, b_cols = args.points.partition(":")
        a_cols = a_cols.split(",")
        b_cols = b_cols.split(",") if b_cols else a_cols
        A = np.column_stack([est[c] for c in a_cols])
        B = np.column_stack([ref[c] for c in b_cols])
        d_a, d_h = mean_hausdorff(A, B)
        report["point_sets"] = {"d_a": d_a, "d_h": d_h}
        lines.append(f"mean distance d_a = {d_a:.6g}  Hausdorff d_h = {d_h:.6g}")
    print("\n".join(lines))
    if args.json:
        _write_text(args.json, _dump_json(report))
    return 0


# -- sweep --------------------------------------------------------------------

def _parse_grid(items):
    grid = []
    for item in items or ():
        key, sep, raw = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError(f"--grid '{item}' is not of the form section.field=v1,v2,...")
        grid.append((key, [yaml.safe_load(v) for v in raw.split(",")]))
    return grid


def _sweep_run(job):
    index, data, overrides, out_dir = job
    cfg = config_from_dict(data).with_overrides(overrides)
    trace, timeout = _simulate(cfg)
    name = f"run_{index:03d}.csv"
    (Path(out_dir) / name).write_text(trace.to_csv())
    s = trace.summary()
    return {"run": index, "trace": name, "status": "timeout" if timeout else "ok",
            "terminal_phase": s["terminal_phase"], "frames": s["frames"],
            "pulling_s": s["durations_s"].get("Pulling", 0.0),
            "F_s_mean_abs_err": s.get("F_s_mean_abs_err"),
            "F_g_mean_abs_err": s.get("F_g_mean_abs_err"),
            "F_p_mean_abs_err": s.get("F_p_mean_abs_err")}


def cmd_sweep(args) -> int:
    cfg = _config(args)
    grid = _parse_grid(args.grid)
    keys = [k for k, _ in grid]
    combos = list(itertools.product(*[v for _, v in grid])) or [()]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs, params = [], []
    base = cfg.to_dict()
    for combo in combos:
        for seed in args.seeds:
            ov = [f"{k}={json.dumps(v)}" for k, v in zip(keys, combo)] + [f"grasp.rng_seed={seed}"]
            # validate before launching anything
            cfg.with_overrides(ov)
            jobs.append((len(jobs), base, ov, str(out_dir)))
            params.append(dict(zip(keys, combo), seed=seed))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_run, jobs))
    else:
        results = [_sweep_run(j) for j in jobs]
    cols = ["run"] + keys + ["seed", "trace", "status", "terminal_phase", "frames", "pulling_s",
                             "F_s_mean_abs_err", "F_g_mean_abs_err", "F_p_mean_abs_err"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r, p in zip(results, params):
        row = {**r, **p}
        w.writerow([fmt(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
    (out_dir / "sweep.csv").write_text(buf.getvalue())
    n_bad = sum(r["status"] != "ok" for r in results)
    print(f"{len(results)} runs, {n_bad} timed out; summary in {out_dir / 'sweep.csv'}")
    return 4 if n_bad else 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hapticforceps", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default="default", help="YAML config path or 'default'")
        sp.add_argument("--set", action="append", metavar="SEC.FIELD=VALUE",
                        help="override one config field (repeatable)")

    sp = sub.add_parser("render", help="render a target image to PGM")
    common(sp)
    sp.add_argument("--displacement", nargs=3, type=float, default=[0.0, 0.0, 0.0],
                    metavar=("DX", "DY", "DZ"), help="target displacement from rest (mm)")
    sp.add_argument("--rotvec", nargs=3, type=float, default=[0.0, 0.0, 0.0],
                    metavar=("RX", "RY", "RZ"), help="target rotation from rest (axis-angle, rad)")
    sp.add_argument("--frame", type=int, default=0, help="frame index for the noise seed")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("track", help="track the target over PGM frames or a synthetic path")
    common(sp)
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--frames", help="directory of PGM frames; the first is the rest frame")
    src.add_argument("--synthetic", type=int, metavar="N", help="render N frames of a closed path")
    sp.add_argument("--amplitude", type=float, default=0.3, help="lateral amplitude (mm)")
    sp.add_argument("--depth", type=float, default=0.6, help="peak axial compression (mm)")
    sp.add_argument("--truth-out", help="write the synthetic ground-truth displacements here")
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_track)

    sp = sub.add_parser("calibrate", help="fit the flexure stiffness from samples")
    sp.add_argument("samples", help="CSV with columns d_x,d_y,d_z,f_x,f_y,f_z")
    sp.add_argument("--json", help="write the report as JSON")
    sp.add_argument("--yaml", help="write a config fragment with the fitted matrix")
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("simulate-grasp", help="run the closed-loop grasp procedure")
    common(sp)
    sp.add_argument("--seed", type=int, help="shortcut for --set grasp.rng_seed=N")
    sp.add_argument("--out", default="-", help="trace CSV path")
    sp.add_argument("--summary", help="summary JSON path")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("evaluate", help="error statistics between two CSV files")
    sp.add_argument("estimated")
    sp.add_argument("reference")
    sp.add_argument("--columns", nargs="+", help="columns to compare (default: all shared numeric)")
    sp.add_argument("--pair", action="append", metavar="EST:REF",
                    help="compare differently named columns (repeatable)")
    sp.add_argument("--mfa", type=float, help="force amplitude for percentages (default max|ref|)")
    sp.add_argument("--points", metavar="AX,AY,AZ[:BX,BY,BZ]",
                    help="columns forming point sets for mean/Hausdorff distance")
    sp.add_argument("--json", help="write the report as JSON")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("sweep", help="simulate-grasp over a parameter grid")
    common(sp)
    sp.add_argument("--grid", action="append", metavar="SEC.FIELD=V1,V2",
                    help="values to sweep (repeatable; Cartesian product)")
    sp.add_argument("--seeds", nargs="+", type=int, default=[0])
    sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ForcepsError as exc:
        err, code = exc, exc.exit_code
    except (ValueError, ArithmeticError, OSError, np.linalg.LinAlgError) as exc:
        err, code = exc, 3
    msg = str(err).splitlines()[0] if str(err) else ""
    print(f"error: {err.__class__.__name__}: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
