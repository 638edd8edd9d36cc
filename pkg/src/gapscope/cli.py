"""Command-line surface.

Subcommands: solve, trace, reduce, harness, gallery. All outputs are
plain CSV/JSON (plot-ready data, no rendering) and byte-identical across
repeated runs with the same configuration. Exit codes: 0 success,
1 error, 2 partial convergence. Set GAPSCOPE_LOG to a level name for
diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .errors import GapscopeError
from .facial import DUAL, PRIMAL, facial_reduction, reduce_to_rd
from .gallery import gallery_names, get_entry
from .harness import harness_report, report_json
from .model import instance_to_json, perturb
from .sdpa import read_sdpa, write_sdpa
from .solver import SolveOptions, solve
from .tracer import (
    TSchedule,
    default_theta_grid,
    structure_report,
    trace_theta,
)

log = logging.getLogger("gapscope")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2


def _add_input_flags(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--gallery", choices=gallery_names(),
                     help="named gallery instance")
    src.add_argument("--input", help="path to an SDPA sparse (.dat-s) file")


def _add_common_flags(p):
    p.add_argument("--output-dir", default=".", help="directory for outputs")
    p.add_argument("--format", choices=["csv", "json"], default="csv",
                   help="sample table format")
    p.add_argument("--tol", type=float, default=1e-9,
                   help="solver gap/feasibility tolerance")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="parallel solves for independent cells")


def _add_schedule_flags(p):
    p.add_argument("--t0", type=float, default=1e-1)
    p.add_argument("--t-ratio", type=float, default=0.5)
    p.add_argument("--t-steps", type=int, default=14)
    p.add_argument("--theta-points", type=int, default=33)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gapscope",
        description="SDP duality-gap toolkit: regularized solves, facial "
                    "reduction certificates, traced limiting values")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one (possibly perturbed) pair")
    _add_input_flags(p)
    _add_common_flags(p)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--eta", type=float, default=0.0)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("trace", help="trace the limiting value profile")
    _add_input_flags(p)
    _add_common_flags(p)
    _add_schedule_flags(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("reduce", help="facial reduction certificate")
    _add_input_flags(p)
    _add_common_flags(p)
    p.add_argument("--side", choices=[PRIMAL, DUAL, "both"], default="both")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("harness", help="sandwich/bound check battery")
    _add_input_flags(p)
    _add_common_flags(p)
    _add_schedule_flags(p)
    p.add_argument("--alphas", type=float, nargs="+",
                   default=[0.5, 1.0, 2.0])
    p.add_argument("--ts", type=float, nargs="+", default=[1e-2, 1e-3])
    p.set_defaults(func=cmd_harness)

    p = sub.add_parser("gallery", help="export the gallery instances")
    p.add_argument("--output-dir", default=".")
    p.set_defaults(func=cmd_gallery)

    return parser


def _load_instance(args):
    if args.gallery:
        return get_entry(args.gallery), args.gallery
    entry = None
    inst = read_sdpa(args.input)
    name = os.path.splitext(os.path.basename(args.input))[0]
    from .gallery import GalleryEntry
    return GalleryEntry(instance=inst), name


def _outpath(args, filename):
    os.makedirs(args.output_dir, exist_ok=True)
    return os.path.join(args.output_dir, filename)


def _dump_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def cmd_solve(args):
    entry, name = _load_instance(args)
    pair = perturb(entry.instance, args.eps, args.eta)
    opts = SolveOptions(tol_gap=args.tol, tol_feas=args.tol)
    res = solve(pair.instance, opts)
    payload = {
        "name": name, "eps": args.eps, "eta": args.eta,
        "primal_value": res.primal_value, "dual_value": res.dual_value,
        "gap": res.gap, "primal_res": res.primal_res,
        "dual_res": res.dual_res, "status": res.status.value,
        "iters": res.iters,
        "X": res.X.dense().tolist(), "y": res.y.tolist(),
        "S": res.S.dense().tolist(),
    }
    _dump_json(_outpath(args, f"solve_{name}.json"), payload)
    print(f"{name} eps={args.eps:g} eta={args.eta:g} "
          f"primal={res.primal_value:.9g} dual={res.dual_value:.9g} "
          f"status={res.status.value}")
    return EXIT_OK if res.status.value == "Optimal" else EXIT_PARTIAL


def cmd_trace(args):
    entry, name = _load_instance(args)
    sched = TSchedule(t0=args.t0, ratio=args.t_ratio, steps=args.t_steps)
    opts = SolveOptions(tol_gap=args.tol, tol_feas=args.tol)
    grid = default_theta_grid(args.theta_points)
    profile = trace_theta(entry.instance, grid, sched, opts, jobs=args.jobs)
    report = structure_report(profile)

    profile.write_csv(_outpath(args, "samples.csv"))
    payload = profile.to_json_dict()
    payload.update(report.to_json_dict())
    _dump_json(_outpath(args, "profile.json"), payload)
    with open(_outpath(args, "va_profile.dat"), "w") as fh:
        fh.write("# theta va_hat\n")
        for theta, va in zip(profile.theta_grid, profile.va_hat):
            fh.write(f"{theta!r} {va!r}\n")

    print(f"{name}: vp_hat={profile.vp_hat:.6g} vd_hat={profile.vd_hat:.6g} "
          f"gap_hat={profile.gap_hat:.6g}")
    print(f"discontinuity scores: theta=0: "
          f"{report.discontinuity_score_at_0:.3g}, pi/2: "
          f"{report.discontinuity_score_at_pi2:.3g}")
    partial = any(not s.accepted for s in profile.samples)
    return EXIT_PARTIAL if partial else EXIT_OK


def cmd_reduce(args):
    entry, name = _load_instance(args)
    sides = [args.side] if args.side != "both" else [PRIMAL, DUAL]
    for side in sides:
        chain = facial_reduction(entry.instance, side)
        _dump_json(_outpath(args, f"certificate_{name}_{side}.json"),
                   chain.to_json_dict())
        print(f"{name} {side}: sd_upper={chain.sd_upper} "
              f"ranks={chain.ranks} r={chain.r}")
    return EXIT_OK


def cmd_harness(args):
    entry, name = _load_instance(args)
    chain = facial_reduction(entry.instance, DUAL)
    vp, vd = entry.known_vp, entry.known_vd
    if chain.sd_upper == 0:
        rows = []
        from .harness import CheckRow
        rows.append(CheckRow(
            name="sd-1 checks", params={"sd_upper": 0},
            lhs=float("nan"), rhs=float("nan"), slack=float("nan"),
            passed=True,
            note="interior point exists; nothing to bound"))
    else:
        red = reduce_to_rd(entry.instance, chain)
        if vp is None or vd is None:
            from .tracer import bar_v_estimate
            sched = TSchedule(t0=args.t0, ratio=args.t_ratio,
                              steps=args.t_steps)
            vp = bar_v_estimate(entry.instance, float("inf"), sched)[0]
            vd = bar_v_estimate(entry.instance, 0.0, sched)[0]
        rows = harness_report(red, vp, vd, alphas=tuple(args.alphas),
                              ts=tuple(args.ts))
    path = _outpath(args, f"harness_{name}.json")
    with open(path, "w") as fh:
        fh.write(report_json(rows) + "\n")
    failures = [r for r in rows if not r.passed]
    for r in rows:
        state = "pass" if r.passed else "FAIL"
        note = f" ({r.note})" if r.note else ""
        print(f"[{state}] {r.name} slack={r.slack:.3g}{note}")
    return EXIT_OK if not failures else EXIT_ERROR


def cmd_gallery(args):
    os.makedirs(args.output_dir, exist_ok=True)
    for name in gallery_names():
        entry = get_entry(name)
        write_sdpa(entry.instance, os.path.join(args.output_dir,
                                                f"{name}.dat-s"))
        with open(os.path.join(args.output_dir, f"{name}.json"), "w") as fh:
            fh.write(instance_to_json(entry.instance) + "\n")
        print(f"wrote {name}.dat-s and {name}.json")
    return EXIT_OK


def main(argv=None):
    level = os.environ.get("GAPSCOPE_LOG", "WARNING").upper()
    logging.basicConfig(stream=sys.stderr,
                        level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GapscopeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
