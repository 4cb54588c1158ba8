"""Command-line entry point.

Subcommands:
    derive-scales --config <file>
    simulate --config <file|scenario> --seed <u64> --out <dir>
    image --method sar|ci|sp|op|pr|all --in <dir>
    validate --suite moments|spectral|fourier|stability
    sweep --axis X|sigma_tau|sigma_W --values <csv> --realizations <n>
    scenario --name fig1..fig4 --out <dir>   (simulate + image all)
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import io as cio
from .scene import load_scene, scene_from_dict, derive_scales, display_grid, matrix_grid
from .experiment import (ScenarioSpec, builtin_scenario, run_scenario,
                         scenario_names, validate, sweep, sweep_to_csv,
                         StageError, ALL_METHODS, default_h_est)


def _load_scene_arg(config: str):
    """A --config value is a JSON path or a builtin scenario name."""
    if config in scenario_names():
        return builtin_scenario(config).scene, config
    if not os.path.exists(config):
        raise SystemExit(f"error: config {config!r} is neither a file nor a "
                         f"scenario name ({', '.join(scenario_names())})")
    try:
        return load_scene(config), None
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise SystemExit(f"error: bad scene config: {exc}")


def cmd_derive_scales(args) -> int:
    scene, _ = _load_scene_arg(args.config)
    scales = derive_scales(scene)
    print(json.dumps(cio._sanitize(scales.to_dict()), indent=2, sort_keys=True))
    return 0


def cmd_simulate(args) -> int:
    scene, name = _load_scene_arg(args.config)
    spec = ScenarioSpec(name=name or "custom", scene=scene, methods=(),
                        seed=args.seed, out_dir=args.out)
    try:
        manifest = run_scenario(spec)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(os.path.join(args.out, spec.name, "manifest.json"))
    return 0


def cmd_image(args) -> int:
    in_dir = args.in_dir
    manifest_path = os.path.join(in_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        print(f"error: no manifest.json in {in_dir}", file=sys.stderr)
        return 1
    manifest = cio.read_json(manifest_path)
    scene = scene_from_dict(manifest["scene"])
    methods = ALL_METHODS if args.method == "all" else (args.method,)
    seed = manifest["seeds"]["screen"]
    spec = ScenarioSpec(name=os.path.basename(os.path.normpath(in_dir)),
                        scene=scene, methods=methods, seed=seed,
                        h_est=args.h_est or manifest.get("h_est"),
                        out_dir=os.path.dirname(os.path.normpath(in_dir)) or ".")
    try:
        run_scenario(spec)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for m in methods:
        print(os.path.join(in_dir, f"image_{m}.csv"))
    return 0


def cmd_validate(args) -> int:
    try:
        report = validate(args.suite, seed=args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(cio._sanitize(report), indent=2, sort_keys=True)
    if args.out:
        cio.atomic_write_text(args.out, text + "\n")
    print(text)
    return 0 if report["passed"] else 1


def cmd_sweep(args) -> int:
    scene, _ = _load_scene_arg(args.config)
    try:
        values = [float(v) for v in args.values.split(",") if v != ""]
    except ValueError:
        print("error: --values must be a comma-separated list of numbers",
              file=sys.stderr)
        return 2
    try:
        rows = sweep(scene, args.axis, values, args.realizations,
                     seed=args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    csv = sweep_to_csv(rows)
    if args.out:
        cio.atomic_write_text(args.out, csv)
        print(args.out)
    else:
        print(csv, end="")
    return 0


def cmd_scenario(args) -> int:
    try:
        spec = builtin_scenario(args.name, out_dir=args.out, seed=args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        run_scenario(spec)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(os.path.join(args.out, spec.name, "manifest.json"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cintlab",
                                description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("derive-scales", help="print derived scales for a scene")
    q.add_argument("--config", required=True)
    q.set_defaults(func=cmd_derive_scales)

    q = sub.add_parser("simulate", help="synthesize a realization and the two-point matrix")
    q.add_argument("--config", required=True)
    q.add_argument("--seed", type=int, default=None)
    q.add_argument("--out", default="out")
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("image", help="compute images from a simulated directory")
    q.add_argument("--method", required=True,
                   choices=list(ALL_METHODS) + ["all"])
    q.add_argument("--in", dest="in_dir", required=True)
    q.add_argument("--h-est", type=float, default=None)
    q.set_defaults(func=cmd_image)

    q = sub.add_parser("validate", help="run a validation suite")
    q.add_argument("--suite", required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_validate)

    q = sub.add_parser("sweep", help="ensemble stability sweep")
    q.add_argument("--config", default="fig2")
    q.add_argument("--axis", required=True, choices=["X", "sigma_tau", "sigma_W"])
    q.add_argument("--values", required=True)
    q.add_argument("--realizations", type=int, required=True)
    q.add_argument("--seed", type=int, default=None)
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_sweep)

    q = sub.add_parser("scenario", help="run a built-in scenario end to end")
    q.add_argument("--name", required=True)
    q.add_argument("--out", default="out")
    q.add_argument("--seed", type=int, default=None)
    q.set_defaults(func=cmd_scenario)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
