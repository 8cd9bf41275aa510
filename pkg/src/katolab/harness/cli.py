"""Command line interface.

Verbs: ``run``, ``sweep``, ``oracle``, ``list-checks``, ``export-mesh``.
Exit codes: 0 success, 1 a check (or sweep/oracle comparison) failed,
2 configuration or mesh construction error.
"""
from __future__ import annotations

import argparse
import os
import sys

from ..geometry.curvature import ricci_lower_field
from ..geometry.meshio import mesh_to_text, write_field
from ..geometry.spec import ManifoldSpec, SpecError
from . import runner
from .config import ConfigError, check_levels, load_config
from .registry import list_checks

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="katolab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, help_ in (("run", "run all configured checks"),
                        ("sweep", "analytic-target errors over refinement levels"),
                        ("oracle", "compare against dense-algebra oracles")):
        s = sub.add_parser(verb, help=help_)
        s.add_argument("config")
        s.add_argument("--seed", type=int, help="override the config seed")
        s.add_argument("--out", help="output directory (default: config 'output' or ./out)")
        s.add_argument("--tolerance-scale", type=float, default=1.0,
                       help="multiply every slack/tolerance by this factor")
        s.add_argument("--levels", help="comma-separated mesh sizes, strictly decreasing")
    sub.add_parser("list-checks", help="print the available checks")
    e = sub.add_parser("export-mesh", help="write a mesh in the text format")
    e.add_argument("spec", help="e.g. 'round_sphere:radius=1'")
    e.add_argument("resolution", type=float)
    e.add_argument("path")
    e.add_argument("--curvature", action="store_true",
                   help="also write the Gauss curvature field to <path>.rho")
    return p


def _config(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        cfg.seed = args.seed
    if args.levels:
        try:
            cfg.levels = check_levels([float(x) for x in args.levels.split(",")], "--levels")
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if not args.tolerance_scale > 0:
        raise ConfigError("--tolerance-scale must be positive")
    cfg.tolerance_scale = args.tolerance_scale
    return cfg


def _out_dir(args, cfg):
    return args.out or cfg.output or "out"


def cmd_run(args) -> int:
    cfg = _config(args)
    rep = runner.run_experiment(cfg)
    runner.write_outputs(_out_dir(args, cfg), runner.report_files(rep))
    for lv in rep.levels:
        for name, outs in lv.outcomes.items():
            worst = min(outs, key=lambda o: (o.status != runner.FAIL, o.margin))
            counts = {s: sum(o.status == s for o in outs) for s in
                      (runner.PASS, runner.CALIBRATED, runner.HYPOTHESIS_NOT_MET, runner.FAIL)}
            state = "FAIL" if counts[runner.FAIL] else "ok"
            print(f"level {lv.level} N={lv.N} {name}: {state} "
                  + " ".join(f"{k}={v}" for k, v in counts.items() if v)
                  + f" worst_margin={worst.margin:.4g}")
    return rep.exit_code


def cmd_sweep(args) -> int:
    cfg = _config(args)
    rows = runner.refinement_sweep(cfg)
    runner.write_outputs(_out_dir(args, cfg),
                         {"sweep.csv": runner._csv(rows, runner.SWEEP_COLUMNS)})
    for r in rows:
        print(f"{r['target']} level {r['level']} N={r['N']} value={r['value']:.6g} "
              f"rel_error={r['rel_error']:.3e}")
    return EXIT_OK if all(r["ok"] for r in rows) else EXIT_FAIL


def cmd_oracle(args) -> int:
    cfg = _config(args)
    rows = runner.oracle_from_config(cfg)
    runner.write_outputs(_out_dir(args, cfg),
                         {"oracle.csv": runner._csv(rows, runner.ORACLE_COLUMNS)})
    for r in rows:
        print(f"{r['operation']}: error={r['error']:.3e} tol={r['tolerance']:g} "
              f"{'ok' if r['ok'] else 'FAIL'}")
    return EXIT_OK if all(r["ok"] for r in rows) else EXIT_FAIL


def cmd_list(args) -> int:
    for name, domain, summary in list_checks():
        print(f"{name:20s} {domain:9s} {summary}")
    return EXIT_OK


def cmd_export(args) -> int:
    from ..geometry.meshio import atomic_write_text
    from ..geometry.mesh import build_manifold

    spec = ManifoldSpec.from_string(args.spec)
    mesh = build_manifold(spec, args.resolution)
    d = os.path.dirname(os.path.abspath(args.path))
    os.makedirs(d, exist_ok=True)
    atomic_write_text(args.path, mesh_to_text(mesh))
    if args.curvature:
        write_field(args.path + ".rho", ricci_lower_field(spec, mesh), name="gauss_curvature")
    print(f"wrote {args.path}: N={mesh.N} h={mesh.h:.4g} digest={mesh.digest}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "oracle": cmd_oracle,
            "list-checks": cmd_list, "export-mesh": cmd_export}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.verb](args)
    except (ConfigError, SpecError) as exc:
        print(f"katolab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
