"""``tenn`` command line: verify, train, eval, export.

Exit status is 0 on success, 1 when a check or evaluation fails and 2 for
usage or configuration errors.  The worker count for chunked gradients and
grid evaluation is read from ``TENN_WORKERS``.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import build_config, config_help, read_sections
from .errors import DivergenceError, TennError
from .report import (DEFAULT_TIMES, evaluate_grid, export_heatmaps, model_predictor,
                     write_grid_csv, write_summary_csv)
from .train import load_checkpoint, save_checkpoint, train
from .verify import LEVI_CIVITA, corrupted_levi_civita, run_verify


def _grid(text):
    try:
        nx, ny = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 64x64, got {text!r}") from None
    if nx < 1 or ny < 1:
        raise argparse.ArgumentTypeError("grid dimensions must be positive")
    return nx, ny


def _times(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"times must be comma-separated numbers, got {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="tenn", description=__doc__.splitlines()[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the construction identities and oracle checks")
    v.add_argument("--networks", type=int, default=20, help="random networks per sweep (default 20)")
    v.add_argument("--points", type=int, default=1000, help="points per network (default 1000)")
    v.add_argument("--seed", type=int, default=0, help="sweep seed (default 0)")
    v.add_argument("--fault", choices=("none", "levi-civita"), default="none",
                   help="inject a known defect to confirm the checks catch it")

    t = sub.add_parser("train", help="train a model and write checkpoint, history and manifest",
                       epilog="config file keys and defaults:\n" + config_help(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    t.add_argument("--config", type=Path, help="INI file with [train], [network], [adam], [weights]")
    t.add_argument("--model", choices=("vanilla", "tenn"))
    t.add_argument("--variant", choices=("potential", "split"))
    t.add_argument("--re", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=None,
                   help="bit-reproducible gradient reduction (default on)")
    t.add_argument("--out", type=Path, default=Path("run"), help="output directory (default ./run)")

    for name, helptext in (("eval", "compare a checkpoint with the analytic vortex"),
                           ("export", "write prediction/truth/error heatmaps")):
        e = sub.add_parser(name, help=helptext)
        e.add_argument("--checkpoint", type=Path, required=True)
        e.add_argument("--grid", type=_grid, default=(64, 64), help="NXxNY (default 64x64)")
        e.add_argument("--times", type=_times, default=DEFAULT_TIMES,
                       help="comma-separated snapshot times (default 0,0.25,0.5,0.75,1)")
        e.add_argument("--re", type=float, help="Reynolds number (default: the training value)")
        e.add_argument("--source", choices=("curl", "head"), default="curl",
                       help="vorticity from the velocity curl (default) or the TENN head")
        e.add_argument("--out", type=Path, default=Path("eval"), help="output directory (default ./eval)")
        if name == "export":
            e.add_argument("--format", choices=("csv", "pgm"), default="csv")
    return p


def cmd_verify(args, out=sys.stdout):
    eps = corrupted_levi_civita() if args.fault == "levi-civita" else LEVI_CIVITA
    results = run_verify(args.networks, args.points, args.seed, eps)
    for r in results:
        print(r.line(), file=out)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("verify failed: " + "; ".join(failed), file=out)
        return 1
    print("verify passed", file=out)
    return 0


def _manifest(config, report, paths):
    return {
        "config": config.to_dict(),
        "seed": config.seed,
        "versions": {"tenn": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "epochs_completed": int(len(report.totals)),
        "final_total": float(report.totals[-1]) if len(report.totals) else None,
        "wall_time_s": report.wall_time,
        "params_sha256": report.checksum,
        "status": report.message or "completed",
        "files": {k: str(v) for k, v in paths.items()},
    }


def cmd_train(args, out=sys.stdout):
    sections = read_sections(args.config) if args.config is not None else {}
    overrides = {"model": args.model, "variant": args.variant, "re": args.re, "seed": args.seed,
                 "epochs": args.epochs, "deterministic": args.deterministic}
    config = build_config(sections, overrides)
    args.out.mkdir(parents=True, exist_ok=True)
    paths = {"checkpoint": args.out / "model.ckpt", "history": args.out / "history.csv",
             "manifest": args.out / "manifest.json"}
    status = 0
    try:
        params, report = train(config)
    except DivergenceError as exc:
        params, report, status = exc.params, exc.report, 1
        print(f"training diverged: {exc}", file=out)
    save_checkpoint(paths["checkpoint"], params, config.network, config)
    report.to_csv(paths["history"])
    paths["manifest"].write_text(json.dumps(_manifest(config, report, paths), indent=2) + "\n")
    if len(report.totals):
        print(f"epochs {len(report.totals)}  total loss {report.totals[0]:.6g} -> "
              f"{report.totals[-1]:.6g}  ({report.wall_time:.1f} s)", file=out)
    print(f"wrote {args.out}", file=out)
    return status


def _evaluate(args):
    ckpt = load_checkpoint(args.checkpoint)
    cfg = ckpt.config
    re = args.re if args.re is not None else float(cfg.get("re", 100.0))
    model, variant = cfg.get("model", "tenn"), cfg.get("variant", "potential")
    predict = model_predictor(ckpt.params, ckpt.spec, model, variant, re,
                              float(cfg.get("eps_div", 1e-4)), args.source)
    nx, ny = args.grid
    return evaluate_grid(predict, re, nx, ny, args.times), re


def _print_grid(grid, re, out):
    vel = grid.velocity_rel_l2_per_time
    for k, (t, e) in enumerate(zip(grid.times, grid.rel_l2_per_time)):
        extra = "" if vel is None else f"  velocity rel-L2 {vel[k]:.4e}"
        print(f"t={t:g}  vorticity rel-L2 {e:.4e}{extra}", file=out)
    print(f"overall vorticity rel-L2 {grid.rel_l2_overall:.4e}", file=out)
    if grid.nt > 1:
        print(f"decay ratio predicted {grid.decay_ratio('pred'):.4g}  "
              f"analytic {grid.decay_ratio('true'):.4g}  (Re={re:g})", file=out)


def cmd_eval(args, out=sys.stdout):
    grid, re = _evaluate(args)
    args.out.mkdir(parents=True, exist_ok=True)
    write_summary_csv(grid, args.out / "summary.csv")
    write_grid_csv(grid, args.out / "vorticity_grid.csv")
    _print_grid(grid, re, out)
    print(f"wrote {args.out}", file=out)
    return 0


def cmd_export(args, out=sys.stdout):
    grid, re = _evaluate(args)
    written = export_heatmaps(grid, args.out, args.format)
    _print_grid(grid, re, out)
    print(f"wrote {len(written)} files to {args.out}", file=out)
    return 0


COMMANDS = {"verify": cmd_verify, "train": cmd_train, "eval": cmd_eval, "export": cmd_export}


def main(argv=None, out=sys.stdout):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except (TennError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
