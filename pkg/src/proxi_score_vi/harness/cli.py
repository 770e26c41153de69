"""Command line entry point: run, list-presets, plot, validate."""
import argparse
import os
import sys

from ..errors import MetricMissing, ParseError, UnknownPreset, ValidationError
from .config import load_config
from .output import read_csv, render_convergence_svg, write_outputs
from .presets import PRESET_NAMES, preset
from .runner import default_parallelism, run_matrix

EXIT_OK, EXIT_FAILURE, EXIT_ABORTED = 0, 1, 2


def _load(args):
    if args.preset:
        return preset(args.preset)
    return load_config(args.config)


def cmd_run(args):
    cfg = _load(args)
    if args.seed_override is not None:
        cfg = cfg.with_seeds([args.seed_override])
    out = args.out or cfg.run.output_dir
    results = run_matrix(cfg, args.parallel)
    write_outputs(results, out)
    n_bad = sum(r.status != "completed" for r in results)
    for r in results:
        if r.status != "completed":
            print(f"{r.run_id} {r.variant.algo} seed={r.variant.seed}: {r.status}: {r.message}",
                  file=sys.stderr)
    print(f"{len(results)} runs, {len(results) - n_bad} completed -> {out}")
    return EXIT_ABORTED if n_bad else EXIT_OK


def cmd_list(args):
    for name in PRESET_NAMES:
        print(f"{name:18s} {preset(name).run.description}")
    return EXIT_OK


def cmd_plot(args):
    path = args.inp
    if os.path.isdir(path):
        path = os.path.join(path, "traces.csv")
    traces = read_csv(path)
    render_convergence_svg(traces, args.metric, args.out, title=args.metric)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_validate(args):
    cfg = load_config(args.config)
    print(f"ok: {cfg.run.name} (dim {cfg.dim})")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="proxi-score-vi", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute an experiment matrix")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="path to a TOML experiment config")
    src.add_argument("--preset", help="name of a built-in preset")
    r.add_argument("--out", help="output directory (default: run.output_dir)")
    r.add_argument("--parallel", type=int, default=None,
                   help="worker processes (default: $PROXI_SCORE_VI_THREADS or 1)")
    r.add_argument("--seed-override", type=int, default=None, help="run only this seed")
    r.set_defaults(func=cmd_run)

    ls = sub.add_parser("list-presets", help="print preset names and descriptions")
    ls.set_defaults(func=cmd_list)

    pl = sub.add_parser("plot", help="render a convergence SVG from a results directory")
    pl.add_argument("--metric", required=True)
    pl.add_argument("--in", dest="inp", required=True, help="results directory or traces.csv")
    pl.add_argument("--out", required=True, help="SVG file to write")
    pl.set_defaults(func=cmd_plot)

    v = sub.add_parser("validate", help="check a config file and report every problem")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError, UnknownPreset, MetricMissing, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
