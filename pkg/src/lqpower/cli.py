"""Command-line front end.

    lqpower optimize  [--config cfg.json] [--preset fig2] [--out DIR]
    lqpower simulate  [--config cfg.json] [--seed N] [--samples N] [--out DIR]
    lqpower compare   --horizons 2:30 [--config cfg.json] [--out DIR]
    lqpower sweep     --param sigma_d2 --values 0,0.01,0.05 [--out DIR]
    lqpower figure    {fig2|fig3|fig4} [--plot] [--out DIR]

Exit status is 0 on success; any invalid input produces a single
"error: ..." line on stderr and a nonzero exit.
"""

from __future__ import annotations

import argparse
import sys as _sys

from . import experiments as exp


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON experiment config")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, help="master RNG seed (u64)")
    parser.add_argument("--samples", type=int, help="Monte Carlo replication count")
    parser.add_argument("--preset", choices=sorted(exp.PRESETS),
                        help="apply a figure preset before the config file")
    parser.add_argument("--plot", action="store_true",
                        help="also emit a gnuplot script for the outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lqpower",
        description="Energy-efficient transmit-power policies for remote LQ control")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("optimize", help="optimize one policy"))
    _add_common(sub.add_parser("simulate",
                               help="optimize, then Monte Carlo-evaluate"))

    p_cmp = sub.add_parser("compare",
                           help="proposed vs full-power vs open-loop over horizons")
    _add_common(p_cmp)
    p_cmp.add_argument("--horizons", default="2:30",
                       help="comma list and/or lo:hi ranges, e.g. 1,2,5:10")

    p_sweep = sub.add_parser("sweep", help="re-optimize over one parameter")
    _add_common(p_sweep)
    p_sweep.add_argument("--param", required=True,
                         help=f"one of {', '.join(exp.SWEEP_PARAMETERS)}")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values (may be empty)")

    p_fig = sub.add_parser("figure", help="reproduce a reference figure's data")
    p_fig.add_argument("which", choices=("fig2", "fig3", "fig4"))
    _add_common(p_fig)
    return parser


def _parse_horizons(spec: str) -> list[int]:
    out = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            lo, hi = part.split(":", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise exp.ConfigError(f"no horizons in {spec!r}")
    return out


def _parse_values(spec: str) -> list[float]:
    return [float(v) for v in spec.split(",") if v.strip()]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        preset = getattr(args, "preset", None)
        if args.command == "figure" and preset is None:
            preset = args.which
        cfg = exp.load_config(
            path=args.config,
            preset=preset,
            seed=args.seed,
            samples=args.samples,
            output_dir=args.out,
        )
        if args.command == "optimize":
            res = exp.run_optimize(cfg)
            if args.plot:
                res["files"].append(exp.emit_plot_script(
                    res["files"][:1], "policy", res["files"][0].parent / "policy.gp"))
        elif args.command == "simulate":
            res = exp.run_simulate(cfg)
        elif args.command == "compare":
            res = exp.run_compare(cfg, _parse_horizons(args.horizons))
            if args.plot:
                res["files"].append(exp.emit_plot_script(
                    res["files"][:1], "comparison",
                    res["files"][0].parent / "comparison.gp", logy=True))
        elif args.command == "sweep":
            res = exp.run_sweep(cfg, args.param, _parse_values(args.values))
        else:
            res = exp.run_figure(cfg, args.which, plot=args.plot)
    except (exp.ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 1
    for f in res["files"]:
        print(f)
    return 0


if __name__ == "__main__":
    _sys.exit(main())
