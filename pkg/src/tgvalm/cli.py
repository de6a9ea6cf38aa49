"""Command-line entry point: ``tgvalm run ...`` and ``tgvalm compare ...``.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import runner
from .runner import SOLVERS, ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    # defaults stay None so config-file values are only overridden by explicit flags
    p.add_argument("--input", help="PGM file or synth:KIND[:SIZE] with KIND in squares|constant|ramp")
    p.add_argument("--alpha1", type=float)
    p.add_argument("--alpha0", type=float)
    p.add_argument("--a", type=float, help="weight of the ||w||^2 term (default 1.0)")
    p.add_argument("--noise-percent", type=float, help="add noise with std = percent of the dynamic range")
    p.add_argument("--noise-std", type=float, help="add noise with this absolute std")
    p.add_argument("--seed", type=int)
    p.add_argument("--sigma0", type=float, help="initial penalty (default 4)")
    p.add_argument("--sigma-growth", type=float, help="penalty growth factor (default 4)")
    p.add_argument("--sigma-max", type=float)
    p.add_argument("--delta", type=float, help="inner stopping constant (default 1e-3)")
    p.add_argument("--tol", type=float, help="target scaled KKT residual (default 1e-6)")
    p.add_argument("--max-outer", type=int)
    p.add_argument("--max-iters", type=int, help="ALG2 iteration cap")
    p.add_argument("--check-every", type=int, help="ALG2 residual check period")
    p.add_argument("--line-search", action="store_const", const=True)
    p.add_argument("--clean-ref", help="clean reference image for PSNR/RMSE/SSIM")
    p.add_argument("--time-budget", type=float, help="wall-clock limit in seconds (default 1e4)")
    p.add_argument("--no-timing", dest="timing", action="store_const", const=False,
                   help="write wall_ms as 0 so traces are byte-reproducible")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tgvalm", description="TGV denoising with ALM-PDP, ALM-PDD or ALG2.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="denoise one image")
    run.add_argument("--config", help="key=value file; flags override its values")
    run.add_argument("--solver", choices=SOLVERS)
    run.add_argument("--output", help="denoised PGM")
    run.add_argument("--trace", help="trace CSV")
    _add_common(run)

    cmp_ = sub.add_parser("compare", help="run several configurations on one input")
    cmp_.add_argument("--config", action="append", default=[], help="repeatable")
    cmp_.add_argument("--solvers", help="comma-separated solver list applied to one base config")
    cmp_.add_argument("--table-csv", help="write the comparison table as CSV")
    _add_common(cmp_)
    return parser


_NON_CONFIG = {"command", "config", "solvers", "table_csv", "verbose"}


def _overrides(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in _NON_CONFIG}


def _cmd_run(args) -> int:
    cfg = runner.build_config(args.config, **_overrides(args))
    f, clean = runner.prepare_data(cfg)
    outcome = runner.solve(cfg, f, clean)
    runner.write_outputs(outcome)
    print(runner.summary_line(outcome))
    if outcome.status == "failed":
        print(f"error: solver failure: {outcome.error}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_compare(args) -> int:
    base = _overrides(args)
    if args.solvers:
        if len(args.config) > 1:
            raise ConfigError("--solvers takes at most one --config")
        file = args.config[0] if args.config else None
        names = [s.strip() for s in args.solvers.split(",") if s.strip()]
        configs = [runner.build_config(file, **{**base, "solver": s}) for s in names]
    else:
        configs = [runner.build_config(file, **base) for file in args.config]
    outcomes = runner.compare(configs)
    rows = runner.comparison_rows(outcomes)
    print(runner.format_table(rows))
    if args.table_csv:
        Path(args.table_csv).write_text(runner.comparison_csv(rows))
    return EXIT_SOLVER if any(o.status == "failed" for o in outcomes) else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("--") and argv[0] not in ("--help",):
        argv.insert(0, "run")
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return _cmd_run(args) if args.command == "run" else _cmd_compare(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
