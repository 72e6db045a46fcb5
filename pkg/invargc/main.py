"""
Command-line entry point

    invargc generate  --config <path> --out <dir> --seed <u64>
    invargc fit       --data <dir> --mode <linear|nonlinear> [--lambda-z f] [--alpha f]
                      [--lambda-w f] [--latents u] [--max-iters u] [--tol f] --out <path> --seed <u64>
    invargc eval      --model <path> --truth <path> --out <path>
    invargc benchmark --config <path> --seeds <u> --methods <csv> --out-md <path> --out-json <path>
    invargc ablate    --config <path> --seeds <u> --out-md <path> --out-json <path>
    invargc check
"""

import argparse
import sys
from typing import List, Optional

from invargc import __version__
from invargc.config import settings
from invargc.routes import commands
from invargc.utils.constants import FitMode, Method
from invargc.utils.error_handler import handle_cli_exception
from invargc.utils.logger import logger


def u64(value: str) -> int:
    """argparse type for unsigned 64-bit seeds"""
    try:
        number = int(value, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{value}' is not an integer")
    if not 0 <= number < 2 ** 64:
        raise argparse.ArgumentTypeError(f"{number} is outside [0, 2^64)")
    return number


def positive_int(value: str) -> int:
    number = u64(value)
    if number < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return number


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.PROJECT_NAME,
        description="Invariant Granger causal discovery under latent confounding and unknown interventions",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a synthetic multi-environment benchmark")
    gen.add_argument("--config", required=True, help="GenConfig JSON")
    gen.add_argument("--out", required=True, help="output dataset directory")
    gen.add_argument("--seed", type=u64, default=None, help="overrides the config seed")
    gen.set_defaults(handler=lambda a: commands.cmd_generate(a.config, a.out, a.seed))

    fit = sub.add_parser("fit", help="fit the linear or nonlinear model")
    fit.add_argument("--data", required=True, help="dataset directory")
    fit.add_argument("--mode", required=True, choices=[m.value for m in FitMode])
    fit.add_argument("--lambda-z", type=float, default=None)
    fit.add_argument("--alpha", type=float, default=None)
    fit.add_argument("--lambda-w", type=float, default=None)
    fit.add_argument("--latents", type=u64, default=1)
    fit.add_argument("--max-iters", type=positive_int, default=None)
    fit.add_argument("--tol", type=float, default=None)
    fit.add_argument("--out", required=True, help="model.json path")
    fit.add_argument("--seed", type=u64, default=0)
    fit.set_defaults(handler=lambda a: commands.cmd_fit(
        a.data, a.mode, a.out, seed=a.seed, lambda_z=a.lambda_z, alpha=a.alpha,
        lambda_w=a.lambda_w, latents=a.latents, max_iters=a.max_iters, tol=a.tol,
    ))

    ev = sub.add_parser("eval", help="evaluate a fitted model against graph.json")
    ev.add_argument("--model", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--out", required=True, help="report.json path")
    ev.set_defaults(handler=lambda a: commands.cmd_eval(a.model, a.truth, a.out))

    bench = sub.add_parser("benchmark", help="run methods over seeds")
    bench.add_argument("--config", required=True)
    bench.add_argument("--seeds", type=positive_int, required=True)
    bench.add_argument(
        "--methods", default=",".join(m.value for m in Method),
        help="comma-separated subset of " + ", ".join(m.value for m in Method),
    )
    bench.add_argument("--out-md", required=True)
    bench.add_argument("--out-json", required=True)
    bench.set_defaults(handler=lambda a: commands.cmd_benchmark(a.config, a.seeds, a.methods, a.out_md, a.out_json))

    ablate = sub.add_parser("ablate", help="latent-module ablation of the linear model")
    ablate.add_argument("--config", required=True)
    ablate.add_argument("--seeds", type=positive_int, required=True)
    ablate.add_argument("--out-md", required=True)
    ablate.add_argument("--out-json", required=True)
    ablate.set_defaults(handler=lambda a: commands.cmd_ablate(a.config, a.seeds, a.out_md, a.out_json))

    check = sub.add_parser("check", help="run the numerical self-test battery")
    check.set_defaults(handler=lambda a: commands.cmd_check())

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch, and map failures to exit codes"""
    args = build_parser().parse_args(argv)
    logger.debug(f"Running command {args.command}")
    try:
        return int(args.handler(args))
    except Exception as exc:
        return handle_cli_exception(exc)


if __name__ == "__main__":
    sys.exit(main())
