"""Command line: ``elastopinn solve`` and ``elastopinn check``."""

from __future__ import annotations

import argparse
import logging
import sys

from .harness import RunConfig, TrainingDiverged, run
from .loss import LOSS_KINDS
from .problems import PROBLEM_NAMES

# config-file key -> RunConfig field
CONFIG_KEYS = {
    "problem": "problem",
    "loss": "loss",
    "seed": "seed",
    "max-iter": "max_iterations",
    "out": "out_dir",
    "hidden": "hidden_layers",
    "threads": "threads",
    "points": "points_per_axis",
    "grad-tol": "grad_tol",
    "log-every": "log_every",
}


def parse_hidden(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("hidden layer sizes must be positive")
    return sizes


def read_config_file(path: str) -> dict:
    """``key = value`` lines using the long flag names; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[CONFIG_KEYS[key]] = value
    return values


def _coerce(field: str, value):
    if value is None:
        return None
    if field == "hidden_layers":
        return parse_hidden(value) if isinstance(value, str) else tuple(value)
    if field in ("seed", "max_iterations", "threads", "points_per_axis", "log_every"):
        return int(value)
    if field == "grad_tol":
        return float(value)
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elastopinn", description=__doc__)
    parser.add_argument("-q", "--quiet", action="store_true", help="only print warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="train a PINN on a benchmark problem")
    solve.add_argument("--config", help="key = value file; flags override its entries")
    solve.add_argument("--problem", choices=PROBLEM_NAMES)
    solve.add_argument("--loss", choices=LOSS_KINDS)
    solve.add_argument("--seed", type=int)
    solve.add_argument("--max-iter", type=int, dest="max_iterations")
    solve.add_argument("--out", dest="out_dir")
    solve.add_argument("--hidden", type=parse_hidden, dest="hidden_layers")
    solve.add_argument("--threads", type=int)
    solve.add_argument("--points", type=int, dest="points_per_axis",
                       help="grid points per axis (default: the benchmark grid)")
    solve.add_argument("--grad-tol", type=float, dest="grad_tol")
    solve.add_argument("--log-every", type=int, dest="log_every")

    check = sub.add_parser("check", help="verify derivatives and analytic oracles")
    check.add_argument("--seeds", type=int, default=3)
    check.add_argument("--components", type=int, default=64,
                       help="parameter-gradient components compared per draw")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stdout)

    if args.command == "check":
        from .checks import run_checks
        results = run_checks(n_seeds=args.seeds, n_components=args.components)
        for r in results:
            print(r.line())
        return 0 if all(r.passed for r in results) else 1

    values = {}
    if args.config:
        try:
            values.update(read_config_file(args.config))
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
    for key in CONFIG_KEYS.values():
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if "problem" not in values:
        parser.error("--problem is required (on the command line or in --config)")
    try:
        config = RunConfig(**{k: _coerce(k, v) for k, v in values.items()})
    except (TypeError, ValueError) as exc:
        parser.error(str(exc))

    try:
        result = run(config)
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 1
    rep = result.report
    print(f"{rep.problem} / {rep.loss}: {rep.iterations} iterations ({rep.converged_by}), "
          f"loss {rep.final_loss:.6e}, {rep.wall_seconds:.2f} s")
    for name, value in rep.rms.items():
        if value is not None:
            print(f"  RMS {name:10s} {value:.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
