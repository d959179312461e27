"""
Command-line interface of rarts.

    rarts quadratic [--config CONFIG] [--out DIR] [overrides]
    rarts search    [--config CONFIG] [--out DIR] [overrides]
    rarts retrain   [--config CONFIG] [--out DIR] [overrides]
    rarts sweep     [--config CONFIG] [--out DIR] [overrides]
    rarts plot      TRAJECTORY_CSV --out SVG [--config PLOT_SPEC]

Exit codes: 0 success, 2 invalid configuration, 3 divergence, 1 any other
failure.
"""
import argparse
import logging
import os
import sys

from . import __version__
from .core import ConfigError, DivergenceError
from .examples import default_config
from .experiments import RUNNERS, ExperimentConfig
from .io import read_json
from .plot import emit_plot

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_DIVERGENCE = 0, 1, 2, 3

# flag destination -> (section, key) of the config
_OVERRIDES = {
    "lam": ("hyper_params", "lambda"),
    "beta": ("hyper_params", "beta"),
    "lr_w": ("hyper_params", "eta_w"),
    "lr_y": ("hyper_params", "eta_y"),
    "lr_alpha": ("hyper_params", "eta_alpha"),
    "xi": ("hyper_params", "xi"),
    "steps": ("stop", "max_steps"),
    "solver": (None, "solver"),
    "log_every": (None, "log_every"),
    "out": (None, "out"),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rarts",
        description="Relaxed architecture search and its baselines.")
    parser.add_argument("--version", action="version", version=f"rarts {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for kind in ("quadratic", "search", "retrain", "sweep"):
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", help="JSON experiment configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="run only this seed")
        p.add_argument("--solver", help="rarts, darts1, darts2 or milenas")
        p.add_argument("--lambda", dest="lam", type=float, help="weight λ of L_train")
        p.add_argument("--beta", type=float, help="penalty β")
        p.add_argument("--lr-w", dest="lr_w", type=float, help="learning rate of w")
        p.add_argument("--lr-y", dest="lr_y", type=float, help="learning rate of y")
        p.add_argument("--lr-alpha", dest="lr_alpha", type=float,
                       help="learning rate of alpha")
        p.add_argument("--xi", type=float, help="virtual step of second order DARTS")
        p.add_argument("--steps", type=int, help="maximal number of steps")
        p.add_argument("--log-every", dest="log_every", type=int,
                       help="log every n-th step")
        p.add_argument("-v", "--verbose", action="count", default=0,
                       help="-v for INFO, -vv for DEBUG messages")

    p = sub.add_parser("plot", help="phase plot of a quadratic trajectory CSV")
    p.add_argument("csv", help="trajectory CSV")
    p.add_argument("--out", required=True, help="SVG file to write")
    p.add_argument("--config", help="JSON plot options (equilibrium, title)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def config_from_args(args):
    """Build the `ExperimentConfig` of a run subcommand."""
    if args.config:
        try:
            data = read_json(args.config)
        except (OSError, ValueError) as e:
            raise ConfigError(f"Cannot read the configuration `{args.config}`: {e}")
        if not isinstance(data, dict):
            raise ConfigError("The configuration must be a JSON object.")
        base_dir = os.path.dirname(os.path.abspath(args.config))
    else:
        data, base_dir = default_config(args.command).to_dict(), "."
    data = dict(data)
    data.setdefault("kind", args.command)
    if data["kind"] != args.command:
        raise ConfigError(f"The configuration is of kind `{data['kind']}`, "
                          f"not `{args.command}`.")

    for dest, (section, key) in _OVERRIDES.items():
        value = getattr(args, dest)
        if value is None:
            continue
        if section is None:
            data[key] = value
        else:
            data[section] = dict(data.get(section, {}), **{key: value})
    if args.seed is not None:
        data["seeds"] = [args.seed]
    return ExperimentConfig.from_dict(data, base_dir)


def _configure_logging(verbosity):
    level = logging.WARNING if verbosity == 0 else \
        logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s %(message)s")


def main(argv=None):
    """Entry point; returns the exit code."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        if args.command == "plot":
            spec = read_json(args.config) if args.config else None
            emit_plot(args.csv, args.out, spec)
        else:
            config = config_from_args(args)
            RUNNERS[config.kind](config)
    except ConfigError as e:
        print(f"rarts: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as e:
        print(f"rarts: divergence: {e}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except Exception as e:
        logger.debug("failure", exc_info=True)
        print(f"rarts: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK
