"""
Command-line interface

    python -m app train --synthetic 500,3,0 --solver cg --mode warm --steps 100 --out trace.json
    python -m app bench --data pol.csv --target-col y --splits 10 --out bench.csv --format csv
    python -m app verify-bounds --trials 10000

Exit codes: 0 success, 2 invalid arguments, 3 numerical failure, 4 data or IO error.
"""

import argparse
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel, ValidationError

from app.core.config import load_config_file, settings
from app.core.errors import GPError, InvalidInputError
from app.core.logging import configure_logging
from app.gp.bounds import gradient_error_histogram, second_moment_grid
from app.gp.estimator import quadratic_cross_section
from app.gp.kernel import Hyperparameters, system_matrix
from app.harness.datasets import Dataset, resolve_dataset, split_standardize
from app.harness.experiments import config_grid, grid_search_sgd_lr, run_experiment, run_split
from app.harness.reports import FORMATS, emit_report
from app.models.bounds import BoundsSummary
from app.models.requests import DataSource, SyntheticSpec
from app.models.solver import SolverConfig, SolverKind
from app.models.training import ProbeDistribution, TrainConfig, TrainMode

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _int_list(text: str) -> List[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _float_list(text: str) -> List[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _solver_list(text: str) -> List[SolverKind]:
    return [SolverKind(part.strip()) for part in text.split(",") if part.strip()]


def _mode_list(text: str) -> List[TrainMode]:
    return [TrainMode(part.strip()) for part in text.split(",") if part.strip()]


def _distribution_list(text: str) -> List[ProbeDistribution]:
    return [ProbeDistribution(part.strip()) for part in text.split(",") if part.strip()]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value file; CLI flags override its values")
    parser.add_argument("--out", help="output path (stdout JSON when omitted)")
    parser.add_argument("--format", choices=FORMATS, default="json")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--log-level", default=None)


def _add_data(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("--data", help="CSV file with a header row")
    parser.add_argument("--target-col", help="name of the target column in --data")
    parser.add_argument("--synthetic", help="n,d,seed for a GP-prior dataset")
    parser.add_argument("--train-fraction", type=float, default=settings.DEFAULT_TRAIN_FRACTION)
    parser.set_defaults(data_required=required)


def _add_training(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--solver", choices=[kind.value for kind in SolverKind], default=None)
    parser.add_argument("--mode", choices=[mode.value for mode in TrainMode], default=None)
    parser.add_argument("--steps", type=int, default=None)
    parser.add_argument("--lr", type=float, default=None, help="Adam learning rate")
    parser.add_argument("--probes", type=int, default=None)
    parser.add_argument("--distribution", choices=[d.value for d in ProbeDistribution], default=None)
    parser.add_argument("--tol-mean", type=float, default=None)
    parser.add_argument("--tol-samples", type=float, default=None)
    parser.add_argument("--max-iterations", type=int, default=None)
    parser.add_argument("--block-size", type=int, default=None)
    parser.add_argument("--minibatch", type=int, default=None)
    parser.add_argument("--momentum", type=float, default=None)
    parser.add_argument("--sgd-lr", type=float, default=None)
    parser.add_argument("--init-value", type=float, default=None)
    parser.add_argument("--track-distance", action="store_true", default=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="warmstart-gp",
        description="Warm-started iterative marginal likelihood optimisation for GP regression",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    train = subparsers.add_parser("train", help="one iterative-solver training run")
    _add_common(train)
    _add_data(train)
    _add_training(train)
    train.add_argument("--split-seed", type=int, default=0)

    exact = subparsers.add_parser("exact", help="Cholesky-gradient reference run")
    _add_common(exact)
    _add_data(exact)
    _add_training(exact)
    exact.add_argument("--split-seed", type=int, default=0)

    bench = subparsers.add_parser("bench", help="paired warm/cold runs over solvers and splits")
    _add_common(bench)
    _add_data(bench)
    _add_training(bench)
    bench.add_argument("--solvers", type=_solver_list, default=[SolverKind.CG, SolverKind.AP, SolverKind.SGD])
    bench.add_argument(
        "--modes",
        type=_mode_list,
        default=[TrainMode.WARM_START_FIXED_PROBES, TrainMode.COLD_START_RESAMPLED],
    )
    bench.add_argument("--splits", type=int, default=settings.DEFAULT_SPLITS)
    bench.add_argument("--no-traces", action="store_true", default=False, help="omit per-step traces from JSON")

    bounds = subparsers.add_parser("verify-bounds", help="probe second-moment grid and gradient-error decay")
    _add_common(bounds)
    _add_data(bounds, required=False)
    bounds.add_argument("--n-values", type=_int_list, default=[1, 2, 8, 32, 64])
    bounds.add_argument("--s-values", type=_int_list, default=[1, 4, 16, 32])
    bounds.add_argument("--distributions", type=_distribution_list, default=[ProbeDistribution.GAUSSIAN, ProbeDistribution.RADEMACHER])
    bounds.add_argument("--trials", type=int, default=10_000)
    bounds.add_argument("--error-probes", type=_int_list, default=[4, 16, 64, 256, 1024])
    bounds.add_argument("--error-trials", type=int, default=50)

    grid = subparsers.add_parser("gridsearch-lr", help="choose the SGD learning rate")
    _add_common(grid)
    _add_data(grid)
    grid.add_argument("--lr-grid", type=_float_list, default=[0.1, 0.3, 1.0, 3.0, 10.0])
    grid.add_argument("--budget", type=int, default=500)
    grid.add_argument("--probes", type=int, default=16)
    grid.add_argument("--minibatch", type=int, default=None)
    grid.add_argument("--momentum", type=float, default=None)
    grid.add_argument("--split-seed", type=int, default=0)

    cross = subparsers.add_parser("cross-section", help="objective slice along the top two eigendirections of H")
    _add_common(cross)
    _add_data(cross)
    cross.add_argument("--init-value", type=float, default=1.0, help="constrained value of every hyperparameter")
    cross.add_argument("--grid-size", type=int, default=41)
    cross.add_argument("--radius", type=float, default=None, help="grid half-width; default fits the zero init")
    cross.add_argument("--split-seed", type=int, default=0)
    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def apply_config_file(parser: argparse.ArgumentParser, argv: Sequence[str], args: argparse.Namespace) -> argparse.Namespace:
    """Re-parse with the --config values installed as defaults"""
    values = load_config_file(args.config)
    sub = _subparser(parser, args.command)
    actions = {action.dest: action for action in sub._actions}
    unknown = sorted(set(values) - set(actions))
    if unknown:
        raise InvalidInputError(f"Unknown keys in {args.config}: {unknown}")

    defaults: Dict[str, Any] = {}
    for key, value in values.items():
        if isinstance(actions[key], argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = value  # argparse applies the action's type to string defaults
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def data_source(args: argparse.Namespace) -> Optional[DataSource]:
    if args.data and args.synthetic:
        raise InvalidInputError("Use either --data or --synthetic, not both")
    if args.data:
        return DataSource(path=args.data, target_col=args.target_col)
    if args.synthetic:
        try:
            return DataSource(synthetic=SyntheticSpec.parse(args.synthetic))
        except ValueError as e:
            raise InvalidInputError(f"Bad --synthetic value: {e}") from e
    if args.data_required:
        raise InvalidInputError("A dataset is required: pass --data with --target-col, or --synthetic n,d,seed")
    return None


def train_config(args: argparse.Namespace) -> TrainConfig:
    """TrainConfig from the flags that were actually given; pydantic fills the rest"""
    solver_fields = {
        "kind": args.solver,
        "tol_mean": args.tol_mean,
        "tol_samples": args.tol_samples,
        "max_iterations": args.max_iterations,
        "block_size": args.block_size,
        "minibatch_size": args.minibatch,
        "momentum": args.momentum,
        "learning_rate": args.sgd_lr,
        "seed": args.seed,
    }
    train_fields = {
        "steps": args.steps,
        "learning_rate": args.lr,
        "num_probes": args.probes,
        "probe_distribution": args.distribution,
        "mode": args.mode,
        "init_value": args.init_value,
        "seed": args.seed,
        "track_distance": args.track_distance or None,
    }
    solver = SolverConfig(**{k: v for k, v in solver_fields.items() if v is not None})
    return TrainConfig(solver=solver, **{k: v for k, v in train_fields.items() if v is not None})


def _standardized_split(args: argparse.Namespace) -> tuple[Dataset, Dataset]:
    ds = resolve_dataset(data_source(args))
    return split_standardize(ds, args.train_fraction, args.split_seed)


def _write(result: BaseModel, args: argparse.Namespace) -> None:
    if args.out:
        emit_report(result, args.out, args.format)
    elif args.format == "json":
        sys.stdout.write(result.model_dump_json(indent=2) + "\n")
    else:
        raise InvalidInputError("--format csv needs --out")


def cmd_train(args: argparse.Namespace) -> int:
    train_ds, test_ds = _standardized_split(args)
    trace = run_split(train_ds, test_ds, train_config(args), exact=args.command == "exact")
    logger.info(f"✅ test rmse={trace.test_rmse:.4f}, test llh={trace.test_llh:.4f}")
    _write(trace, args)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    ds = resolve_dataset(data_source(args))
    configs = config_grid(train_config(args), args.solvers, args.modes)
    result = run_experiment(
        ds,
        configs,
        splits=args.splits,
        train_fraction=args.train_fraction,
        seed=args.seed or 0,
        keep_traces=not args.no_traces,
    )
    _write(result, args)
    return EXIT_OK


def cmd_verify_bounds(args: argparse.Namespace) -> int:
    seed = args.seed or 0
    summary = BoundsSummary(second_moment=second_moment_grid(args.n_values, args.s_values, args.distributions, args.trials, seed))
    source = data_source(args)
    if source is not None:
        ds = resolve_dataset(source)
        train_ds, _ = split_standardize(ds, args.train_fraction, seed)
        summary.gradient_errors = gradient_error_histogram(
            train_ds.X,
            train_ds.y,
            Hyperparameters.initial(train_ds.d),
            s_values=args.error_probes,
            trials=args.error_trials,
            seed=seed,
        )
    _write(summary, args)
    if not summary.all_passed:
        failed = [f"n={r.n},s={r.s},{r.distribution.value}" for r in summary.second_moment if not r.passed]
        logger.error(f"❌ Cells outside 4 standard errors after retry: {failed}")
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_gridsearch(args: argparse.Namespace) -> int:
    train_ds, _ = _standardized_split(args)
    solver_fields = {"kind": SolverKind.SGD, "minibatch_size": args.minibatch, "momentum": args.momentum}
    solver = SolverConfig(**{k: v for k, v in solver_fields.items() if v is not None})
    result = grid_search_sgd_lr(
        train_ds, args.lr_grid, args.budget, num_probes=args.probes, solver=solver, seed=args.seed or 0
    )
    _write(result, args)
    return EXIT_OK


def cmd_cross_section(args: argparse.Namespace) -> int:
    train_ds, _ = _standardized_split(args)
    H = system_matrix(train_ds.X, Hyperparameters.initial(train_ds.d, args.init_value))
    section = quadratic_cross_section(
        H, train_ds.y, init=np.zeros(train_ds.n), grid_size=args.grid_size, radius=args.radius
    )
    logger.info(f"✅ Cross-section: eigenvalues {section.eigenvalues}, minimum {section.minimum:.4f}")
    _write(section, args)
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "exact": cmd_train,
    "bench": cmd_bench,
    "verify-bounds": cmd_verify_bounds,
    "gridsearch-lr": cmd_gridsearch,
    "cross-section": cmd_cross_section,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(level=args.log_level)

    try:
        if args.config:
            args = apply_config_file(parser, argv, args)
            configure_logging(level=args.log_level)
        return COMMANDS[args.command](args)
    except GPError as e:
        logger.error(f"❌ {e.label}: {e}")
        return e.exit_code
    except ValidationError as e:
        logger.error(f"❌ Invalid configuration: {e}")
        return EXIT_INVALID
    except (ValueError, KeyError) as e:
        logger.error(f"❌ Invalid argument: {e}")
        return EXIT_INVALID
    except OSError as e:
        logger.error(f"❌ {e}")
        return EXIT_IO
