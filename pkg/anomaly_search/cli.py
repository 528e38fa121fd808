"""Command-line entry point: simulate, sweep, bound, thresholds, plot.

Exit codes: 0 on success, 2 on configuration or parameter errors, 3 on I/O errors.
"""
import argparse
import math
import sys
from typing import Optional, Sequence

import numpy as np
from pydantic import ValidationError

from anomaly_search import harness
from anomaly_search.bayes_baseline import (
    bayes_config_for,
    delta_u_star,
    lower_threshold_curve,
    optimal_thresholds,
    predicted_performance,
)
from anomaly_search.bounds import false_alarm_bound, sprt_error_rates
from anomaly_search.core_model import loss_gap
from anomaly_search.models import (
    DEFAULT_C_CONST,
    BayesConfig,
    BoundParams,
    ExperimentSpec,
    StreamPopulation,
)
from anomaly_search.reporting import emit_csv, emit_plot, read_csv
from anomaly_search.settings import ConfigError, load_settings, load_spec
from anomaly_search.utils import configure_logging, console, err_console, key_value_table, summary_table

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def _override(spec: ExperimentSpec, **changes) -> ExperimentSpec:
    """Apply CLI overrides and re-validate."""
    data = spec.model_dump(by_alias=True)
    data.update({k: v for k, v in changes.items() if v is not None})
    return ExperimentSpec.model_validate(data)


def _run_and_report(spec: ExperimentSpec, args: argparse.Namespace) -> int:
    rows = harness.run_experiment(spec, workers=args.threads)
    console.print(summary_table(rows, title=spec.name))
    if args.out:
        emit_csv(rows, args.out)
    if args.plot:
        emit_plot(rows, args.plot)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    spec = load_spec(args.config)
    # a cap written in the config wins over the environment default
    cap = None if "sample_cap" in spec.model_fields_set else load_settings()["sample_cap"]
    spec = _override(spec, trials=args.trials, seed=args.seed, sample_cap=cap)
    return _run_and_report(spec, args)


def cmd_sweep(args: argparse.Namespace) -> int:
    spec = harness.preset(args.preset)
    b_grid = None
    given = [v is not None for v in (args.b_min, args.b_max)]
    if any(given):
        if not all(given):
            raise ValueError("--b-min and --b-max go together")
        if args.b_steps < 1:
            raise ValueError(f"--b-steps must be >= 1, got {args.b_steps}")
        b_grid = [float(b) for b in np.linspace(args.b_min, args.b_max, args.b_steps)]
    spec = _override(
        spec,
        b_grid=b_grid,
        trials=args.trials,
        seed=args.seed,
        sample_cap=load_settings()["sample_cap"],
    )
    return _run_and_report(spec, args)


def cmd_bound(args: argparse.Namespace) -> int:
    delta = args.delta
    if delta is None:
        if args.mu is None:
            raise ValueError("give --delta or --mu (Delta then defaults to the loss gap of mu)")
        delta = loss_gap(args.mu)
    params = BoundParams(K=args.K, lam=args.lam, Delta=delta, b=args.b, C_const=args.c_const)

    if args.alpha is not None and args.beta is not None:
        alpha, beta = args.alpha, args.beta
        source = "given"
    elif args.mc_trials:
        if args.mu is None:
            raise ValueError("--mc-trials needs --mu for the channel law")
        rates = sprt_error_rates(args.b, args.mu, args.mc_trials, np.random.default_rng(args.seed))
        alpha, beta = rates.alpha, rates.beta
        source = f"Monte Carlo ({args.mc_trials} trials)"
        if alpha == 0:
            raise ValueError("no false positives observed; raise --mc-trials or lower --b")
    else:
        raise ValueError("give --alpha and --beta, or --mc-trials with --mu")

    result = false_alarm_bound(alpha, beta, params)
    console.print(key_value_table(
        [
            ("alpha", alpha),
            ("beta", beta),
            ("rates", source),
            ("Delta", delta),
            ("C", params.C_const),
            ("terms", result.terms),
            ("remainder", result.remainder),
            ("P_FA bound", result.value),
        ],
        title="False-alarm bound",
    ))
    return EXIT_OK


def cmd_thresholds(args: argparse.Namespace) -> int:
    population = StreamPopulation(pi_hat=args.pi, eps=args.eps, scale_is_variance=not args.std_reading)
    base = bayes_config_for(population)
    overrides = {k: v for k, v in (("D01", args.d01), ("D10", args.d10)) if v is not None}
    lambda_bars = args.lambda_bar or [0.0]
    cfg = BayesConfig(**{**base.model_dump(), **overrides, "lambda_bar": lambda_bars[0]})

    d_U = delta_u_star(cfg.pi_hat, cfg.eps)
    pairs: list[tuple[str, object]] = [
        ("D(f1||f0)", cfg.D10),
        ("D(f0||f1)", cfg.D01),
        ("delta_U*", d_U),
        ("gamma_U*", math.log(d_U)),
    ]
    for lam in lambda_bars:
        thresholds = optimal_thresholds(cfg.model_copy(update={"lambda_bar": lam}))
        pairs += [(f"gamma_L* (lambda_bar={lam:g})", thresholds.gamma_L)]
        if thresholds.delta_L < 1:
            prediction = predicted_performance(cfg.model_copy(update={"lambda_bar": lam}), thresholds)
            pairs += [
                (f"E[streams] (lambda_bar={lam:g})", prediction.expected_streams),
                (f"E[tau] (lambda_bar={lam:g})", prediction.expected_tau),
            ]
    console.print(key_value_table(pairs, title="Optimal thresholds"))
    if len(lambda_bars) > 1:
        curve = lower_threshold_curve(cfg, lambda_bars)
        console.print(key_value_table([(f"{lam:g}", g) for lam, g in curve], title="gamma_L* vs lambda_bar"))
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    emit_plot(read_csv(args.input), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anomaly-search", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_options(p: argparse.ArgumentParser) -> None:
        p.add_argument("--trials", type=int, help="trials per (policy, b) cell")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--threads", type=int, help="worker processes (default from ANOMALY_SEARCH_THREADS)")
        p.add_argument("--out", help="summary CSV path")
        p.add_argument("--plot", help="plot path (SVG)")

    p = sub.add_parser("simulate", help="run an experiment from a JSON configuration")
    p.add_argument("--config", required=True)
    run_options(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a preset over a threshold grid")
    p.add_argument("--preset", required=True, choices=["hard", "easy", "companion"])
    p.add_argument("--b-min", type=float)
    p.add_argument("--b-max", type=float)
    p.add_argument("--b-steps", type=int, default=5)
    run_options(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bound", help="evaluate the false-alarm upper bound")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--delta", type=float, help="loss gap; defaults to the gap implied by --mu")
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--c-const", type=float, default=DEFAULT_C_CONST)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--mc-trials", type=int)
    p.add_argument("--mu", type=float, help="channel mean, for Monte Carlo stage rates")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("thresholds", help="optimal thresholds of the Bayesian search")
    p.add_argument("--pi", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--lambda-bar", type=float, action="append", help="repeat for a sweep")
    p.add_argument("--d01", type=float, help="D(f0||f1); default from the Gaussian stream laws")
    p.add_argument("--d10", type=float, help="D(f1||f0); default from the Gaussian stream laws")
    p.add_argument("--std-reading", action="store_true", help="read the F0 scale 1.5 as a standard deviation")
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("plot", help="plot a summary CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging("DEBUG" if args.verbose else load_settings()["log_level"])
    try:
        return args.func(args)
    except (ConfigError, ValidationError, ValueError) as e:
        err_console.print(f"error: {e}", style="bold red", markup=False)
        return EXIT_CONFIG
    except OSError as e:
        err_console.print(f"I/O error: {e}", style="bold red", markup=False)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
