"""The ``progression`` command.

Every subcommand reads an optional run config (``--config``, YAML or TOML)
whose values are overridden by explicit flags. Failures print a JSON error
object to standard error and exit with the error's ``exit_code``.
"""

from . import __version__
from .cohorts import load_cohort, save_cohort
from .config import RunConfig
from .errors import ArgumentError, ProgressionError
from .evaluation import (
    MODEL_KINDS,
    compare_models,
    comparison_table,
    format_table,
    missing_data_sweep,
    sweep_table,
)
from .models import (
    FittedModel,
    event_timeline,
    fit,
    fit_cthmm,
    fit_mixtures,
    load_model,
    predict_cohort,
    save_model,
    stage_cohort,
)
from .synth import GroundTruth, default_ground_truth, recovery_report, sample_cohort

import pandas as pd

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

logger = logging.getLogger(__name__)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError("expected comma separated numbers: %s" % e)


def _names(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_arg_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run config file (.yaml, .yml or .toml).")
    common.add_argument("--seed", type=int, help="Seed of all randomness.")
    common.add_argument(
        "--threads",
        type=int,
        help=(
            "Worker threads (default: the config value, or all cores without a "
            "config)."
        ),
    )
    common.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Log level of messages on standard error (default: WARNING).",
    )

    parser = argparse.ArgumentParser(
        prog="progression",
        description="Event-based hidden Markov models of disease progression.",
    )
    parser.add_argument(
        "--version", action="version", version="%(prog)s " + __version__
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    p = subparsers.add_parser("fit", parents=[common], help="Fit a model to a cohort.")
    p.add_argument("--cohort", help="Cohort file (.csv, .json, .zarr, .h5).")
    p.add_argument("--out", help="Model JSON to write.")
    p.add_argument("--model-type", choices=MODEL_KINDS, default="ebhmm")
    p.add_argument("--base-interval", type=float, dest="base_interval_months")
    p.add_argument("--band-width", type=int)
    p.add_argument("--max-outer-iter", type=int)
    p.add_argument("--restarts", type=int, dest="random_restarts")
    p.add_argument("--data-mode", choices=["full", "subset"])
    p.set_defaults(func=run_fit)

    p = subparsers.add_parser("stage", parents=[common], help="Stage every visit.")
    p.add_argument("--cohort")
    p.add_argument("--model")
    p.add_argument("--out", help="Staging CSV to write (default: standard output).")
    p.add_argument("--horizon", type=float, dest="prediction_horizon_months")
    p.set_defaults(func=run_stage)

    p = subparsers.add_parser(
        "predict", parents=[common], help="Predict stages after the last visit."
    )
    p.add_argument("--cohort")
    p.add_argument("--model")
    p.add_argument("--out", help="Prediction CSV to write (default: standard output).")
    p.add_argument("--horizon", type=float, dest="prediction_horizon_months")
    p.set_defaults(func=run_predict)

    p = subparsers.add_parser(
        "timeline", parents=[common], help="Expected event times of a fitted model."
    )
    p.add_argument("--model")
    p.add_argument(
        "--out",
        help="Timeline .csv or .json to write (default: CSV on standard output).",
    )
    p.set_defaults(func=run_timeline)

    p = subparsers.add_parser(
        "simulate", parents=[common], help="Sample a synthetic cohort."
    )
    p.add_argument(
        "--truth", help="Ground truth JSON (default: a generated ground truth)."
    )
    p.add_argument(
        "--events", type=int, default=6, help="Events of a generated ground truth."
    )
    p.add_argument("--separation", type=float, default=3.0)
    p.add_argument("--n", type=int, default=300, help="Number of individuals.")
    p.add_argument(
        "--schedule", type=_floats, default=[0.0, 12.0, 24.0], help="Visit months."
    )
    p.add_argument(
        "--missing", type=float, default=0.0, help="Fraction of missing values."
    )
    p.add_argument("--out", help="Cohort file to write.")
    p.add_argument(
        "--truth-out", help="Ground truth JSON to write (default: next to --out)."
    )
    p.set_defaults(func=run_simulate)

    p = subparsers.add_parser(
        "evaluate",
        parents=[common],
        help="Cross-validated conversion AU-ROC per model.",
    )
    p.add_argument("--cohort")
    p.add_argument("--models", type=_names, default=list(MODEL_KINDS))
    p.add_argument(
        "--modes", type=_names, default=None, help="Data modes, e.g. full,subset."
    )
    p.add_argument("--folds", type=int)
    p.add_argument("--horizon", type=float, dest="horizon_months")
    p.add_argument("--stratify", action="store_true", default=None)
    p.add_argument("--out", help="Report JSON to write.")
    p.set_defaults(func=run_evaluate)

    p = subparsers.add_parser(
        "ablate", parents=[common], help="Conversion AU-ROC with discarded values."
    )
    p.add_argument("--cohort")
    p.add_argument("--fractions", type=_floats, default=[0.0, 0.25, 0.5, 0.75])
    p.add_argument("--model-type", choices=MODEL_KINDS, default="ebhmm")
    p.add_argument("--folds", type=int)
    p.add_argument("--data-mode", choices=["full", "subset"])
    p.add_argument("--horizon", type=float, dest="horizon_months")
    p.add_argument("--out", help="Report JSON to write.")
    p.set_defaults(func=run_ablate)

    p = subparsers.add_parser(
        "recover", parents=[common], help="Compare a fitted model to a ground truth."
    )
    p.add_argument("--model")
    p.add_argument("--truth")
    p.add_argument("--out", help="Report JSON to write.")
    p.set_defaults(func=run_recover)

    return parser


OVERRIDES = (
    "seed",
    "threads",
    "base_interval_months",
    "band_width",
    "max_outer_iter",
    "random_restarts",
    "data_mode",
    "folds",
    "horizon_months",
    "prediction_horizon_months",
    "stratify",
)


def load_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        config = RunConfig.from_file(args.config)
    else:
        config = RunConfig(threads=os.cpu_count() or 1)
    config = config.with_overrides(
        **{name: getattr(args, name) for name in OVERRIDES if hasattr(args, name)}
    )
    return config.with_paths(
        cohort=getattr(args, "cohort", None),
        model=getattr(args, "model", None),
        truth=getattr(args, "truth", None),
        out=getattr(args, "out", None),
    )


def _run_info(config: RunConfig) -> dict:
    return {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "version": __version__,
    }


def _require(path: Optional[str], what: str) -> str:
    if path is None:
        raise ArgumentError(
            "no %s given, use --%s or set paths.%s in the config" % (what, what, what)
        )
    return path


def _load_cohort(config: RunConfig, model_kind: Optional[str] = None):
    cohort = load_cohort(
        _require(config.paths.cohort, "cohort"),
        feature_directions=dict(config.feature_directions) or None,
    )
    if config.data_mode_for(model_kind) == "subset":
        cohort = cohort.complete_subset()
    return cohort


def _write_json(d: dict, path: Optional[str]) -> None:
    text = json.dumps(d, indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        with open(path, "w") as f:
            f.write(text + "\n")


def _write_csv(table: pd.DataFrame, path: Optional[str], config: RunConfig) -> None:
    header = "# config_hash=%s seed=%d\n" % (config.config_hash(), config.seed)
    if path is None:
        sys.stdout.write(header + table.to_csv(index=False))
    else:
        with open(path, "w") as f:
            f.write(header)
            table.to_csv(f, index=False)


def run_fit(args, config: RunConfig) -> None:
    cohort = _load_cohort(config, args.model_type)
    out = _require(config.paths.out, "out")

    if args.model_type == "ebhmm":
        mixtures = fit_mixtures(
            cohort,
            patient_label=config.patient_label,
            control_label=config.control_label,
            config=config.mixture,
            threads=config.threads,
        )
        model = fit(
            cohort, mixtures, config.fit_config(), patient_label=config.patient_label
        )
        print("sequence: %s" % " < ".join(model.sequence.names(model.feature_names)))
        print("log-likelihood: %.6f" % model.diagnostics.log_likelihood)
    else:
        model = fit_cthmm(
            cohort,
            config=config.cthmm_config(),
            patient_label=config.patient_label,
            control_label=config.control_label,
        )
        print("log-likelihood: %.6f" % model.diagnostics.log_likelihood)

    save_model(model, out, run=_run_info(config))


def run_stage(args, config: RunConfig) -> None:
    model = load_model(_require(config.paths.model, "model"))
    cohort = _load_cohort(config)
    _write_csv(
        stage_cohort(cohort, model, config.prediction_horizon_months),
        config.paths.out,
        config,
    )


def run_predict(args, config: RunConfig) -> None:
    model = load_model(_require(config.paths.model, "model"))
    cohort = _load_cohort(config)
    _write_csv(
        predict_cohort(cohort, model, config.prediction_horizon_months),
        config.paths.out,
        config,
    )


def run_timeline(args, config: RunConfig) -> None:
    model = load_model(_require(config.paths.model, "model"))
    if not isinstance(model, FittedModel):
        raise ArgumentError(
            "timelines need an event-based model, got %s" % model.model_type
        )

    timeline = event_timeline(model.transition, model.sequence, model.feature_names)
    out = config.paths.out
    if out is not None and out.endswith(".json"):
        timeline.write_json(out, extra={"run": _run_info(config)})
    else:
        _write_csv(timeline.to_frame(), out, config)
    if out is not None:
        print("total span: %.1f years" % timeline.total_span_years)


def run_simulate(args, config: RunConfig) -> None:
    out = _require(config.paths.out, "out")
    if config.paths.truth is not None:
        truth = GroundTruth.load(config.paths.truth)
    else:
        truth = default_ground_truth(args.events, args.separation, seed=config.seed)

    cohort = sample_cohort(truth, args.n, args.schedule, args.missing, config.seed)
    save_cohort(cohort, out, delete=True)

    truth_out = args.truth_out
    if truth_out is None:
        truth_out = str(Path(out).with_suffix("")) + ".truth.json"
    d = truth.to_dict()
    d["run"] = _run_info(config)
    _write_json(d, truth_out)
    print(
        "wrote %d individuals to %s and the ground truth to %s"
        % (len(cohort), out, truth_out)
    )


def run_evaluate(args, config: RunConfig) -> None:
    cohort = load_cohort(
        _require(config.paths.cohort, "cohort"),
        feature_directions=dict(config.feature_directions) or None,
    )
    modes = args.modes if args.modes is not None else [config.data_mode]
    results = compare_models(
        cohort,
        config.folds,
        config.seed,
        config,
        model_kinds=args.models,
        data_modes=modes,
    )
    print(format_table(comparison_table(results)))
    if config.paths.out is not None:
        _write_json(
            {"run": _run_info(config), "results": [r.to_dict() for r in results]},
            config.paths.out,
        )


def run_ablate(args, config: RunConfig) -> None:
    cohort = load_cohort(
        _require(config.paths.cohort, "cohort"),
        feature_directions=dict(config.feature_directions) or None,
    )
    rows = missing_data_sweep(
        cohort,
        args.fractions,
        config.folds,
        config.seed,
        config,
        model_kind=args.model_type,
    )
    print(format_table(sweep_table(rows)))
    if config.paths.out is not None:
        _write_json(
            {
                "run": _run_info(config),
                "model_kind": args.model_type,
                "data_mode": config.data_mode_for(args.model_type),
                "rows": [r.to_dict() for r in rows],
            },
            config.paths.out,
        )


def run_recover(args, config: RunConfig) -> None:
    model = load_model(_require(config.paths.model, "model"))
    if not isinstance(model, FittedModel):
        raise ArgumentError(
            "recovery needs an event-based model, got %s" % model.model_type
        )
    truth = GroundTruth.load(_require(config.paths.truth, "truth"))

    report = recovery_report(model, truth)
    print("kendall tau: %.3f" % report["kendall_tau"])
    print("max transition error: %.3f" % report["max_transition_error"])
    if config.paths.out is not None:
        report["run"] = _run_info(config)
        _write_json(report, config.paths.out)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_arg_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        config = load_config(args)
        logger.info("running %s with config %s", args.command, config.config_hash())
        args.func(args, config)
    except ProgressionError as e:
        logger.debug("%s failed", args.command, exc_info=True)
        print(json.dumps(e.to_dict(), sort_keys=True), file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("%s failed unexpectedly", args.command)
        print(
            json.dumps(
                {"error": type(e).__name__, "message": str(e), "exit_code": 1},
                sort_keys=True,
            ),
            file=sys.stderr,
        )
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
