"""Command-line interface.

Three subcommands cover the workflow end to end:

``suffcast forecast DATA.csv``
    Recursive out-of-sample evaluation of one forecasting method on a CSV
    panel, with a diagnostic report: in/out-of-sample R2, the chosen
    numbers of factors, slices, and indices, the eigenvalues of the sliced
    covariance, the index directions in factor and predictor space, and
    every per-period forecast.

``suffcast factors DATA.csv``
    Factor extraction only: eigenvalue spectrum, the factor series, and
    the loadings, with the factor count chosen by the eigenvalue-ratio
    rule unless fixed with ``--factors``.

``suffcast simulate --dgp linear``
    Replication studies on synthetic panels: medians and spreads of
    forecast accuracy, factor-recovery, or direction-recovery metrics
    over seeded replications.

Reports are deterministic plain text (see ``suffcast.report``); ``--out``
writes the report plus one CSV per table, otherwise the text goes to
stdout.  Exit codes: 0 success, 2 configuration error, 3 input-data
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from contextlib import contextmanager
from dataclasses import dataclass, fields

import numpy as np

from .exceptions import (
    ConfigError,
    DataQualityError,
    NumericalError,
    SuffcastError,
)
from .factors import eigenvalue_spectrum, estimate_factors, select_num_factors
from .forecast import (
    _SF_METHODS,
    PipelineConfig,
    _make_source,
    _resolve_num_indices,
    evaluate_methods,
)
from .io import load_covariates_csv, load_panel_csv, save_panel_csv
from .panel import center_panel
from .projection import build_sieve_basis, project_panel
from .replicate import run_replications
from .report import Report, render_report, write_report
from .simulate import SimConfig, generate
from .sir import assign_slices, sdr_directions, sliced_covariance_factors

__all__ = ["RunConfig", "main"]

_FORECAST_METHODS = ("pcr", "pc1", "sf1", "sf2", "sfi")
_SIMULATE_METHODS = _FORECAST_METHODS + ("pcri",)
_DGP_METHODS = {
    "linear": ("pcr", "pc1", "sf1"),
    "interaction": ("sfi", "pcr", "pcri"),
    "semiparametric": ("sf1", "sfi"),
    "null": ("pcr", "sf1"),
}
_METRIC_FAMILIES = ("forecast", "correlations", "directions")


@dataclass(frozen=True)
class RunConfig:
    """Resolved options of one CLI run, echoed verbatim into the report."""

    subcommand: str
    input_path: str | None = None
    covariates_path: str | None = None
    out_path: str | None = None
    target: str = "y"
    method: str = "sf1"
    methods: tuple = ()
    num_factors: object = "auto"  # "auto" or int
    num_slices: int = 10
    num_indices: object = None  # None, "auto", or int
    bandwidth_multiplier: float = 1.0
    train_fraction: float = 0.5
    seed: int = 0
    reps: int = 1
    dgp: str | None = None
    num_series: int | None = None
    num_periods: int | None = None
    metrics: tuple = ()
    factor_source: str = "estimated"
    panel_out: str | None = None

    def echo(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            out[f.name] = value
        return out

    def pipeline(self, method: str) -> PipelineConfig:
        return PipelineConfig(
            method=method,
            num_factors=None if self.num_factors == "auto" else self.num_factors,
            num_slices=self.num_slices,
            num_indices=self.num_indices,
            bandwidth_multiplier=self.bandwidth_multiplier,
            train_fraction=self.train_fraction,
        )


@contextmanager
def _stage(name: str):
    """Tag any pipeline error with the stage it came from."""
    try:
        yield
    except np.linalg.LinAlgError as err:
        raise NumericalError(f"during {name}: {err}") from err
    except SuffcastError as err:
        raise type(err)(f"during {name}: {err}") from err


def _int_or_auto(text: str):
    if text.lower() == "auto":
        return "auto"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected an integer or 'auto', got {text!r}"
        ) from None


def _comma_tuple(text: str) -> tuple:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _period_column(labels, num_periods: int) -> list:
    return list(labels) if labels is not None else [str(t) for t in range(num_periods)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="suffcast",
        description="Factor-based sufficient forecasting for large predictor panels.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, methods):
        p.add_argument(
            "--factors", type=_int_or_auto, default="auto", metavar="K",
            help="number of factors, or 'auto' for the eigenvalue-ratio rule "
            "(default: auto)",
        )
        p.add_argument(
            "--slices", type=int, default=10, metavar="H",
            help="response slices for the inverse-regression step (default: 10)",
        )
        p.add_argument(
            "--indices", type=_int_or_auto, default=None, metavar="L",
            help="predictive indices, or 'auto' for the sequential test "
            "(default: the method minimum)",
        )
        p.add_argument(
            "--method", choices=methods, default=None,
            help="forecasting method (default: sf1)",
        )
        p.add_argument(
            "--bandwidth-mult", type=float, default=1.0, metavar="C",
            help="scale the rule-of-thumb bandwidths of sf2 (default: 1)",
        )
        p.add_argument(
            "--train-frac", type=float, default=0.5, metavar="F",
            help="fraction of the sample before the first forecast (default: 0.5)",
        )
        p.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
        p.add_argument("--out", metavar="PATH", help="write the report here, plus "
                       "one CSV per table; default prints to stdout")

    fc = sub.add_parser(
        "forecast", help="recursive out-of-sample evaluation on a CSV panel"
    )
    fc.add_argument("input", help="panel CSV: header row, optional time-label "
                    "column, predictors, and a target column")
    fc.add_argument("--target", default="y", metavar="NAME",
                    help="target column name (default: y)")
    fc.add_argument("--covariates", metavar="PATH",
                    help="per-series covariate CSV enabling the projected "
                    "factor step")
    add_common(fc, _FORECAST_METHODS)

    fa = sub.add_parser("factors", help="factor extraction and diagnostics only")
    fa.add_argument("input", help="panel CSV (same format as forecast)")
    fa.add_argument("--target", default="y", metavar="NAME",
                    help="target column name (default: y)")
    fa.add_argument("--covariates", metavar="PATH",
                    help="per-series covariate CSV enabling the projected "
                    "factor step")
    fa.add_argument(
        "--factors", type=_int_or_auto, default="auto", metavar="K",
        help="number of factors, or 'auto' (default: auto)",
    )
    fa.add_argument("--seed", type=int, default=0, help=argparse.SUPPRESS)
    fa.add_argument("--out", metavar="PATH", help="write the report here, plus "
                    "one CSV per table; default prints to stdout")

    sm = sub.add_parser(
        "simulate", help="replication studies on synthetic panels"
    )
    sm.add_argument("--dgp", required=True,
                    choices=("linear", "interaction", "semiparametric", "null"),
                    help="data-generating process")
    sm.add_argument("--p", type=int, default=100, metavar="P",
                    help="predictor series per panel (default: 100)")
    sm.add_argument("--T", type=int, default=200, metavar="T",
                    help="periods per panel (default: 200)")
    sm.add_argument("--reps", type=int, default=1, metavar="R",
                    help="replications (default: 1)")
    sm.add_argument("--methods", type=_comma_tuple, default=None, metavar="M1,M2",
                    help="comma-separated methods; default depends on the dgp")
    sm.add_argument("--metrics", type=_comma_tuple, default=("forecast",),
                    metavar="FAM1,FAM2",
                    help="metric families: forecast, correlations, directions "
                    "(default: forecast)")
    sm.add_argument("--factor-source", choices=("estimated", "projected", "known"),
                    default="estimated",
                    help="feed the pipeline estimated, covariate-projected, or "
                    "true factors (default: estimated)")
    sm.add_argument("--panel-out", metavar="PATH",
                    help="also write the first replication's panel as CSV")
    add_common(sm, _SIMULATE_METHODS)

    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    common = dict(
        subcommand=args.subcommand,
        out_path=args.out,
        num_factors=args.factors,
        seed=args.seed,
    )
    if args.subcommand == "factors":
        return RunConfig(
            input_path=args.input,
            covariates_path=args.covariates,
            target=args.target,
            method="none",
            **common,
        )
    common.update(
        num_slices=args.slices,
        num_indices=args.indices,
        bandwidth_multiplier=args.bandwidth_mult,
        train_fraction=args.train_frac,
        method=args.method if args.method is not None else "sf1",
    )
    if args.subcommand == "forecast":
        return RunConfig(
            input_path=args.input,
            covariates_path=args.covariates,
            target=args.target,
            **common,
        )
    # Study methods: --methods wins, then an explicit --method narrows the
    # study to that one, and otherwise each process has a sensible default
    # comparison set.
    if args.methods is not None:
        methods = args.methods
    elif args.method is not None:
        methods = (args.method,)
    else:
        methods = _DGP_METHODS[args.dgp]
    common["method"] = methods[0]
    return RunConfig(
        methods=tuple(methods),
        reps=args.reps,
        dgp=args.dgp,
        num_series=args.p,
        num_periods=args.T,
        metrics=tuple(args.metrics),
        factor_source=args.factor_source,
        panel_out=args.panel_out,
        **common,
    )


def _load_inputs(rc: RunConfig):
    with _stage("loading input"):
        panel, labels = load_panel_csv(rc.input_path, target=rc.target, min_periods=20)
        covariates = (
            load_covariates_csv(rc.covariates_path)
            if rc.covariates_path is not None
            else None
        )
    return panel, labels, covariates


def _spectrum_length(panel) -> int:
    n = min(panel.num_series, panel.num_periods)
    return min(max(1, min(20, n // 2)) + 1, n)


def _run_forecast(rc: RunConfig) -> Report:
    panel, labels, covariates = _load_inputs(rc)
    with _stage("validating options"):
        config = rc.pipeline(rc.method)
    with _stage("forecasting"):
        result = evaluate_methods(
            panel, (rc.method,), config, covariates=covariates
        )[rc.method]
    with _stage("computing diagnostics"):
        T = panel.num_periods
        source = _make_source(panel, config, covariates, None)
        fit, _ = source.window_fit(T)
        slices = assign_slices(panel.target, config.num_slices)
        cov = sliced_covariance_factors(fit, slices)
        eigs = np.linalg.eigvalsh(cov.matrix)[::-1]
        if rc.method in _SF_METHODS:
            L = _resolve_num_indices(config, rc.method, cov, T)
        else:
            L = 1
        basis = sdr_directions(cov, fit, L)

    report = Report(config=rc.echo())
    report.summary = {
        "num_series": panel.num_series,
        "num_periods": T,
        "split_index": result.split_index,
        "r2_in": result.r2_in,
        "r2_oos": result.r2_oos,
        "chosen_num_factors": fit.num_factors,
        "num_slices": config.num_slices,
        "chosen_num_indices": L,
        "failed_steps": result.num_failures,
    }
    report.add_table(
        "sigma_eigenvalues",
        ["rank", "eigenvalue"],
        [[i + 1, v] for i, v in enumerate(eigs)],
    )
    dir_cols = [f"dir_{j + 1}" for j in range(L)]
    report.add_table(
        "factor_directions",
        ["factor", *dir_cols],
        [[i + 1, *row] for i, row in enumerate(basis.directions)],
    )
    names = panel.names or tuple(f"x{i + 1}" for i in range(panel.num_series))
    report.add_table(
        "predictor_directions",
        ["series", *dir_cols],
        [[names[i], *row] for i, row in enumerate(basis.predictor_directions)],
    )
    periods = _period_column(labels, T)
    split = result.split_index
    report.add_table(
        "forecasts",
        ["position", "period", "actual", "forecast"],
        [
            [split + i, periods[split + i], panel.target[split + i], f]
            for i, f in enumerate(result.forecasts)
        ],
    )
    return report


def _run_factors(rc: RunConfig) -> Report:
    panel, labels, covariates = _load_inputs(rc)
    with _stage("extracting factors"):
        work = center_panel(panel)
        if covariates is not None:
            work = project_panel(work, build_sieve_basis(covariates))
        if rc.num_factors == "auto":
            K = select_num_factors(work)
        else:
            K = rc.num_factors
        fit = estimate_factors(work, K)
        spectrum = eigenvalue_spectrum(work, _spectrum_length(work))

    report = Report(config=rc.echo())
    report.summary = {
        "num_series": panel.num_series,
        "num_periods": panel.num_periods,
        "chosen_num_factors": fit.num_factors,
        "selection": "ratio_rule" if rc.num_factors == "auto" else "fixed",
    }
    report.add_table(
        "eigenvalues",
        ["rank", "eigenvalue"],
        [[i + 1, v] for i, v in enumerate(spectrum)],
    )
    periods = _period_column(labels, panel.num_periods)
    factor_cols = [f"f_{j + 1}" for j in range(fit.num_factors)]
    report.add_table(
        "factors",
        ["position", "period", *factor_cols],
        [[t, periods[t], *row] for t, row in enumerate(fit.factors)],
    )
    names = panel.names or tuple(f"x{i + 1}" for i in range(panel.num_series))
    report.add_table(
        "loadings",
        ["series", *[f"b_{j + 1}" for j in range(fit.num_factors)]],
        [[names[i], *row] for i, row in enumerate(fit.loadings)],
    )
    return report


def _run_simulate(rc: RunConfig) -> Report:
    with _stage("validating options"):
        sim = SimConfig(
            dgp=rc.dgp,
            p=rc.num_series,
            T=rc.num_periods,
            seed=rc.seed,
            reps=rc.reps,
        )
        pipeline = rc.pipeline(rc.methods[0])
    with _stage("running replications"):
        summary = run_replications(
            sim,
            pipeline,
            methods=rc.methods,
            metrics=rc.metrics,
            factor_source=rc.factor_source,
        )
    if rc.panel_out is not None:
        with _stage("writing the example panel"):
            save_panel_csv(rc.panel_out, generate(sim, rep=0).panel)

    report = Report(config=rc.echo())
    report.summary = {
        "requested_reps": summary.num_reps,
        "successful_reps": len(summary.rep_indices),
        "failed_reps": summary.num_failures,
    }
    report.add_table(
        "summary",
        ["metric", "median", "sd"],
        [
            [name, summary.medians[i], summary.sds[i]]
            for i, name in enumerate(summary.metrics)
        ],
    )
    report.add_table(
        "replications",
        ["rep", *summary.metrics],
        [
            [summary.rep_indices[r], *summary.values[r]]
            for r in range(summary.values.shape[0])
        ],
    )
    if summary.failure_messages:
        report.add_table(
            "failures",
            ["message"],
            [[m] for m in summary.failure_messages],
        )
    return report


_RUNNERS = {
    "forecast": _run_forecast,
    "factors": _run_factors,
    "simulate": _run_simulate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    rc = _run_config(args)
    try:
        report = _RUNNERS[rc.subcommand](rc)
        if rc.out_path is None:
            sys.stdout.write(render_report(report))
        else:
            for path in write_report(report, rc.out_path):
                print(f"wrote {path}")
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except DataQualityError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (NumericalError, SuffcastError, np.linalg.LinAlgError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
