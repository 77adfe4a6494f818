"""Command-line interface.

Subcommands: ``fit``, ``predict``, ``mspe``, ``simulate``.  Every run
writes its outputs plus a ``manifest.json`` into ``--out``.  Exit codes:
0 success, 2 usage, 3 data error, 4 numerical error; failures print a
single JSON line ``{"error": <class>, "message": ...}`` to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__, dataio, parallel, simulation
from .errors import DataError, NumericalError, ParseError
from .estimation import ModelFit, fit
from .model import ModelParams, eb_predict, m1_term, posterior_moments
from .mspe import bootstrap_mspe, jackknife_mspe


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _ensure_out(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _manifest(args, config: dict, seed, input_path, started_at, n_workers) -> dataio.RunManifest:
    return dataio.RunManifest(
        command=" ".join(args.argv),
        config=config,
        seed=seed,
        version=__version__,
        input_sha256=dataio.sha256_file(input_path) if input_path else None,
        started_at=started_at,
        finished_at=_utc_now(),
        n_workers=n_workers,
    )


def _fit_to_dict(model_fit: ModelFit, area_ids) -> dict:
    return {
        "beta": [float(b) for b in model_fit.params.beta],
        "sigma2_nu": float(model_fit.params.sigma2_nu),
        "gammas": [float(g) for g in model_fit.gammas],
        "area_ids": list(area_ids),
        "iterations_used": model_fit.iterations_used,
        "converged": model_fit.converged,
        "sigma2_truncated": model_fit.sigma2_truncated,
    }


def _load_params(path) -> ModelParams:
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read parameter file {path!r}: {exc}") from None
    try:
        beta = np.asarray([float(b) for b in payload["beta"]], dtype=float)
        sigma2 = float(payload["sigma2_nu"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(
            f"parameter file {path!r} must contain 'beta' (list) and "
            f"'sigma2_nu' (number): {exc}"
        ) from None
    return ModelParams(beta=beta, sigma2_nu=sigma2)


def cmd_fit(args) -> int:
    started = _utc_now()
    areas = dataio.load_dataset(args.dataset)
    model_fit = fit(areas)
    out = _ensure_out(args.out)
    dataio.write_json(
        _fit_to_dict(model_fit, [a.area_id for a in areas]),
        os.path.join(out, "fit.json"),
    )
    manifest = _manifest(
        args, {"dataset": args.dataset}, None, args.dataset, started, 1
    )
    dataio.write_manifest(manifest, os.path.join(out, "manifest.json"))
    return 0


def cmd_predict(args) -> int:
    started = _utc_now()
    areas = dataio.load_dataset(args.dataset)
    if args.params:
        params = _load_params(args.params)
        model_fit = None
    else:
        model_fit = fit(areas)
        params = model_fit.params
    rows = []
    for a in areas:
        moments = posterior_moments(a, params)
        rows.append(
            {
                "area_id": a.area_id,
                "prediction": eb_predict(a, params),
                "m1": m1_term(a, params),
                "gamma": moments.gamma,
            }
        )
    out = _ensure_out(args.out)
    dataio.write_csv(
        os.path.join(out, "predictions.csv"),
        ["area_id", "prediction", "m1", "gamma"],
        rows,
    )
    if model_fit is not None:
        dataio.write_json(
            _fit_to_dict(model_fit, [a.area_id for a in areas]),
            os.path.join(out, "fit.json"),
        )
    manifest = _manifest(
        args,
        {"dataset": args.dataset, "params": args.params},
        None,
        args.dataset,
        started,
        1,
    )
    dataio.write_manifest(manifest, os.path.join(out, "manifest.json"))
    return 0


def cmd_mspe(args) -> int:
    started = _utc_now()
    areas = dataio.load_dataset(args.dataset)
    workers = parallel.resolve_workers(args.workers)
    model_fit = fit(areas)
    out = _ensure_out(args.out)
    if args.method == "jackknife":
        results = jackknife_mspe(areas, model_fit, n_workers=workers)
        fieldnames = ["area_id", "m1_j", "m2_j", "mspe", "loo_nonconverged"]
        rows = [
            {
                "area_id": r.area_id,
                "m1_j": r.m1_j,
                "m2_j": r.m2_j,
                "mspe": r.total,
                "loo_nonconverged": r.loo_nonconverged,
            }
            for r in results
        ]
        seed = None
    else:
        results = bootstrap_mspe(
            areas, model_fit, b=args.b, seed=args.seed, n_workers=workers
        )
        fieldnames = [
            "area_id",
            "m1_bias_corrected",
            "m2_star",
            "mspe",
            "negative",
            "b_replicates",
        ]
        rows = [
            {
                "area_id": r.area_id,
                "m1_bias_corrected": r.m1_bias_corrected,
                "m2_star": r.m2_star,
                "mspe": r.total,
                "negative": r.negative,
                "b_replicates": r.b_replicates,
            }
            for r in results
        ]
        seed = args.seed
    dataio.write_csv(os.path.join(out, "mspe.csv"), fieldnames, rows)
    dataio.write_json(
        _fit_to_dict(model_fit, [a.area_id for a in areas]),
        os.path.join(out, "fit.json"),
    )
    config = {
        "dataset": args.dataset,
        "method": args.method,
        "b": args.b if args.method == "bootstrap" else None,
    }
    manifest = _manifest(args, config, seed, args.dataset, started, workers)
    dataio.write_manifest(manifest, os.path.join(out, "manifest.json"))
    return 0


def cmd_simulate(args) -> int:
    started = _utc_now()
    workers = parallel.resolve_workers(args.workers)
    config = simulation.SimulationConfig(
        m=args.m,
        k_percent=args.k,
        d=args.d,
        r_replications=args.r,
        b_bootstrap=args.b,
        seed=args.seed,
    )
    if args.study == "emse":
        report = simulation.run_emse_study(config, n_workers=workers)
    elif args.study == "mspe":
        report = simulation.run_mspe_study(config, n_workers=workers)
    elif args.study == "zeros":
        report = simulation.zero_proportion_study(
            config,
            m_values=tuple(args.m_values),
            k_values=tuple(args.k_values),
            n_workers=workers,
        )
    else:
        report = simulation.misspecification_study(
            config,
            d_true=args.d_true,
            d_mis=args.d_mis,
            k_values=args.k_values if args.k_values_given else None,
            n_workers=workers,
        )
    out = _ensure_out(args.out)
    dataio.write_json(report.to_json_dict(), os.path.join(out, "report.json"))
    for name, rows in report.tables.items():
        if rows:
            dataio.write_csv(
                os.path.join(out, f"{report.study}_{name}.csv"),
                list(rows[0].keys()),
                rows,
            )
    manifest = _manifest(
        args, dataclasses.asdict(config), config.seed, None, started, workers
    )
    dataio.write_manifest(manifest, os.path.join(out, "manifest.json"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logsae",
        description="Empirical-Bayes prediction for positive skewed area-level "
        "quantities under covariate measurement error.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_io(p):
        p.add_argument("dataset", help="input CSV (see README for the column layout)")
        p.add_argument("--out", default=".", help="output directory (default: .)")

    p_fit = sub.add_parser("fit", help="estimate model parameters from a dataset")
    add_common_io(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser("predict", help="per-area predictions and leading MSPE term")
    add_common_io(p_pred)
    p_pred.add_argument(
        "--params", default=None, help="reuse a fit.json instead of refitting"
    )
    p_pred.set_defaults(func=cmd_predict)

    p_mspe = sub.add_parser("mspe", help="per-area MSPE estimates")
    add_common_io(p_mspe)
    p_mspe.add_argument(
        "--method", choices=("jackknife", "bootstrap"), required=True
    )
    p_mspe.add_argument("--b", type=int, default=1000, help="bootstrap replicates")
    p_mspe.add_argument("--seed", type=int, default=1, help="bootstrap seed")
    p_mspe.add_argument("--workers", type=int, default=None)
    p_mspe.set_defaults(func=cmd_mspe)

    p_sim = sub.add_parser("simulate", help="run a Monte-Carlo study")
    p_sim.add_argument(
        "--study", choices=("emse", "mspe", "zeros", "misspec"), required=True
    )
    p_sim.add_argument("--m", type=int, default=20)
    p_sim.add_argument("--k", type=float, default=0.0, help="percent of areas with covariate error")
    p_sim.add_argument("--d", type=float, default=2.0, help="measurement-error variance")
    p_sim.add_argument("--r", type=int, default=1000, help="replications")
    p_sim.add_argument("--b", type=int, default=1000, help="bootstrap replicates per replication")
    p_sim.add_argument("--seed", type=int, default=1)
    p_sim.add_argument("--d-true", type=float, default=2.0, dest="d_true")
    p_sim.add_argument("--d-mis", type=float, default=4.0, dest="d_mis")
    p_sim.add_argument(
        "--m-values", type=int, nargs="+", default=list(simulation.DEFAULT_M_GRID),
        dest="m_values", help="area counts for the zeros study",
    )
    p_sim.add_argument(
        "--k-values", type=float, nargs="+", default=None,
        dest="k_values", help="k grid for the zeros/misspec studies",
    )
    p_sim.add_argument("--workers", type=int, default=None)
    p_sim.add_argument("--out", default=".", help="output directory (default: .)")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = ["logsae", *argv]
    if args.command == "simulate":
        args.k_values_given = args.k_values is not None
        if args.k_values is None:
            args.k_values = list(simulation.DEFAULT_K_GRID)
    try:
        return args.func(args)
    except ValueError as exc:
        _emit_error(exc)
        return 2
    except (DataError, OSError) as exc:
        _emit_error(exc)
        return 3
    except NumericalError as exc:
        _emit_error(exc)
        return 4


def _emit_error(exc: Exception) -> None:
    line = json.dumps(
        {"error": type(exc).__name__, "message": str(exc)}, sort_keys=True
    )
    print(line, file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
