"""Model-based Monte-Carlo studies.

Four studies share one synthetic-population generator:

* accuracy (``run_emse_study``): empirical MSE of the direct estimator and
  three shrinkage variants that differ in covariate source and in whether
  the measurement-error covariance enters the fit;
* uncertainty (``run_mspe_study``): relative bias of the leave-one-out and
  parametric-bootstrap MSPE estimates against the empirical MSE;
* variance truncation (``zero_proportion_study``): how often the area-level
  variance moment truncates at zero, per fit variant;
* sensitivity (``misspecification_study``): effect of a wrong
  measurement-error variance on the regression coefficient.

Replicate r of a study is a pure function of (config, r): all draws come
from streams keyed by (seed, purpose, r), so every study is
bit-reproducible at any worker count.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import _arrays, rng
from .errors import NumericalError
from .estimation import FitConfig
from .model import AreaObservation
from .mspe import bootstrap_core, jackknife_core
from .parallel import ordered_map, resolve_workers

__all__ = [
    "SyntheticArea",
    "SimulationConfig",
    "SimulationReport",
    "generate_population",
    "run_emse_study",
    "run_mspe_study",
    "zero_proportion_study",
    "misspecification_study",
    "EMSE_ESTIMATORS",
]

EMSE_ESTIMATORS = ("direct", "eb_true_covariate", "eb_sigma_ignored", "eb_full")

DEFAULT_M_GRID = (20, 50, 100, 500)
DEFAULT_K_GRID = (0.0, 20.0, 50.0, 80.0, 100.0)


@dataclass(frozen=True)
class SyntheticArea:
    """One generated area: latent truth plus the observable record."""

    W: np.ndarray
    theta: float
    Y: float
    obs: AreaObservation


@dataclass(frozen=True)
class SimulationConfig:
    """Generator and study sizes.

    Defaults reproduce the standard design: one covariate drawn
    Normal(mean 5, variance 9), sampling variances Gamma(shape 4.5,
    scale 2), coefficient 3, area variance 2, and a fraction ``k_percent``
    of areas measured with error variance ``d``.
    """

    m: int = 20
    k_percent: float = 0.0
    d: float = 2.0
    beta_true: tuple[float, ...] = (3.0,)
    sigma2_nu_true: float = 2.0
    r_replications: int = 1000
    b_bootstrap: int = 1000
    seed: int = 1
    covariate_mean: float = 5.0
    covariate_var: float = 9.0
    psi_shape: float = 4.5
    psi_scale: float = 2.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not 0.0 <= self.k_percent <= 100.0:
            raise ValueError("k_percent must lie in [0, 100]")
        if self.d < 0.0:
            raise ValueError("d must be >= 0")
        if len(self.beta_true) == 0:
            raise ValueError("beta_true must be non-empty")
        if self.sigma2_nu_true < 0.0:
            raise ValueError("sigma2_nu_true must be >= 0")
        if self.r_replications < 1:
            raise ValueError("r_replications must be >= 1")
        if self.b_bootstrap < 2:
            raise ValueError("b_bootstrap must be >= 2")
        rng.check_seed(self.seed)
        if self.covariate_var <= 0.0 or self.psi_shape <= 0.0 or self.psi_scale <= 0.0:
            raise ValueError("covariate_var, psi_shape, psi_scale must be > 0")

    @property
    def p(self) -> int:
        return len(self.beta_true)

    @property
    def n_measured_with_error(self) -> int:
        return round(self.k_percent * self.m / 100.0)


def _draw_population(config: SimulationConfig, replicate: int):
    """Arrays (W, theta, z, w, psi, sigma) for one replicate.

    Draw order per replicate is fixed: covariate, sampling variances,
    error-subset selection, covariate noise, area effects, sampling
    errors.  Areas not in the error subset get an exactly observed
    covariate (w == W bit for bit) and an all-zero covariance.
    """
    gen = rng.stream(config.seed, rng.GENERATE, replicate)
    m, p = config.m, config.p
    W = config.covariate_mean + math.sqrt(config.covariate_var) * gen.standard_normal(
        (m, p)
    )
    psi = gen.gamma(config.psi_shape, config.psi_scale, size=m)
    me_idx = gen.choice(m, size=config.n_measured_with_error, replace=False)
    scale = np.zeros(m)
    scale[me_idx] = math.sqrt(config.d)
    eta = scale[:, None] * gen.standard_normal((m, p))
    nu = math.sqrt(config.sigma2_nu_true) * gen.standard_normal(m)
    e = np.sqrt(psi) * gen.standard_normal(m)
    beta = np.asarray(config.beta_true, dtype=float)
    theta = W @ beta + nu
    z = theta + e
    w = W + eta
    sigma = np.zeros((m, p, p))
    sigma[me_idx] = config.d * np.eye(p)
    return W, theta, z, w, psi, sigma, me_idx


def generate_population(config: SimulationConfig, replicate: int) -> list[SyntheticArea]:
    """Deterministic synthetic population for (config.seed, replicate)."""
    W, theta, z, w, psi, sigma, _ = _draw_population(config, replicate)
    Y = _arrays.exp_checked(theta)
    return [
        SyntheticArea(
            W=W[i],
            theta=float(theta[i]),
            Y=float(Y[i]),
            obs=AreaObservation(
                area_id=f"area_{i + 1}",
                z=float(z[i]),
                w=w[i],
                psi=float(psi[i]),
                sigma_me=sigma[i],
            ),
        )
        for i in range(config.m)
    ]


@dataclass
class SimulationReport:
    """Study output: named row tables plus a scalar summary.

    ``wall_clock_seconds`` is the only non-deterministic field; the JSON
    form (`to_json_dict`) excludes it so that equal-seed runs serialize
    identically.
    """

    study: str
    config: SimulationConfig
    r_completed: int
    r_failed: int
    wall_clock_seconds: float
    tables: dict[str, list[dict]] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.config.seed

    def to_json_dict(self) -> dict:
        config = dataclasses.asdict(self.config)
        config["beta_true"] = list(config["beta_true"])
        return {
            "study": self.study,
            "config": config,
            "seed": self.seed,
            "r_completed": self.r_completed,
            "r_failed": self.r_failed,
            "summary": self.summary,
            "tables": self.tables,
        }


def _log_abs(x: float) -> float:
    return math.log(abs(x)) if x != 0.0 else float("-inf")


def _fit_args(fit_config: FitConfig | None) -> tuple[int, float]:
    cfg = fit_config if fit_config is not None else FitConfig()
    return cfg.max_iterations, cfg.rel_tolerance


# ---------------------------------------------------------------- accuracy


def _emse_replicate(replicate, config, max_iterations, rel_tolerance):
    try:
        W, theta, z, w, psi, sigma, _ = _draw_population(config, replicate)
        Y = _arrays.exp_checked(theta)
        zero_sigma = np.zeros_like(sigma)
        variants = {
            "eb_true_covariate": _arrays.build(z, W, psi, zero_sigma),
            "eb_sigma_ignored": _arrays.build(z, w, psi, zero_sigma),
            "eb_full": _arrays.build(z, w, psi, sigma),
        }
        preds = {"direct": _arrays.exp_checked(z)}
        for name, arr in variants.items():
            beta, sigma2, _, _, _ = _arrays.fit_core(
                arr, max_iterations, rel_tolerance
            )
            preds[name], _, _ = _arrays.predictions_and_m1(arr, beta, sigma2)
        pred_matrix = np.stack([preds[name] for name in EMSE_ESTIMATORS])
        sq_err = (pred_matrix - Y) ** 2
    except NumericalError:
        return None
    return sq_err, pred_matrix


def run_emse_study(
    config: SimulationConfig,
    fit_config: FitConfig | None = None,
    n_workers: int | None = None,
) -> SimulationReport:
    """Empirical MSE of the four estimators over R replicates.

    Emits per-area empirical MSEs and, averaged over areas, both raw and
    log-rescaled MSEs and mean predictions.  Replicates where any fit or
    prediction fails numerically are dropped and counted.
    """
    t0 = time.perf_counter()
    max_iterations, rel_tolerance = _fit_args(fit_config)
    workers = resolve_workers(n_workers)
    task = partial(
        _emse_replicate,
        config=config,
        max_iterations=max_iterations,
        rel_tolerance=rel_tolerance,
    )
    results = ordered_map(task, range(config.r_replications), workers)
    n_est = len(EMSE_ESTIMATORS)
    sq_sum = np.zeros((n_est, config.m))
    pred_sum = np.zeros((n_est, config.m))
    completed = 0
    for res in results:
        if res is None:
            continue
        sq_err, pred_matrix = res
        sq_sum += sq_err
        pred_sum += pred_matrix
        completed += 1
    failed = config.r_replications - completed
    if completed == 0:
        raise NumericalError("every replicate failed; no study output")
    emse = sq_sum / completed  # (n_est, m)
    mean_pred = pred_sum / completed
    per_area = [
        {
            "area": i + 1,
            **{f"emse_{name}": float(emse[k, i]) for k, name in enumerate(EMSE_ESTIMATORS)},
        }
        for i in range(config.m)
    ]
    emse_avg = {name: float(emse[k].mean()) for k, name in enumerate(EMSE_ESTIMATORS)}
    pred_avg = {
        name: float(mean_pred[k].mean()) for k, name in enumerate(EMSE_ESTIMATORS)
    }
    summary = {
        "estimators": list(EMSE_ESTIMATORS),
        "emse_avg_raw": emse_avg,
        "emse_avg_log": {name: math.log(v) for name, v in emse_avg.items()},
        "mean_prediction_raw": pred_avg,
        "mean_prediction_log": {name: math.log(v) for name, v in pred_avg.items()},
    }
    return SimulationReport(
        study="emse",
        config=config,
        r_completed=completed,
        r_failed=failed,
        wall_clock_seconds=time.perf_counter() - t0,
        tables={"per_area": per_area},
        summary=summary,
    )


# -------------------------------------------------------------- uncertainty


def _mspe_replicate(replicate, config, max_iterations, rel_tolerance):
    try:
        W, theta, z, w, psi, sigma, _ = _draw_population(config, replicate)
        Y = _arrays.exp_checked(theta)
        arr = _arrays.build(z, w, psi, sigma)
        beta, sigma2, _, _, _ = _arrays.fit_core(arr, max_iterations, rel_tolerance)
        pred, _, _ = _arrays.predictions_and_m1(arr, beta, sigma2)
        sq_err = (pred - Y) ** 2
        jk_m1, jk_m2, _ = jackknife_core(
            arr, beta, sigma2, max_iterations, rel_tolerance
        )
        jk_total = jk_m1 + jk_m2
        boot_seed = rng.derive_seed(config.seed, replicate)
        bt_m1, bt_m2, _ = bootstrap_core(
            arr,
            beta,
            sigma2,
            config.b_bootstrap,
            boot_seed,
            max_iterations,
            rel_tolerance,
        )
        bt_total = bt_m1 + bt_m2
    except NumericalError:
        return None
    return sq_err, jk_total, bt_total


def run_mspe_study(
    config: SimulationConfig,
    fit_config: FitConfig | None = None,
    n_workers: int | None = None,
) -> SimulationReport:
    """Relative bias of both MSPE estimators against the empirical MSE.

    Per area i the study reports EMSE_i (mean squared prediction error
    over replicates), the replicate means of each MSPE estimate, and their
    relative biases (mean - EMSE_i) / EMSE_i; the summary averages the
    relative biases over areas.  A per-replicate table of area-averaged
    values backs distributional plots.
    """
    t0 = time.perf_counter()
    max_iterations, rel_tolerance = _fit_args(fit_config)
    workers = resolve_workers(n_workers)
    task = partial(
        _mspe_replicate,
        config=config,
        max_iterations=max_iterations,
        rel_tolerance=rel_tolerance,
    )
    results = ordered_map(task, range(config.r_replications), workers)
    m = config.m
    sq_sum = np.zeros(m)
    jk_sum = np.zeros(m)
    bt_sum = np.zeros(m)
    bt_neg = np.zeros(m)
    replicate_rows = []
    completed = 0
    for r, res in enumerate(results):
        if res is None:
            continue
        sq_err, jk_total, bt_total = res
        sq_sum += sq_err
        jk_sum += jk_total
        bt_sum += bt_total
        bt_neg += bt_total < 0.0
        replicate_rows.append(
            {
                "replicate": r,
                "sq_error_area_mean": float(sq_err.mean()),
                "mspe_jackknife_area_mean": float(jk_total.mean()),
                "mspe_bootstrap_area_mean": float(bt_total.mean()),
            }
        )
        completed += 1
    failed = config.r_replications - completed
    if completed == 0:
        raise NumericalError("every replicate failed; no study output")
    emse = sq_sum / completed
    jk_mean = jk_sum / completed
    bt_mean = bt_sum / completed
    rb_jk = (jk_mean - emse) / emse
    rb_bt = (bt_mean - emse) / emse
    per_area = []
    for i in range(m):
        per_area.append(
            {
                "area": i + 1,
                "emse": float(emse[i]),
                "emse_log": _log_abs(float(emse[i])),
                "mspe_jackknife_mean": float(jk_mean[i]),
                "mspe_jackknife_mean_log_abs": _log_abs(float(jk_mean[i])),
                "mspe_jackknife_mean_negative": bool(jk_mean[i] < 0.0),
                "mspe_bootstrap_mean": float(bt_mean[i]),
                "mspe_bootstrap_mean_log_abs": _log_abs(float(bt_mean[i])),
                "mspe_bootstrap_mean_negative": bool(bt_mean[i] < 0.0),
                "rb_jackknife": float(rb_jk[i]),
                "rb_bootstrap": float(rb_bt[i]),
                "bootstrap_negative_share": float(bt_neg[i] / completed),
            }
        )
    rb_jk_avg = float(rb_jk.mean())
    rb_bt_avg = float(rb_bt.mean())
    summary = {
        "emse_area_avg": float(emse.mean()),
        "mspe_jackknife_area_avg": float(jk_mean.mean()),
        "mspe_bootstrap_area_avg": float(bt_mean.mean()),
        "rb_jackknife_avg": rb_jk_avg,
        "rb_jackknife_avg_log_abs_pct": _log_abs(100.0 * rb_jk_avg),
        "rb_jackknife_avg_negative": rb_jk_avg < 0.0,
        "rb_bootstrap_avg": rb_bt_avg,
        "rb_bootstrap_avg_log_abs_pct": _log_abs(100.0 * rb_bt_avg),
        "rb_bootstrap_avg_negative": rb_bt_avg < 0.0,
        "bootstrap_negative_share_avg": float((bt_neg / completed).mean()),
    }
    return SimulationReport(
        study="mspe",
        config=config,
        r_completed=completed,
        r_failed=failed,
        wall_clock_seconds=time.perf_counter() - t0,
        tables={"per_area": per_area, "replicates": replicate_rows},
        summary=summary,
    )


# ---------------------------------------------------------- zero proportion


def _zeros_replicate(replicate, config, max_iterations, rel_tolerance):
    try:
        W, theta, z, w, psi, sigma, _ = _draw_population(config, replicate)
        zero_sigma = np.zeros_like(sigma)
        flags = []
        for arr in (
            _arrays.build(z, w, psi, sigma),
            _arrays.build(z, w, psi, zero_sigma),
            _arrays.build(z, W, psi, zero_sigma),
        ):
            _, _, _, _, truncated = _arrays.fit_core(
                arr, max_iterations, rel_tolerance
            )
            flags.append(truncated)
    except NumericalError:
        return None
    return tuple(flags)


def zero_proportion_study(
    config: SimulationConfig,
    m_values=DEFAULT_M_GRID,
    k_values=DEFAULT_K_GRID,
    fit_config: FitConfig | None = None,
    n_workers: int | None = None,
) -> SimulationReport:
    """Share of replicates whose variance moment truncates at zero.

    One row per (m, k) cell with the truncation share for the
    error-aware fit, the fit that ignores the error covariance, and the
    fit on the exactly observed covariate.
    """
    t0 = time.perf_counter()
    max_iterations, rel_tolerance = _fit_args(fit_config)
    workers = resolve_workers(n_workers)
    rows = []
    total_completed = 0
    total_failed = 0
    for m in m_values:
        for k in k_values:
            cell = dataclasses.replace(config, m=int(m), k_percent=float(k))
            task = partial(
                _zeros_replicate,
                config=cell,
                max_iterations=max_iterations,
                rel_tolerance=rel_tolerance,
            )
            results = ordered_map(task, range(cell.r_replications), workers)
            counts = np.zeros(3)
            completed = 0
            for res in results:
                if res is None:
                    continue
                counts += res
                completed += 1
            failed = cell.r_replications - completed
            total_completed += completed
            total_failed += failed
            if completed == 0:
                raise NumericalError(f"every replicate failed at m={m}, k={k}")
            rows.append(
                {
                    "m": int(m),
                    "k_percent": float(k),
                    "zero_sigma_aware": float(counts[0] / completed),
                    "zero_sigma_ignored": float(counts[1] / completed),
                    "zero_true_covariate": float(counts[2] / completed),
                    "r_completed": completed,
                    "r_failed": failed,
                }
            )
    return SimulationReport(
        study="zeros",
        config=config,
        r_completed=total_completed,
        r_failed=total_failed,
        wall_clock_seconds=time.perf_counter() - t0,
        tables={"proportions": rows},
        summary={
            "m_values": [int(m) for m in m_values],
            "k_values": [float(k) for k in k_values],
        },
    )


# ------------------------------------------------------------- sensitivity


def _misspec_replicate(replicate, config, d_mis, max_iterations, rel_tolerance):
    try:
        W, theta, z, w, psi, sigma, me_idx = _draw_population(config, replicate)
        sigma_mis = np.zeros_like(sigma)
        sigma_mis[me_idx] = float(d_mis) * np.eye(config.p)
        arr_true = _arrays.build(z, w, psi, sigma)
        arr_mis = _arrays.build(z, w, psi, sigma_mis)
        beta_true_d, _, _, _, _ = _arrays.fit_core(
            arr_true, max_iterations, rel_tolerance
        )
        beta_mis_d, _, _, _, _ = _arrays.fit_core(
            arr_mis, max_iterations, rel_tolerance
        )
    except NumericalError:
        return None
    return float(beta_true_d[0]), float(beta_mis_d[0])


def misspecification_study(
    config: SimulationConfig,
    d_true: float,
    d_mis: float,
    k_values=None,
    fit_config: FitConfig | None = None,
    n_workers: int | None = None,
) -> SimulationReport:
    """Coefficient sensitivity to a wrong measurement-error variance.

    Data are generated with ``d_true``; the same data are fit twice, once
    with the correct per-area covariances and once with ``d_mis`` swapped
    in for the error-measured subset.  Per k the study reports
    ``100 * mean |beta_hat - beta_hat_mis|`` and both coefficients' biases
    (also scaled by 100).  Defined for a single covariate.
    """
    if config.p != 1:
        raise ValueError("misspecification_study supports a single covariate only")
    if d_true < 0.0 or d_mis < 0.0:
        raise ValueError("d_true and d_mis must be >= 0")
    t0 = time.perf_counter()
    max_iterations, rel_tolerance = _fit_args(fit_config)
    workers = resolve_workers(n_workers)
    if k_values is None:
        k_values = [config.k_percent]
    beta_target = config.beta_true[0]
    rows = []
    total_completed = 0
    total_failed = 0
    for k in k_values:
        cell = dataclasses.replace(config, d=float(d_true), k_percent=float(k))
        task = partial(
            _misspec_replicate,
            config=cell,
            d_mis=float(d_mis),
            max_iterations=max_iterations,
            rel_tolerance=rel_tolerance,
        )
        results = ordered_map(task, range(cell.r_replications), workers)
        diffs = []
        bias_true = []
        bias_mis = []
        for res in results:
            if res is None:
                continue
            bt, bm = res
            diffs.append(abs(bt - bm))
            bias_true.append(bt - beta_target)
            bias_mis.append(bm - beta_target)
        completed = len(diffs)
        failed = cell.r_replications - completed
        total_completed += completed
        total_failed += failed
        if completed == 0:
            raise NumericalError(f"every replicate failed at k={k}")
        rows.append(
            {
                "k_percent": float(k),
                "mean_abs_diff_x100": float(100.0 * np.mean(diffs)),
                "bias_true_d_x100": float(100.0 * np.mean(bias_true)),
                "bias_mis_d_x100": float(100.0 * np.mean(bias_mis)),
                "r_completed": completed,
                "r_failed": failed,
            }
        )
    return SimulationReport(
        study="misspec",
        config=config,
        r_completed=total_completed,
        r_failed=total_failed,
        wall_clock_seconds=time.perf_counter() - t0,
        tables={"sensitivity": rows},
        summary={"d_true": float(d_true), "d_mis": float(d_mis)},
    )
