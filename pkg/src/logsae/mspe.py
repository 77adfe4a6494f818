"""Resampling estimates of mean squared prediction error.

Both estimators start from the plug-in conditional-variance term and
correct it for parameter estimation.  The leave-one-out version applies
the classic bias-correction identity to the plug-in term and adds the
dispersion of the predictor across leave-one-out refits:

    m1_j[i] = M1_i - (m-1)/m * sum_j (M1_i - M1_i(-j))
    m2_j[i] = (m-1)/m * sum_j (pred_i - pred_i(-j))^2

where every (-j) quantity is evaluated at area i's own data with the
parameters refit without area j.  The parametric-bootstrap version draws
synthetic datasets from the fitted model, refits each, and combines

    2*M1_i - mean_b M1_i(params*_b)  +  mean_b (pred*_i,b - pred_i)^2

where the starred prediction and variance terms use the starred parameters
on the original data.  Bootstrap totals can come out negative; they are
flagged, never clipped.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import partial

import numpy as np

from . import _arrays, rng
from .errors import (
    InsufficientAreas,
    NumericalError,
    SingularMomentMatrix,
)
from .estimation import FitConfig, ModelFit
from .parallel import ordered_map, resolve_workers

__all__ = ["JackknifeMspe", "BootstrapMspe", "jackknife_mspe", "bootstrap_mspe"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class JackknifeMspe:
    """Leave-one-out MSPE estimate for one area.

    ``loo_nonconverged`` counts refits that hit the iteration cap; it is
    shared by all areas of one call.
    """

    area_id: str
    m1_j: float
    m2_j: float
    total: float
    loo_nonconverged: int


@dataclass(frozen=True)
class BootstrapMspe:
    """Parametric-bootstrap MSPE estimate for one area.

    ``b_replicates`` is the number of replicates actually used (failed
    refits are dropped).  ``negative`` flags a total below zero.
    """

    area_id: str
    m1_bias_corrected: float
    m2_star: float
    total: float
    b_replicates: int
    negative: bool


def _refit(arr, beta_init, max_iterations, rel_tolerance):
    # seam shared by the leave-one-out and bootstrap paths (and by tests)
    beta, sigma2, _, converged, _ = _arrays.fit_core(
        arr, max_iterations, rel_tolerance, beta_init
    )
    return beta, sigma2, converged


def _loo_task(j, arr, beta_init, max_iterations, rel_tolerance):
    try:
        return _refit(
            _arrays.drop_area(arr, j), beta_init, max_iterations, rel_tolerance
        )
    except SingularMomentMatrix as exc:
        raise SingularMomentMatrix(
            f"leave-one-out refit dropping area index {j} failed: {exc}"
        ) from exc


def jackknife_core(arr, beta, sigma2, max_iterations, rel_tolerance, n_workers=1):
    m, p = arr.m, arr.p
    if m < p + 2:
        raise InsufficientAreas(f"jackknife needs at least {p + 2} areas, got {m}")
    pred_full, m1_full, _ = _arrays.predictions_and_m1(arr, beta, sigma2)
    task = partial(
        _loo_task,
        arr=arr,
        beta_init=beta,
        max_iterations=max_iterations,
        rel_tolerance=rel_tolerance,
    )
    fits = ordered_map(task, range(m), n_workers)
    m1_loo = np.empty((m, m))
    pred_loo = np.empty((m, m))
    nonconverged = 0
    for j, (beta_j, sigma2_j, converged_j) in enumerate(fits):
        pred_j, m1_j, _ = _arrays.predictions_and_m1(arr, beta_j, sigma2_j)
        m1_loo[:, j] = m1_j
        pred_loo[:, j] = pred_j
        if not converged_j:
            nonconverged += 1
    factor = (m - 1.0) / m
    m1_corrected = m1_full - factor * np.sum(m1_full[:, None] - m1_loo, axis=1)
    m2 = factor * np.sum((pred_full[:, None] - pred_loo) ** 2, axis=1)
    return m1_corrected, m2, nonconverged


def jackknife_mspe(
    areas,
    full_fit: ModelFit,
    config: FitConfig | None = None,
    n_workers: int | None = None,
) -> list[JackknifeMspe]:
    """Leave-one-out MSPE estimates, one per area, in input order.

    Each refit is warm-started at the full-data parameters.  A singular
    leave-one-out system is an error identifying the offending area.
    """
    areas = list(areas)
    arr = _arrays.stack(areas)
    cfg = config if config is not None else FitConfig()
    workers = resolve_workers(n_workers)
    m1_j, m2_j, nonconverged = jackknife_core(
        arr,
        full_fit.params.beta,
        full_fit.params.sigma2_nu,
        cfg.max_iterations,
        cfg.rel_tolerance,
        n_workers=workers,
    )
    return [
        JackknifeMspe(
            area_id=a.area_id,
            m1_j=float(m1_j[i]),
            m2_j=float(m2_j[i]),
            total=float(m1_j[i] + m2_j[i]),
            loo_nonconverged=nonconverged,
        )
        for i, a in enumerate(areas)
    ]


def _psd_factors(sigma: np.ndarray) -> np.ndarray:
    """Per-area factor L with L L' = sigma_me, tolerating singular PSD."""
    out = np.zeros_like(sigma)
    for i in range(sigma.shape[0]):
        s = sigma[i]
        if not s.any():
            continue
        try:
            out[i] = np.linalg.cholesky(s)
        except np.linalg.LinAlgError:
            vals, vecs = np.linalg.eigh(s)
            out[i] = vecs * np.sqrt(np.clip(vals, 0.0, None))
    return out


def _draw_starred(arr, factors, beta, sigma2, seed, r):
    """Synthetic dataset for replicate r.

    Per area, in fixed row order: covariate noise (p draws), area effect,
    sampling error.  The observed covariate stands in for the latent one
    as the center of the starred covariate draw.
    """
    gen = rng.stream(seed, rng.BOOTSTRAP, r)
    std = gen.standard_normal((arr.m, arr.p + 2))
    w_star = arr.w + np.einsum("ipq,iq->ip", factors, std[:, : arr.p])
    nu_star = math.sqrt(sigma2) * std[:, arr.p]
    e_star = np.sqrt(arr.psi) * std[:, arr.p + 1]
    z_star = w_star @ beta + nu_star + e_star
    return z_star, w_star


def _bootstrap_task(r, arr, factors, beta, sigma2, seed, max_iterations, rel_tolerance):
    z_star, w_star = _draw_starred(arr, factors, beta, sigma2, seed, r)
    starred = _arrays.build(z_star, w_star, arr.psi, arr.sigma)
    try:
        beta_star, sigma2_star, _ = _refit(
            starred, beta, max_iterations, rel_tolerance
        )
        # starred parameters, original data
        pred_star, m1_star, _ = _arrays.predictions_and_m1(arr, beta_star, sigma2_star)
    except NumericalError:
        return None
    return m1_star, pred_star


def bootstrap_core(
    arr, beta, sigma2, b, seed, max_iterations, rel_tolerance, n_workers=1
):
    m, p = arr.m, arr.p
    if m <= p:
        raise InsufficientAreas(f"need at least {p + 1} areas to refit, got {m}")
    if b < 2:
        raise ValueError(f"b must be >= 2, got {b}")
    rng.check_seed(seed)
    pred_full, m1_full, _ = _arrays.predictions_and_m1(arr, beta, sigma2)
    factors = _psd_factors(arr.sigma)
    task = partial(
        _bootstrap_task,
        arr=arr,
        factors=factors,
        beta=beta,
        sigma2=sigma2,
        seed=seed,
        max_iterations=max_iterations,
        rel_tolerance=rel_tolerance,
    )
    results = ordered_map(task, range(b), n_workers)
    sum_m1 = np.zeros(m)
    sum_sq = np.zeros(m)
    used = 0
    for res in results:  # replicate order: a deterministic reduction
        if res is None:
            continue
        m1_star, pred_star = res
        sum_m1 += m1_star
        sum_sq += (pred_star - pred_full) ** 2
        used += 1
    if used == 0:
        raise SingularMomentMatrix(f"all {b} bootstrap replicates failed to refit")
    dropped = b - used
    if dropped:
        logger.warning(
            "dropped %d of %d bootstrap replicates (%.1f%% failure rate)",
            dropped,
            b,
            100.0 * dropped / b,
        )
    m1_bias_corrected = 2.0 * m1_full - sum_m1 / used
    m2_star = sum_sq / used
    return m1_bias_corrected, m2_star, used


def bootstrap_mspe(
    areas,
    full_fit: ModelFit,
    b: int,
    seed: int,
    config: FitConfig | None = None,
    n_workers: int | None = None,
) -> list[BootstrapMspe]:
    """Parametric-bootstrap MSPE estimates, one per area, in input order.

    Replicate draws are keyed by ``(seed, replicate)`` so output is
    bit-reproducible for any worker count.  Replicates whose refit fails
    are dropped and counted; the failure rate is logged.
    """
    areas = list(areas)
    arr = _arrays.stack(areas)
    cfg = config if config is not None else FitConfig()
    workers = resolve_workers(n_workers)
    m1_bc, m2_star, used = bootstrap_core(
        arr,
        full_fit.params.beta,
        full_fit.params.sigma2_nu,
        b,
        seed,
        cfg.max_iterations,
        cfg.rel_tolerance,
        n_workers=workers,
    )
    totals = m1_bc + m2_star
    return [
        BootstrapMspe(
            area_id=a.area_id,
            m1_bias_corrected=float(m1_bc[i]),
            m2_star=float(m2_star[i]),
            total=float(totals[i]),
            b_replicates=used,
            negative=bool(totals[i] < 0.0),
        )
        for i, a in enumerate(areas)
    ]
