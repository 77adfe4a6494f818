"""Stacked-array kernels shared by the fitting, uncertainty and simulation
code.  Internal: public modules validate `AreaObservation` lists once via
`stack` and then work on plain ndarrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateVariance,
    InsufficientAreas,
    PredictionOverflow,
    SingularMomentMatrix,
)

_EXP_MAX = 709.782712893384
_EXP_MIN = -744.4400719213812
_COND_LIMIT = 1.0 / np.finfo(float).eps


@dataclass(frozen=True)
class AreaArrays:
    z: np.ndarray  # (m,)
    w: np.ndarray  # (m, p)
    psi: np.ndarray  # (m,)
    sigma: np.ndarray  # (m, p, p)
    moment: np.ndarray  # (m, p, p): w w' - sigma, cached for the solver

    @property
    def m(self) -> int:
        return self.z.size

    @property
    def p(self) -> int:
        return self.w.shape[1]


def build(z, w, psi, sigma) -> AreaArrays:
    moment = w[:, :, None] * w[:, None, :] - sigma
    return AreaArrays(z=z, w=w, psi=psi, sigma=sigma, moment=moment)


def stack(areas) -> AreaArrays:
    areas = list(areas)
    if not areas:
        raise InsufficientAreas("no areas given")
    p = areas[0].p
    for a in areas:
        if a.p != p:
            raise ValueError(
                f"{a.area_id}: covariate length {a.p} differs from {p}"
            )
    z = np.array([a.z for a in areas], dtype=float)
    w = np.array([a.w for a in areas], dtype=float)
    psi = np.array([a.psi for a in areas], dtype=float)
    sigma = np.array([a.sigma_me for a in areas], dtype=float)
    return build(z, w, psi, sigma)


def drop_area(arr: AreaArrays, j: int) -> AreaArrays:
    return AreaArrays(
        z=np.delete(arr.z, j, axis=0),
        w=np.delete(arr.w, j, axis=0),
        psi=np.delete(arr.psi, j, axis=0),
        sigma=np.delete(arr.sigma, j, axis=0),
        moment=np.delete(arr.moment, j, axis=0),
    )


def quad_form(sigma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    # beta' sigma_i beta per area; clip tiny negative roundoff from PSD input
    return np.maximum(np.einsum("ipq,p,q->i", sigma, beta, beta), 0.0)


def weighted_solve(arr: AreaArrays, weights: np.ndarray) -> np.ndarray:
    a = np.einsum("i,ipq->pq", weights, arr.moment)
    rhs = arr.w.T @ (weights * arr.z)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(rhs))):
        raise SingularMomentMatrix("moment system has non-finite entries")
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] == 0.0 or s[0] / s[-1] > _COND_LIMIT:
        raise SingularMomentMatrix(
            f"weighted moment matrix is numerically singular "
            f"(smallest singular value {s[-1]:.3e})"
        )
    return np.linalg.solve(a, rhs)


def sigma2_moment(arr: AreaArrays, beta: np.ndarray) -> tuple[float, bool]:
    resid = arr.z - arr.w @ beta
    raw = float(resid @ resid) / arr.m - float(arr.psi.mean())
    if raw < 0.0:
        return 0.0, True
    return raw, False


def fit_core(
    arr: AreaArrays,
    max_iterations: int,
    rel_tolerance: float,
    beta_init=None,
) -> tuple[np.ndarray, float, int, bool, bool]:
    """Alternate the weighted regression solve and the variance moment.

    Returns (beta, sigma2, iterations, converged, truncated).  The weights
    for each sweep come from the previous full iterate; convergence is a
    relative step below `rel_tolerance` jointly over beta and sigma2.
    """
    m, p = arr.m, arr.p
    if m <= p:
        raise InsufficientAreas(f"need at least {p + 1} areas to fit, got {m}")
    if beta_init is None:
        beta = weighted_solve(arr, np.ones(m))
    else:
        beta = np.asarray(beta_init, dtype=float)
        if beta.shape != (p,):
            raise ValueError(f"beta_init must have shape ({p},)")
    sigma2, truncated = sigma2_moment(arr, beta)
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        den = quad_form(arr.sigma, beta) + sigma2 + arr.psi
        if not np.all(den > 0.0) or not np.all(np.isfinite(den)):
            raise SingularMomentMatrix(
                "area weight denominators must be positive and finite"
            )
        beta_new = weighted_solve(arr, 1.0 / den)
        sigma2_new, truncated = sigma2_moment(arr, beta_new)
        step = float(np.max(np.abs(beta_new - beta) / (1.0 + np.abs(beta_new))))
        step = max(step, abs(sigma2_new - sigma2) / (1.0 + abs(sigma2_new)))
        beta, sigma2 = beta_new, sigma2_new
        if step < rel_tolerance:
            converged = True
            break
    return beta, sigma2, iterations, converged, truncated


def gamma_vec(arr: AreaArrays, beta: np.ndarray, sigma2: float) -> np.ndarray:
    num = quad_form(arr.sigma, beta) + sigma2
    den = num + arr.psi
    if np.any(den <= 0.0):
        raise DegenerateVariance(
            "an area has beta'sigma_me beta + sigma2_nu + psi == 0"
        )
    return num / den


def exp_checked(x: np.ndarray) -> np.ndarray:
    hi = float(np.max(x))
    lo = float(np.min(x))
    if hi > _EXP_MAX or lo < _EXP_MIN:
        bad = hi if hi > _EXP_MAX else lo
        raise PredictionOverflow(
            f"exponent {bad:.6g} is outside the representable range"
        )
    return np.exp(x)


def log_expm1(a: np.ndarray) -> np.ndarray:
    # log(e^a - 1) for a > 0, stable at both ends
    out = np.empty_like(a)
    small = a < 1.0
    out[small] = np.log(np.expm1(a[small]))
    big = ~small
    out[big] = a[big] + np.log1p(-np.exp(-a[big]))
    return out


def predictions_and_m1(
    arr: AreaArrays,
    beta: np.ndarray,
    sigma2: float,
    covariate: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Positive-scale predictions, their conditional-variance terms, and the
    shrinkage weights, all evaluated at the given parameters."""
    g = gamma_vec(arr, beta, sigma2)
    mw = (arr.w if covariate is None else covariate) @ beta
    base = g * arr.z + (1.0 - g) * mw
    pred = exp_checked(base + 0.5 * g * arr.psi)
    a = g * arr.psi
    m1 = np.zeros(arr.m)
    pos = a > 0.0
    if np.any(pos):
        m1[pos] = exp_checked(a[pos] + log_expm1(a[pos]) + 2.0 * base[pos])
    return pred, m1, g
