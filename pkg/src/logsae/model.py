"""Core quantities of the area-level log-scale shrinkage model.

The observable for area i is a log-scale direct estimate ``z_i`` tied to a
latent mean ``theta_i`` by ``z_i = theta_i + e_i`` with known sampling
variance ``psi_i``.  The latent mean follows the linking regression
``theta_i = W_i' beta + nu_i`` with between-area variance ``sigma2_nu``,
but the covariate ``W_i`` is only observed through ``w_i = W_i + eta_i``
where ``eta_i`` has known covariance ``sigma_me_i``.  The target is the
positive-scale quantity ``Y_i = exp(theta_i)``.

Conditional on the observed data, ``theta_i`` is normal with mean
``gamma_i z_i + (1 - gamma_i) w_i' beta`` and variance ``gamma_i psi_i``,
where the shrinkage weight is

    gamma_i = (beta' sigma_me_i beta + sigma2_nu)
              / (beta' sigma_me_i beta + sigma2_nu + psi_i).

The best predictor of ``Y_i`` and the leading term of its prediction
uncertainty are both log-normal moments of that conditional law; they are
computed in log space here so that extreme but representable values do not
overflow intermediate steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVariance, NonPsdSigma, PredictionOverflow

__all__ = [
    "AreaObservation",
    "ModelParams",
    "PosteriorMoments",
    "EbPrediction",
    "shrinkage_gamma",
    "posterior_moments",
    "eb_predict",
    "m1_term",
    "predict_areas",
]

# exp() stays inside double range only for exponents in [_EXP_MIN, _EXP_MAX].
_EXP_MAX = 709.782712893384  # log(largest double)
_EXP_MIN = -744.4400719213812  # log(smallest positive subnormal)


def _readonly(values, dtype=float) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


def _check_psd(sig: np.ndarray, context: str) -> None:
    if not np.all(np.isfinite(sig)):
        raise NonPsdSigma(f"{context}: covariance has non-finite entries")
    if not np.allclose(sig, sig.T, rtol=1e-8, atol=1e-12):
        raise NonPsdSigma(f"{context}: covariance is not symmetric")
    if sig.shape[0] == 1:
        if sig[0, 0] < 0.0:
            raise NonPsdSigma(f"{context}: negative variance {sig[0, 0]!r}")
        return
    eigvals = np.linalg.eigvalsh(sig)
    tol = -1e-12 * max(1.0, float(eigvals[-1]))
    if eigvals[0] < tol:
        raise NonPsdSigma(
            f"{context}: covariance has negative eigenvalue {eigvals[0]!r}"
        )


@dataclass(frozen=True)
class AreaObservation:
    """One small area's inputs.

    Attributes
    ----------
    area_id:
        Stable identifier used in reports and error messages.
    z:
        Direct estimate on the log scale.
    w:
        Observed covariate vector, shape ``(p,)``.
    psi:
        Known sampling variance of ``z`` (non-negative).
    sigma_me:
        Known measurement-error covariance of ``w``, shape ``(p, p)``,
        symmetric positive semi-definite.  All-zero means the covariate is
        observed exactly.
    """

    area_id: str
    z: float
    w: np.ndarray
    psi: float
    sigma_me: np.ndarray

    def __post_init__(self):
        w = _readonly(self.w)
        if w.ndim != 1 or w.size == 0:
            raise ValueError(f"{self.area_id}: w must be a non-empty 1-D vector")
        if not np.all(np.isfinite(w)):
            raise ValueError(f"{self.area_id}: w has non-finite entries")
        sig = _readonly(self.sigma_me)
        if sig.shape != (w.size, w.size):
            raise ValueError(
                f"{self.area_id}: sigma_me shape {sig.shape} does not match p={w.size}"
            )
        z = float(self.z)
        psi = float(self.psi)
        if not math.isfinite(z):
            raise ValueError(f"{self.area_id}: z must be finite")
        if not math.isfinite(psi) or psi < 0.0:
            raise ValueError(f"{self.area_id}: psi must be finite and >= 0")
        _check_psd(sig, self.area_id)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "sigma_me", sig)

    @property
    def p(self) -> int:
        return self.w.size


@dataclass(frozen=True)
class ModelParams:
    """Linking-model parameters: regression coefficients and area variance."""

    beta: np.ndarray
    sigma2_nu: float

    def __post_init__(self):
        beta = _readonly(self.beta)
        if beta.ndim != 1 or beta.size == 0:
            raise ValueError("beta must be a non-empty 1-D vector")
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta has non-finite entries")
        s2 = float(self.sigma2_nu)
        if not math.isfinite(s2) or s2 < 0.0:
            raise ValueError("sigma2_nu must be finite and >= 0")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma2_nu", s2)

    @property
    def p(self) -> int:
        return self.beta.size


@dataclass(frozen=True)
class PosteriorMoments:
    """Conditional mean and variance of the latent log-scale mean."""

    mean: float
    variance: float
    gamma: float


@dataclass(frozen=True)
class EbPrediction:
    """Positive-scale prediction for one area plus its leading
    uncertainty term (the conditional variance of ``exp(theta)``)."""

    area_id: str
    prediction: float
    m1: float


def _exp_checked(exponent: float, context: str) -> float:
    if exponent > _EXP_MAX or exponent < _EXP_MIN:
        raise PredictionOverflow(
            f"{context}: exponent {exponent:.6g} is outside the representable "
            f"range [{_EXP_MIN:.1f}, {_EXP_MAX:.1f}]"
        )
    return math.exp(exponent)


def _log_expm1(a: float) -> float:
    # log(e^a - 1) without overflow: exact for tiny a via expm1, and for
    # large a via a + log(1 - e^-a).
    if a < 1.0:
        return math.log(math.expm1(a))
    return a + math.log1p(-math.exp(-a))


def shrinkage_gamma(params: ModelParams, sigma_me: np.ndarray, psi: float) -> float:
    """Weight the direct estimate carries in the conditional mean.

    Parameters
    ----------
    params:
        Current parameter values ``(beta, sigma2_nu)``.
    sigma_me:
        Measurement-error covariance for the area, shape ``(p, p)``.
    psi:
        Sampling variance of the area's direct estimate.

    Returns
    -------
    float
        ``(beta' sigma_me beta + sigma2_nu) / (same + psi)``, guaranteed to
        lie in ``[0, 1]``.  Equals 1 exactly when ``psi == 0`` and 0 when
        the numerator vanishes while ``psi > 0``.

    Raises
    ------
    DegenerateVariance
        If numerator and ``psi`` are both zero: with every variance gone
        there is no weighting to define.
    """
    sig = np.asarray(sigma_me, dtype=float)
    quad = float(params.beta @ sig @ params.beta)
    quad = max(quad, 0.0)  # PSD in exact arithmetic; guard roundoff
    num = quad + params.sigma2_nu
    den = num + float(psi)
    if den <= 0.0:
        raise DegenerateVariance(
            "beta'sigma_me beta + sigma2_nu + psi is zero; shrinkage undefined"
        )
    return num / den


def posterior_moments(
    obs: AreaObservation,
    params: ModelParams,
    covariate: np.ndarray | None = None,
) -> PosteriorMoments:
    """Conditional law of the latent log-scale mean given the data.

    ``covariate`` selects the vector used in the regression part of the
    conditional mean; it defaults to the observed ``obs.w``.
    """
    gamma = shrinkage_gamma(params, obs.sigma_me, obs.psi)
    m = obs.w if covariate is None else np.asarray(covariate, dtype=float)
    mean = gamma * obs.z + (1.0 - gamma) * float(m @ params.beta)
    return PosteriorMoments(mean=mean, variance=gamma * obs.psi, gamma=gamma)


def eb_predict(obs: AreaObservation, params: ModelParams) -> float:
    """Best predictor of the positive-scale quantity ``exp(theta)``.

    Computes ``exp(gamma z + (1 - gamma) w'beta + gamma psi / 2)``: the
    conditional expectation of a log-normal variable, so the result is the
    conditional mean of ``Y`` rather than the exponential of the
    conditional mean of ``theta``.

    Raises
    ------
    PredictionOverflow
        If the exponent leaves the representable double range.  The error
        is raised instead of returning ``inf`` or ``0.0``.
    """
    mom = posterior_moments(obs, params)
    return _exp_checked(mom.mean + 0.5 * mom.variance, obs.area_id)


def m1_term(
    obs: AreaObservation,
    params: ModelParams,
    covariate_in_use: np.ndarray | None = None,
) -> float:
    """Leading prediction-uncertainty term: conditional variance of ``Y``.

    Equals ``exp(psi gamma) (exp(psi gamma) - 1) exp(2 [gamma z +
    (1 - gamma) m'beta])`` where ``m`` is ``covariate_in_use`` (the
    observed ``w`` by default; pass the latent covariate when evaluating
    the oracle version in a simulation).  Always non-negative, and zero
    exactly when ``gamma psi == 0``.
    """
    gamma = shrinkage_gamma(params, obs.sigma_me, obs.psi)
    a = gamma * obs.psi
    if a == 0.0:
        return 0.0
    m = obs.w if covariate_in_use is None else np.asarray(covariate_in_use, dtype=float)
    base = gamma * obs.z + (1.0 - gamma) * float(m @ params.beta)
    return _exp_checked(a + _log_expm1(a) + 2.0 * base, obs.area_id)


def predict_areas(areas, params: ModelParams) -> list[EbPrediction]:
    """Positive-scale predictions plus their leading uncertainty terms."""
    return [
        EbPrediction(
            area_id=obs.area_id,
            prediction=eb_predict(obs, params),
            m1=m1_term(obs, params),
        )
        for obs in areas
    ]
