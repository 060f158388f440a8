"""Second-order (CLT) kernels and confidence intervals for the PLSS estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .contours import PolylineCurve, quadrature
from .errors import EstimationError, SingularityError
from .estimators import HoloFunction, _require_exists, plss_from_stieltjes
from .fixed_point import FixedPointConfig
from .mp_forward import ForwardModel, phi_map, phi_map_derivs
from .mp_inverse import DEFAULT_CFG, SampleSpectrum, estimate_stieltjes, estimate_stieltjes_ext, phi_hat_derivs

DERIV_FLOOR = 1e-12
COINCIDE_FLOOR = 1e-8
CLAMP_FLOOR = -1e-12
# staggered node count for the second variable of the variance double integral
VARIANCE_NODES_2 = 72


@dataclass(frozen=True)
class CltConfig:
    beta: int = 1
    alpha: float = 0.05

    def __post_init__(self):
        if self.beta not in (1, 2):
            raise ValueError("beta must be 1 or 2")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")


def _check_beta(beta):
    if beta not in (1, 2):
        raise ValueError("beta must be 1 or 2")


def _e_kernel(c, beta, d1, d2):
    if np.any(np.abs(d1) < DERIV_FLOOR):
        raise SingularityError("Phi' vanishes")
    if beta == 2:
        return np.zeros_like(d1)
    return -d2 / (2 * c * d1)


def _c_kernel(c, beta, z1, z2, p1, p2, d1, d2):
    dz = z1 - z2
    if np.any(np.abs(dz) < COINCIDE_FLOOR):
        raise SingularityError("kernel arguments nearly coincide")
    return (1 / dz**2 - d1 * d2 / (p1 - p2) ** 2) / (beta * c**2)


def _ext_derivs(spec, z, fp):
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    res = estimate_stieltjes_ext(spec, z, fp)
    _require_exists(res, z)
    d1, d2 = phi_hat_derivs(spec, z, fp, result=res)
    return np.asarray(res.phi_hat), d1, d2


def e_hat(spec: SampleSpectrum, z, beta: int = 1, fp: FixedPointConfig = DEFAULT_CFG):
    """Estimated mean kernel ``-1[beta=1] Phi_hat''(z) / (2 c_n Phi_hat'(z))``."""
    _check_beta(beta)
    _, d1, d2 = _ext_derivs(spec, z, fp)
    e = _e_kernel(spec.c_n, beta, d1, d2)
    return complex(e[0]) if np.ndim(z) == 0 else e.reshape(np.shape(z))


def c_hat(spec: SampleSpectrum, z1, z2, beta: int = 1, fp: FixedPointConfig = DEFAULT_CFG):
    """Estimated covariance kernel
    ``(1/(beta c_n^2)) [1/(z1-z2)^2 - Phi_hat'(z1) Phi_hat'(z2) / (Phi_hat(z1) - Phi_hat(z2))^2]``."""
    _check_beta(beta)
    p1, a1, _ = _ext_derivs(spec, z1, fp)
    p2, a2, _ = _ext_derivs(spec, z2, fp)
    out = _c_kernel(spec.c_n, beta, np.atleast_1d(z1), np.atleast_1d(z2), p1, p2, a1, a2)
    return complex(out[0]) if np.ndim(z1) == 0 and np.ndim(z2) == 0 else out


def theoretical_kernels(model: ForwardModel, beta: int, z, z2=None):
    """Population-side kernels: ``e(z)`` when ``z2`` is None, else ``c(z, z2)``,
    built from the exact ``Phi_{H,c}`` and its derivatives."""
    _check_beta(beta)
    c = model.c
    if z2 is None:
        d1, d2 = phi_map_derivs(model, z)
        return _e_kernel(c, beta, np.asarray(d1), np.asarray(d2))[()]
    p1, p2 = phi_map(model, z), phi_map(model, z2)
    a1, _ = phi_map_derivs(model, z)
    a2, _ = phi_map_derivs(model, z2)
    return _c_kernel(c, beta, np.asarray(z, dtype=complex), np.asarray(z2, dtype=complex), p1, p2, a1, a2)[()]


@dataclass(frozen=True)
class CiMoments:
    estimate: float
    mu_n: float
    sigma2_n: float
    sigma2_raw: float
    clamped: bool
    n: float


def ci_moments(spec: SampleSpectrum, g: HoloFunction, curve: PolylineCurve, rules=None, beta: int = 1,
               fp: FixedPointConfig = DEFAULT_CFG) -> CiMoments:
    """Centre ``mu_n`` and variance ``sigma2_n`` of the normal approximation to
    the PLSS estimator.

    ``mu_n = L_hat + (1/(2 pi i n)) oint g e_hat`` and ``sigma2_n`` is the
    double contour integral of ``g(z1) g(z2) c_hat(z1, z2)`` scaled by
    ``1/(pi^2 n^2)``.  The second variable runs over a staggered rule
    (``rules = (rule_1, rule_2)``) so the kernel is never evaluated on its
    diagonal.  A variance in ``(-1e-12, 0)`` is clamped to 0 and flagged.
    """
    _check_beta(beta)
    if rules is None:
        rules = (quadrature(curve), quadrature(curve, VARIANCE_NODES_2))
    rule1, rule2 = rules
    c, n = spec.c_n, spec.n

    res1 = estimate_stieltjes(spec, rule1.nodes, fp)
    _require_exists(res1, rule1.nodes)
    raw = plss_from_stieltjes(g, res1.s_hat, rule1)
    est = raw.real
    p1 = np.asarray(res1.phi_hat)
    a1, b1 = phi_hat_derivs(spec, rule1.nodes, fp, result=res1)

    if beta == 1:
        e1 = _e_kernel(c, beta, a1, b1)
        z, w = rule1.closed()
        e = np.concatenate([e1, np.conj(e1)])
        bias = np.sum(g(z) * e * w) / (2j * np.pi * n)
        mu = est + bias.real
    else:
        mu = est

    res2 = estimate_stieltjes(spec, rule2.nodes, fp)
    _require_exists(res2, rule2.nodes)
    p2 = np.asarray(res2.phi_hat)
    a2, _ = phi_hat_derivs(spec, rule2.nodes, fp, result=res2)
    z1, w1, g1 = rule1.nodes, rule1.weights, g(rule1.nodes)
    z2, w2, g2 = rule2.nodes, rule2.weights, g(rule2.nodes)
    zz1 = z1[:, None]
    # second argument on the mirrored curve: increments conj(dz2)
    k_mirror = _c_kernel(c, beta, zz1, np.conj(z2)[None, :], p1[:, None], np.conj(p2)[None, :],
                         a1[:, None], np.conj(a2)[None, :])
    k_same = _c_kernel(c, beta, zz1, z2[None, :], p1[:, None], p2[None, :], a1[:, None], a2[None, :])
    t_mirror = (g1 * w1) @ k_mirror @ np.conj(g2 * w2)
    t_same = (g1 * w1) @ k_same @ (g2 * w2)
    s2 = float(np.real(t_mirror - t_same)) / (np.pi**2 * n**2)
    clamped = False
    if s2 < 0:
        if s2 <= CLAMP_FLOOR:
            raise EstimationError(f"variance integral is negative ({s2:.3g}); kernel or curve is unreliable")
        clamped = True
    return CiMoments(est, float(mu), max(s2, 0.0), s2, clamped, n)


# -- normal quantile ----------------------------------------------------------

_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00, 3.754408661907416e00)
_P_LOW = 0.02425


def _rational(p):
    if p < _P_LOW:
        q = math.sqrt(-2 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
               ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1)
    if p > 1 - _P_LOW:
        return -_rational(1 - p)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
           (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1)


def gaussian_quantile(p: float) -> float:
    """Standard normal quantile: a rational initial guess refined by one
    Halley step on ``Phi(x) - p`` (absolute error well below 1e-8)."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return -gaussian_quantile(1 - p)
    x = _rational(p)
    err = 0.5 * math.erfc(-x / math.sqrt(2)) - p
    u = err * math.sqrt(2 * math.pi) * math.exp(x * x / 2)
    return x - u / (1 + x * u / 2)


def confidence_interval(spec: SampleSpectrum, g: HoloFunction, curve: PolylineCurve, rules=None,
                        cfg: CltConfig = CltConfig(), fp: FixedPointConfig = DEFAULT_CFG,
                        moments: Optional[CiMoments] = None):
    """``(lo, hi, moments)`` of the level ``1 - alpha`` interval
    ``mu_n + sqrt(sigma2_n) [Q(alpha/2), Q(1 - alpha/2)]``."""
    m = ci_moments(spec, g, curve, rules, cfg.beta, fp) if moments is None else moments
    sd = math.sqrt(m.sigma2_n)
    q = gaussian_quantile(1 - cfg.alpha / 2)
    return m.mu_n - sd * q, m.mu_n + sd * q, m


def ci_report(lo, hi, m: CiMoments, cfg: CltConfig) -> dict:
    return {"estimate": m.estimate, "mu_n": m.mu_n, "sigma2_n": m.sigma2_n, "lo": lo, "hi": hi,
            "alpha": cfg.alpha, "beta": cfg.beta}
