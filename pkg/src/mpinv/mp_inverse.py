"""Marchenko-Pastur inversion: estimate the population Stieltjes transform
``s_H(z)`` from sample eigenvalues by iterating

    v <- T(v) = int l / (l - (1 - c v) z) dnu(l),   s = (v - 1) / z.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import fixed_point
from .errors import DomainError
from .fixed_point import FixedPointConfig
from .measures import (
    DiscreteMeasure,
    from_eigenvalues,
    underline_stieltjes,
    underline_stieltjes_deriv,
)

MARGIN = 1e-12
DEFAULT_CFG = FixedPointConfig(tol=1e-9, max_iter=500)


class FailureReason(enum.Enum):
    NoConvergence = "NoConvergence"
    ImPhiNonPositive = "ImPhiNonPositive"
    RatioAtLeastOne = "RatioAtLeastOne"
    NotInUpperHalfPlane = "NotInUpperHalfPlane"


@dataclass(frozen=True)
class SampleSpectrum:
    """Empirical spectral distribution of ``S_n`` and the ratio ``c_n = d / n``."""

    nu_hat: DiscreteMeasure
    c_n: float
    d: int
    n: float

    def __post_init__(self):
        if self.d < 1 or self.n <= 0:
            raise ValueError("need d >= 1 and n > 0")
        if abs(self.c_n - self.d / self.n) > 1e-12:
            raise ValueError(f"c_n={self.c_n} inconsistent with d/n={self.d / self.n}")
        if not self.nu_hat.is_probability():
            raise ValueError("nu_hat must be a probability measure")

    @classmethod
    def from_eigenvalues(cls, evals, n=None, c=None) -> "SampleSpectrum":
        """Build from eigenvalues; give either the sample size ``n`` or the ratio ``c``."""
        evals = np.asarray(evals, dtype=float).ravel()
        d = evals.size
        if n is None and c is None:
            raise ValueError("need n or c")
        if n is None:
            n = d / c
        return cls(from_eigenvalues(evals), d / n, d, n)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.nu_hat.atoms

    def with_n(self, n) -> "SampleSpectrum":
        return SampleSpectrum(self.nu_hat, self.d / n, self.d, n)


@dataclass(frozen=True)
class InversionResult:
    """Outcome of one inversion.  Fields are scalars for a scalar ``z`` and
    arrays (``failure_reason`` as an object array) for an array of ``z``."""

    z: complex
    s_hat: complex
    phi_hat: complex
    iterations: int
    ratio: float
    exists: bool
    failure_reason: FailureReason | None
    residual: float

    def __getitem__(self, i):
        return InversionResult(
            complex(self.z[i]), complex(self.s_hat[i]), complex(self.phi_hat[i]),
            int(self.iterations[i]), float(self.ratio[i]), bool(self.exists[i]),
            self.failure_reason[i], float(self.residual[i]),
        )

    def __len__(self):
        return np.size(self.z)


def t_operator(spec: SampleSpectrum, z, v):
    """``int l / (l - (1 - c_n v) z) dnu_hat(l)``."""
    scalar = np.ndim(z) == 0 and np.ndim(v) == 0
    z = np.asarray(z, dtype=complex)
    v = np.asarray(v, dtype=complex)
    w = (1 - spec.c_n * v) * z
    lam = spec.nu_hat.atoms
    diff = lam - w[..., None]
    hit = diff == 0
    if np.any(hit):
        j = int(np.argwhere(hit)[0][-1])
        raise DomainError(f"(1 - c v) z coincides with atom {j} ({lam[j]})", index=j)
    out = np.sum(spec.nu_hat.weights * lam / diff, axis=-1)
    return complex(out) if scalar else out


def _classify(c, z, v, iters, resid, converged):
    s = (v - 1) / z
    phi = (1 - c * z * s - c) * z
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(c * z * np.imag(z * s) / np.imag(phi))
    ratio = np.where(np.isfinite(ratio), ratio, np.inf)
    reason = np.full(z.shape, None, dtype=object)
    im_ok = np.imag(phi) > MARGIN
    ratio_ok = ratio < 1 - MARGIN
    upper = np.imag(s) > 0
    reason[~upper] = FailureReason.NotInUpperHalfPlane
    reason[~ratio_ok] = FailureReason.RatioAtLeastOne
    reason[~im_ok] = FailureReason.ImPhiNonPositive
    reason[~converged] = FailureReason.NoConvergence
    exists = converged & im_ok & ratio_ok & upper
    return InversionResult(z, s, phi, iters, ratio, exists, reason, resid)


def invert(t_op, c: float, z, cfg: FixedPointConfig = DEFAULT_CFG, v0=1j) -> InversionResult:
    """Generic inversion driver.

    ``t_op(v, w)`` must return ``int l / (l - w) dnu(l)`` at ``w = (1 - c v) z``
    for arrays ``v`` and ``w``; this lets the same iteration run on an
    empirical measure or on an exactly known deterministic equivalent.
    """
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    if np.any(z.imag <= 0):
        raise DomainError("inversion needs Im(z) > 0; use estimate_stieltjes_ext for the lower half-plane")
    v0 = np.broadcast_to(np.asarray(v0, dtype=complex), z.shape)

    def F(v, idx):
        return t_op(v, (1 - c * v) * z[idx])

    v, iters, resid, conv = fixed_point.iterate(F, v0, cfg)
    res = _classify(c, z, v, iters, resid, conv)
    return res[0] if scalar else res


def _empirical_t(spec):
    lam = spec.nu_hat.atoms
    wts = spec.nu_hat.weights

    def t_op(v, w):
        return np.sum(wts * lam / (lam - w[..., None]), axis=-1)

    return t_op


def virtual_t(nu_stieltjes):
    """``T`` built from a Stieltjes transform via ``int l/(l-w) dnu = 1 + w s_nu(w)``."""

    def t_op(v, w):
        return 1 + w * nu_stieltjes(w)

    return t_op


def estimate_stieltjes(spec: SampleSpectrum, z, cfg: FixedPointConfig = DEFAULT_CFG, v0=1j) -> InversionResult:
    """Population Stieltjes transform estimator at ``z`` (scalar or array) in ``C+``."""
    return invert(_empirical_t(spec), spec.c_n, z, cfg, v0)


def estimate_stieltjes_ext(spec: SampleSpectrum, z, cfg: FixedPointConfig = DEFAULT_CFG) -> InversionResult:
    """Extension to ``C-`` by ``s(conj z) = conj s(z)``."""
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    if np.any(z.imag == 0):
        raise ValueError("estimate_stieltjes_ext needs Im(z) != 0")
    lower = z.imag < 0
    res = estimate_stieltjes(spec, np.where(lower, np.conj(z), z), cfg)
    out = InversionResult(
        z,
        np.where(lower, np.conj(res.s_hat), res.s_hat),
        np.where(lower, np.conj(res.phi_hat), res.phi_hat),
        res.iterations, res.ratio, res.exists, res.failure_reason, res.residual,
    )
    return out[0] if scalar else out


def varphi_hat_derivs(spec: SampleSpectrum, zt):
    """``varphi(z~) = -1/g(z~)`` with ``g`` the companion Stieltjes transform of
    ``nu_hat``; returns ``(varphi, varphi', varphi'')``."""
    c = spec.c_n
    g = underline_stieltjes(spec.nu_hat, c, zt)
    g1 = underline_stieltjes_deriv(spec.nu_hat, c, zt, 1)
    g2 = underline_stieltjes_deriv(spec.nu_hat, c, zt, 2)
    return -1 / g, g1 / g**2, g2 / g**2 - 2 * g1**2 / g**3


def phi_hat_derivs(spec: SampleSpectrum, z, cfg: FixedPointConfig = DEFAULT_CFG, result: InversionResult | None = None):
    """``(Phi_hat'(z), Phi_hat''(z))`` by inverse-function differentiation of
    ``varphi`` at ``Phi_hat(z)``.

    Non-existent points yield ``nan``; callers that need hard failures should
    check ``result.exists``.
    """
    res = estimate_stieltjes_ext(spec, z, cfg) if result is None else result
    ph = np.asarray(res.phi_hat)
    _, p1, p2 = varphi_hat_derivs(spec, ph)
    d1 = 1 / p1
    d2 = -p2 * d1**3
    ok = np.asarray(res.exists)
    d1 = np.where(ok, d1, np.nan)
    d2 = np.where(ok, d2, np.nan)
    if np.ndim(z) == 0:
        return complex(d1), complex(d2)
    return d1, d2
