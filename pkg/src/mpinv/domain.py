"""Membership tests for the data-driven spectral domain on which the inversion
is accurate, and rasterisation of that domain."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DomainError
from .fixed_point import FixedPointConfig
from .measures import interval_distance, support_distance
from .mp_forward import density_grid, support_upper_bound
from .mp_inverse import DEFAULT_CFG, InversionResult, SampleSpectrum, estimate_stieltjes

RASTER_HEADER = ("re", "im", "member", "abs_phi", "dist_eigs", "dist_interval", "ratio")


class Mode(enum.Enum):
    ReplacementSafe = "ReplacementSafe"
    SupportSupplied = "SupportSupplied"


@dataclass(frozen=True)
class DomainConfig:
    """``tau < kappa`` bound the domain; ``sigma2`` bounds the population
    operator norm.  With ``sigma2=None`` the heuristic
    ``max eigenvalue / (1 + sqrt(c_n))^2`` is used and flagged."""

    tau: float
    kappa: float
    sigma2: Optional[float] = None
    mode: Mode = Mode.ReplacementSafe
    nu_support: Optional[tuple] = None

    def __post_init__(self):
        if not 0 < self.tau < self.kappa:
            raise ValueError("need 0 < tau < kappa")
        if self.sigma2 is not None and self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if isinstance(self.mode, str):
            object.__setattr__(self, "mode", Mode(self.mode))
        if self.nu_support is not None:
            ivs = tuple((float(lo), float(hi)) for lo, hi in self.nu_support)
            if any(lo > hi for lo, hi in ivs):
                raise ValueError("support intervals need lo <= hi")
            object.__setattr__(self, "nu_support", ivs)

    def resolved_sigma2(self, spec: SampleSpectrum):
        """``(sigma2, is_heuristic)``."""
        if self.sigma2 is not None:
            return self.sigma2, False
        return float(spec.eigenvalues.max()) / (1 + np.sqrt(spec.c_n)) ** 2, True


@dataclass
class Diagnostics:
    """Per-point values behind each domain condition (arrays for array input)."""

    abs_z: np.ndarray
    exists: np.ndarray
    failure_reason: np.ndarray
    abs_phi: np.ndarray
    dist_eigs: np.ndarray
    dist_interval: np.ndarray
    ratio: np.ndarray
    iterations: np.ndarray
    conditions: dict
    sigma2: float
    sigma2_heuristic: bool
    inversion: Optional[InversionResult] = field(default=None, repr=False)

    def failing(self, i):
        """Names of the conditions that fail at point ``i``."""
        return [k for k, v in self.conditions.items() if not np.asarray(v).ravel()[i]]


def support_set_distance(z, intervals):
    z = np.asarray(z, dtype=complex)
    return np.min([interval_distance(z, lo, hi) for lo, hi in intervals], axis=0)


def _evaluate(spec, cfg, z, fp, inversion=None):
    z = np.asarray(z, dtype=complex).ravel()
    if np.any(z.imag <= 0):
        raise DomainError("domain membership needs Im(z) > 0")
    if cfg.mode is Mode.SupportSupplied and not cfg.nu_support:
        raise ConfigurationError("SupportSupplied mode needs nu_support intervals")
    sigma2, heuristic = cfg.resolved_sigma2(spec)
    res = estimate_stieltjes(spec, z, fp) if inversion is None else inversion
    phi = res.phi_hat
    abs_z = np.abs(z)
    abs_phi = np.where(res.exists, np.abs(phi), np.nan)
    dist_eigs = np.where(res.exists, support_distance(spec.nu_hat, phi), np.nan)
    if cfg.mode is Mode.ReplacementSafe:
        dist_iv = interval_distance(phi, 0.0, support_upper_bound(sigma2, spec.c_n))
        cond5 = dist_iv >= cfg.tau
    else:
        dist_iv = support_set_distance(phi, cfg.nu_support)
        cond5 = dist_iv > cfg.tau
    dist_iv = np.where(res.exists, dist_iv, np.nan)
    ex = np.asarray(res.exists, dtype=bool)
    conds = {
        "abs_z": (cfg.tau < abs_z) & (abs_z < cfg.kappa),
        "exists": ex,
        "abs_phi": ex & (cfg.tau < np.nan_to_num(abs_phi, nan=-1)) & (np.nan_to_num(abs_phi, nan=np.inf) < cfg.kappa),
        "dist_eigs": ex & (np.nan_to_num(dist_eigs, nan=-1) > cfg.tau),
        "dist_support": ex & cond5,
    }
    diag = Diagnostics(abs_z, ex, res.failure_reason, abs_phi, dist_eigs, dist_iv,
                       np.asarray(res.ratio), np.asarray(res.iterations), conds, sigma2, heuristic, res)
    member = np.logical_and.reduce(list(conds.values()))
    return member, diag


def membership(spec: SampleSpectrum, cfg: DomainConfig, z, fp: FixedPointConfig = DEFAULT_CFG):
    """Is ``z`` in the empirical spectral domain?  Returns ``(member, diagnostics)``.

    Conditions, in order: ``tau < |z| < kappa``; the estimator exists;
    ``tau < |Phi_hat| < kappa``; ``Phi_hat`` is more than ``tau`` from every
    sample eigenvalue; and ``Phi_hat`` keeps distance ``tau`` from
    ``[0, sigma2 (1 + sqrt c_n)^2]`` (ReplacementSafe) or from the supplied
    support of the deterministic equivalent (SupportSupplied).  Works on
    scalars or arrays.
    """
    member, diag = _evaluate(spec, cfg, z, fp)
    if np.ndim(z) == 0:
        return bool(member[0]), diag
    return member.reshape(np.shape(z)), diag


@dataclass
class Raster:
    re: np.ndarray
    im: np.ndarray
    member: np.ndarray
    diagnostics: Diagnostics

    def rows(self):
        """Row-major records (outer loop over ``im``, inner over ``re``)."""
        d = self.diagnostics
        ny, nx = self.member.shape
        for i in range(ny):
            for j in range(nx):
                k = i * nx + j
                yield (self.re[j], self.im[i], bool(self.member[i, j]), d.abs_phi[k], d.dist_eigs[k],
                       d.dist_interval[k], d.ratio[k])

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RASTER_HEADER)
        for re, im, mem, ap, de, di, ra in self.rows():
            w.writerow([repr(float(re)), repr(float(im)), int(mem)] + [repr(float(v)) for v in (ap, de, di, ra)])


def rasterize(spec: SampleSpectrum, cfg: DomainConfig, bbox, resolution, fp: FixedPointConfig = DEFAULT_CFG) -> Raster:
    """Evaluate :func:`membership` at the centres of an ``ny x nx`` grid over
    ``bbox = (re_min, re_max, im_min, im_max)``."""
    re_min, re_max, im_min, im_max = map(float, bbox)
    nx, ny = map(int, resolution)
    if im_min <= 0 or re_min >= re_max or im_min >= im_max:
        raise ValueError("bbox needs re_min < re_max and 0 < im_min < im_max")
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2 x 2")
    re = re_min + (np.arange(nx) + 0.5) * (re_max - re_min) / nx
    im = im_min + (np.arange(ny) + 0.5) * (im_max - im_min) / ny
    Z = re[None, :] + 1j * im[:, None]
    member, diag = _evaluate(spec, cfg, Z.ravel(), fp)
    return Raster(re, im, member.reshape(ny, nx), diag)


def support_from_model(model, lo: float, hi: float, num: int = 4001, eta: float = 1e-7, threshold: float = 1e-6):
    """Intervals where the deterministic-equivalent density exceeds
    ``threshold`` on a grid over ``[lo, hi]``; feeds SupportSupplied mode."""
    xs = np.linspace(lo, hi, num)
    on = np.concatenate([[False], density_grid(model, xs, eta) > threshold, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(on))
    return tuple((float(xs[i]), float(xs[j - 1])) for i, j in zip(edges[::2], edges[1::2]))
