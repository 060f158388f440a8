"""Contour-integral estimators of population spectral statistics.

The PLSS estimator integrates ``g * s_hat`` around the conjugation-closed
contour; the GLSS estimator integrates ``g(z1) f(z~2) k_hat(z1, z~2)`` over a
product of two closed contours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .contours import (
    GLSS_NODES_F,
    GLSS_NODES_G,
    PolylineCurve,
    QuadratureRule,
    quadrature,
)
from .errors import EstimationError, SingularityError
from .fixed_point import FixedPointConfig
from .measures import DiscreteMeasure, underline_stieltjes
from .mp_inverse import DEFAULT_CFG, SampleSpectrum, estimate_stieltjes, estimate_stieltjes_ext

PROBES = np.array([0.5 + 0.3j, 1.2 + 0.7j, 2.0 + 0.1j, 0.3 + 1.5j,
                   0.8 - 0.4j, 1.7 - 1.1j, 3.0 + 2.0j, 0.1 + 0.05j])
IMAG_RTOL = 1e-8
GLSS_IMAG_RTOL = 1e-6
KERNEL_FLOOR = 1e-12


@dataclass(frozen=True)
class HoloFunction:
    """A function holomorphic near the contour that is real on the real line.

    Conjugate symmetry ``g(conj z) = conj g(z)`` is checked on fixed probe
    points at construction.
    """

    evaluator: Callable
    label: str

    def __post_init__(self):
        with np.errstate(all="ignore"):
            v = np.asarray(self.evaluator(PROBES), dtype=complex)
            vc = np.asarray(self.evaluator(np.conj(PROBES)), dtype=complex)
        if v.shape != PROBES.shape:
            raise ValueError(f"{self.label}: evaluator must act elementwise on arrays")
        err = np.abs(vc - np.conj(v))
        if not np.all(err <= 1e-10 * (1 + np.abs(v))):
            raise ValueError(f"{self.label}: g(conj z) != conj g(z) on probe points")

    def __call__(self, z):
        return self.evaluator(np.asarray(z, dtype=complex))

    def combine(self, other: "HoloFunction", alpha=1.0, beta=1.0) -> "HoloFunction":
        f, g = self.evaluator, other.evaluator
        return HoloFunction(lambda z: alpha * f(z) + beta * g(z), f"{alpha}*{self.label}+{beta}*{other.label}")


def _const_one(z):
    return np.ones_like(np.asarray(z, dtype=complex))


_BUILTINS = {
    "identity": lambda z: z,
    "square": lambda z: z**2,
    "cube": lambda z: z**3,
    "exp": np.exp,
    "log": np.log,
    "const:1": _const_one,
}


def function_from_name(name: str) -> HoloFunction:
    """Resolve ``identity``, ``square``, ``cube``, ``pow:k``, ``exp``, ``log`` or ``const:1``."""
    if name in _BUILTINS:
        return HoloFunction(_BUILTINS[name], name)
    if name.startswith("pow:"):
        try:
            k = int(name[4:])
        except ValueError:
            raise ValueError(f"bad power in {name!r}") from None
        if k < 0:
            raise ValueError("pow:k needs k >= 0")
        return HoloFunction(lambda z: z**k, name)
    raise ValueError(f"unknown function {name!r}; expected one of {sorted(_BUILTINS)} or pow:k")


def check_function_on_curve(g: HoloFunction, curve: PolylineCurve):
    """Reject ``log`` on a curve whose convex hull reaches the branch cut."""
    if g.label == "log" and curve.a <= 0:
        raise ValueError("log needs a curve with a > 0")


@dataclass(frozen=True)
class PlssEstimate:
    value: float
    raw_complex: complex
    curve_used: PolylineCurve
    nodes: int

    @property
    def imag_residue(self) -> float:
        return abs(self.raw_complex.imag)


def _require_exists(res, nodes):
    ok = np.asarray(res.exists)
    if not np.all(ok):
        bad = [complex(z) for z in np.asarray(nodes)[~ok]]
        raise EstimationError(f"estimator does not exist at {len(bad)} quadrature node(s), first {bad[0]}", nodes=bad)


def plss_from_stieltjes(g: HoloFunction, s_vals, rule: QuadratureRule) -> complex:
    """``-1/(2 pi i)`` times the closed-contour integral of ``g s``, given ``s`` on the upper nodes."""
    z, w = rule.closed()
    s = np.concatenate([s_vals, np.conj(s_vals)])
    return complex(-np.sum(g(z) * s * w) / (2j * np.pi))


def plss_estimate(spec: SampleSpectrum, g: HoloFunction, curve: PolylineCurve,
                  rule: Optional[QuadratureRule] = None, fp: FixedPointConfig = DEFAULT_CFG,
                  inversion=None) -> PlssEstimate:
    """Estimate ``int_(a,b) g dH`` from the sample spectrum.

    Integrates ``g * s_hat`` along the curve and its mirror image (using
    ``s_hat(conj z) = conj s_hat(z)``) and multiplies by ``-1/(2 pi i)``.
    Raises :class:`EstimationError` if ``s_hat`` fails to exist at any node.
    """
    rule = quadrature(curve) if rule is None else rule
    res = estimate_stieltjes(spec, rule.nodes, fp) if inversion is None else inversion
    _require_exists(res, rule.nodes)
    raw = plss_from_stieltjes(g, res.s_hat, rule)
    if abs(raw.imag) > IMAG_RTOL * (1 + abs(raw)):
        raise EstimationError(f"imaginary residue {raw.imag:.3g} too large; is g real on the real line?")
    return PlssEstimate(raw.real, raw, curve, len(rule))


def plss_truth(H: DiscreteMeasure, g: HoloFunction, a: float, b: float) -> float:
    """``sum of w_j g(l_j)`` over atoms strictly inside ``(a, b)``."""
    if not a < b:
        raise ValueError("need a < b")
    inside = (H.atoms > a) & (H.atoms < b)
    if not np.any(inside):
        return 0.0
    vals = np.real(g(H.atoms[inside].astype(complex))) * H.weights[inside]
    return math.fsum(vals.tolist())


def plss_plugin_baseline(spec: SampleSpectrum, g: HoloFunction) -> float:
    """Naive plug-in ``(1/d) tr g(S_n)``."""
    val = spec.nu_hat.integrate(lambda x: g(x.astype(complex)))
    return float(np.real(val))


def _kernel(c, z1, s1, zt, su):
    num = zt * su**2 + (1 - c) * su + c * s1
    den = c * (z1 * su + 1) * zt
    return num, den


def glss_kernel(spec: SampleSpectrum, z1, ztilde2, fp: FixedPointConfig = DEFAULT_CFG):
    """``k_hat(z1, z~2)`` with conjugate extensions in both arguments.

    ``z1`` and ``ztilde2`` broadcast against each other.
    """
    scalar = np.ndim(z1) == 0 and np.ndim(ztilde2) == 0
    z1 = np.asarray(z1, dtype=complex)
    zt = np.asarray(ztilde2, dtype=complex)
    res = estimate_stieltjes_ext(spec, z1.ravel(), fp)
    _require_exists(res, z1.ravel())
    s1 = np.asarray(res.s_hat).reshape(z1.shape)
    su = underline_stieltjes(spec.nu_hat, spec.c_n, zt)
    num, den = _kernel(spec.c_n, z1, s1, zt, su)
    small = np.abs(den) < KERNEL_FLOOR * (1 + np.abs(num))
    if np.any(small):
        i = np.unravel_index(np.argmax(small), small.shape)
        zz1 = np.broadcast_to(z1, small.shape)[i]
        zz2 = np.broadcast_to(zt, small.shape)[i]
        raise SingularityError(f"kernel denominator vanishes at z1={zz1}, z~2={zz2}")
    k = num / den
    return complex(k) if scalar else k


def glss_estimate(spec: SampleSpectrum, f: HoloFunction, g: HoloFunction, curve_f: PolylineCurve,
                  curve_g: PolylineCurve, rules=None, fp: FixedPointConfig = DEFAULT_CFG) -> float:
    """Estimate ``(1/d) tr(f(S_n) g(Sigma_n))`` restricted to the enclosed spectra.

    ``rules = (rule_f, rule_g)``; by default 72 nodes per segment on
    ``curve_f`` and 64 on ``curve_g`` so the two node sets never meet.
    """
    if rules is None:
        rules = (quadrature(curve_f, GLSS_NODES_F), quadrature(curve_g, GLSS_NODES_G))
    rule_f, rule_g = rules
    res = estimate_stieltjes(spec, rule_g.nodes, fp)
    _require_exists(res, rule_g.nodes)
    z1, w1 = rule_g.closed()
    s1 = np.concatenate([res.s_hat, np.conj(res.s_hat)])
    z2, w2 = rule_f.closed()
    su_up = underline_stieltjes(spec.nu_hat, spec.c_n, rule_f.nodes)
    su = np.concatenate([su_up, np.conj(su_up)])
    # outer over curve_f, inner over curve_g
    num, den = _kernel(spec.c_n, z1[None, :], s1[None, :], z2[:, None], su[:, None])
    small = np.abs(den) < KERNEL_FLOOR * (1 + np.abs(num))
    if np.any(small):
        i, j = np.unravel_index(np.argmax(small), small.shape)
        raise SingularityError(f"kernel denominator vanishes at z1={z1[j]}, z~2={z2[i]}")
    inner = (num / den) @ (g(z1) * w1)
    raw = complex(np.sum(f(z2) * w2 * inner)) / (4 * np.pi**2)
    if abs(raw.imag) > GLSS_IMAG_RTOL * (1 + abs(raw)):
        raise EstimationError(f"imaginary residue {raw.imag:.3g} too large")
    return raw.real


def glss_truth(S_eigs_vecs, Sigma_eigs_vecs, f: HoloFunction, g: HoloFunction, interval_f, interval_g) -> float:
    """``(1/d) sum_{j,k} f(l_j) 1[l_j in I_f] |u_j . v_k|^2 g(m_k) 1[m_k in I_g]``.

    Both eigen-pairs are given as ``(eigenvalues, eigenvectors-as-columns)``;
    intervals are closed.
    """
    lam, U = S_eigs_vecs
    mu, V = Sigma_eigs_vecs
    lam, mu = np.asarray(lam, dtype=float), np.asarray(mu, dtype=float)
    U, V = np.asarray(U), np.asarray(V)
    if U.shape != V.shape or U.shape[0] != lam.size or V.shape[0] != mu.size:
        raise ValueError("eigen-decompositions must have matching dimensions")
    d = lam.size
    fl = np.where((lam >= interval_f[0]) & (lam <= interval_f[1]), np.real(f(lam.astype(complex))), 0.0)
    gm = np.where((mu >= interval_g[0]) & (mu <= interval_g[1]), np.real(g(mu.astype(complex))), 0.0)
    overlap = np.abs(U.conj().T @ V) ** 2
    return float(fl @ overlap @ gm) / d
