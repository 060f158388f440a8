"""Polyline contours in the upper half-plane, Gauss-Legendre quadrature along
them, and admissibility checks for single curves and curve pairs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .domain import DomainConfig, Mode, _evaluate
from .fixed_point import FixedPointConfig
from .measures import interval_distance, support_distance
from .mp_forward import support_upper_bound
from .mp_inverse import DEFAULT_CFG, SampleSpectrum, varphi_hat_derivs

DEFAULT_NODES = 64
GLSS_NODES_G = 64
GLSS_NODES_F = 72
ETA_FLOOR = 1e-8


@dataclass(frozen=True)
class PolylineCurve:
    """Piecewise linear path from ``b`` (real) through the upper half-plane to ``a`` (real)."""

    vertices: tuple
    a: float
    b: float

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=complex).ravel()
        if v.size < 2:
            raise ValueError("a curve needs at least two vertices")
        if not self.a < self.b:
            raise ValueError("need a < b")
        if v[0] != complex(self.b) or v[-1] != complex(self.a):
            raise ValueError("curve must start at b + 0i and end at a + 0i")
        if np.any(v[1:-1].imag <= 0):
            raise ValueError("interior vertices must lie in the open upper half-plane")
        if np.any(v[1:] == v[:-1]):
            raise ValueError("consecutive vertices must be distinct")
        object.__setattr__(self, "vertices", tuple(complex(x) for x in v))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=complex)

    @property
    def length(self) -> float:
        return float(np.sum(np.abs(np.diff(self.array))))

    def to_json(self) -> dict:
        return {"vertices": [[z.real, z.imag] for z in self.vertices], "a": self.a, "b": self.b}

    @classmethod
    def from_json(cls, obj) -> "PolylineCurve":
        try:
            verts = [complex(float(re), float(im)) for re, im in obj["vertices"]]
            return cls(tuple(verts), float(obj["a"]), float(obj["b"]))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed curve object: {exc}") from exc


def load_curve(path) -> PolylineCurve:
    with open(path, encoding="utf-8") as fh:
        return PolylineCurve.from_json(json.load(fh))


def dump_curve(curve: PolylineCurve, fh):
    json.dump(curve.to_json(), fh)


def rectangle_curve(a: float, b: float, h: float) -> PolylineCurve:
    """Rectangle ``b -> b + ih -> a + ih -> a``."""
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    if not h > 0:
        raise ValueError("h must be positive")
    return PolylineCurve((complex(b), complex(b, h), complex(a, h), complex(a)), a, b)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes on the curve and complex weights ``dz``; ``sum(weights) = a - b``."""

    nodes: np.ndarray
    weights: np.ndarray
    nodes_per_segment: int

    def integrate(self, values) -> complex:
        return complex(np.sum(np.asarray(values) * self.weights))

    def closed(self):
        """Nodes and weights of the conjugation-closed contour: the curve itself
        followed by its mirror image traversed back, whose increments are
        ``-conj(dz)``.  Integrating a conjugate-symmetric ``F`` over it gives
        ``int F dz - conj(int F dz)``."""
        return (np.concatenate([self.nodes, np.conj(self.nodes)]),
                np.concatenate([self.weights, -np.conj(self.weights)]))

    def __len__(self):
        return self.nodes.size


@lru_cache(maxsize=16)
def _gauss(m):
    x, w = np.polynomial.legendre.leggauss(m)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def quadrature(curve: PolylineCurve, nodes_per_segment: int = DEFAULT_NODES, eta_floor: float = ETA_FLOOR) -> QuadratureRule:
    """Per-segment Gauss-Legendre rule.

    A segment that starts or ends on the real axis is truncated where its
    imaginary part reaches ``eta_floor``; the dropped sliver's ``dz`` is added
    to the weight of the node nearest to it, so the weights still telescope to
    ``a - b``.
    """
    if nodes_per_segment < 2:
        raise ValueError("nodes_per_segment must be >= 2")
    if not eta_floor > 0:
        raise ValueError("eta_floor must be positive")
    x, w = _gauss(int(nodes_per_segment))
    v = curve.array
    nodes, weights = [], []
    for p, q in zip(v[:-1], v[1:]):
        t0, t1 = 0.0, 1.0
        dy = q.imag - p.imag
        if p.imag == 0 and dy > 0:
            t0 = min(eta_floor / dy, 0.5)
        if q.imag == 0 and dy < 0:
            t1 = max(1 - eta_floor / -dy, 0.5)
        lo, hi = p + t0 * (q - p), p + t1 * (q - p)
        half = (hi - lo) / 2
        zn = (lo + hi) / 2 + half * x
        wn = (half * w).astype(complex)
        if t0 > 0:
            wn[0] += lo - p
        if t1 < 1:
            wn[-1] += q - hi
        nodes.append(zn)
        weights.append(wn)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights, int(nodes_per_segment))


def sup_norm(g, rule: QuadratureRule) -> float:
    """``max |g|`` over the nodes of the rule and their conjugates."""
    nodes, _ = rule.closed()
    return float(np.max(np.abs(g(nodes))))


@dataclass
class AdmissibilityReport:
    admissible: bool
    failing_nodes: list = field(default_factory=list)
    failing_conditions: dict = field(default_factory=dict)
    n_nodes: int = 0
    sigma2_heuristic: bool = False
    max_iterations: int = 0

    def to_json(self) -> dict:
        return {
            "admissible": self.admissible,
            "n_nodes": self.n_nodes,
            "failing_nodes": [[complex(z).real, complex(z).imag] for z in self.failing_nodes],
            "failing_conditions": self.failing_conditions,
            "sigma2_heuristic": self.sigma2_heuristic,
        }


def validate_admissible(curve: PolylineCurve, spec: SampleSpectrum, cfg: DomainConfig,
                        rule: Optional[QuadratureRule] = None, fp: FixedPointConfig = DEFAULT_CFG) -> AdmissibilityReport:
    """Check domain membership at every quadrature node of ``curve``."""
    rule = quadrature(curve) if rule is None else rule
    member, diag = _evaluate(spec, cfg, rule.nodes, fp)
    bad = np.flatnonzero(~member)
    conds = {k: int(np.sum(~np.asarray(v))) for k, v in diag.conditions.items() if np.any(~np.asarray(v))}
    return AdmissibilityReport(bad.size == 0, [complex(rule.nodes[i]) for i in bad], conds, len(rule),
                               diag.sigma2_heuristic, int(np.max(diag.iterations)))


def auto_height(a, b, spec: SampleSpectrum, cfg: DomainConfig, fp: FixedPointConfig = DEFAULT_CFG,
                h_grid=(0.1, 0.25, 0.5, 1.0), nodes_per_segment: int = DEFAULT_NODES) -> Optional[PolylineCurve]:
    """First rectangle over ``h_grid`` (ascending) that is admissible, else ``None``."""
    h_grid = list(h_grid)
    if not h_grid or any(h <= 0 for h in h_grid) or h_grid != sorted(h_grid):
        raise ValueError("h_grid must be a nonempty ascending list of positive heights")
    for h in h_grid:
        curve = rectangle_curve(a, b, h)
        if validate_admissible(curve, spec, cfg, quadrature(curve, nodes_per_segment), fp).admissible:
            return curve
    return None


def snap_to_grid(x: float, n, K: int) -> float:
    """Nearest point ``k / n^K`` to ``x``; ties go toward minus infinity."""
    if n < 1 or K < 1:
        raise ValueError("need n >= 1 and K >= 1")
    scale = float(n) ** K
    k = math.ceil(x * scale - 0.5)
    return k / scale


def on_grid(x: float, n, K: int, rtol: float = 1e-12) -> bool:
    return abs(snap_to_grid(x, n, K) - x) <= rtol * max(1.0, abs(x))


@dataclass
class PairReport:
    admissible: bool
    failures: dict = field(default_factory=dict)
    g_report: Optional[AdmissibilityReport] = None

    def to_json(self) -> dict:
        return {"admissible": self.admissible, "failures": self.failures}


def companion_support_distance(spec: SampleSpectrum, cfg: DomainConfig, zt):
    """Distance from ``zt`` to the support of the sample companion measure
    (eigenvalues and 0) and to the matching population-side bound."""
    zt = np.asarray(zt, dtype=complex)
    d_hat = np.minimum(support_distance(spec.nu_hat, zt), np.abs(zt))
    if cfg.mode is Mode.ReplacementSafe:
        sigma2, _ = cfg.resolved_sigma2(spec)
        d_true = interval_distance(zt, 0.0, support_upper_bound(sigma2, spec.c_n))
    else:
        d_true = np.min([interval_distance(zt, lo, hi) for lo, hi in cfg.nu_support] + [np.abs(zt)], axis=0)
    return d_hat, d_true


def validate_pair(curve_g: PolylineCurve, curve_f: PolylineCurve, spec: SampleSpectrum, cfg: DomainConfig,
                  K: int = 2, fp: FixedPointConfig = DEFAULT_CFG,
                  rule_g: Optional[QuadratureRule] = None, rule_f: Optional[QuadratureRule] = None) -> PairReport:
    """Admissibility of a curve pair for the two-sided (GLSS) estimator.

    (a) ``curve_g`` is admissible and its endpoints lie on the grid
    ``{k / n^K}``; (b) every node of ``curve_f`` has ``|z~| < kappa``, keeps
    distance ``tau`` from the sample companion support and from its
    population-side bound, and ``tau <= |varphi(z~)| <= kappa``; (c) the
    nodes of ``curve_g`` stay ``tau`` away from ``varphi`` of the nodes of
    ``curve_f``.
    """
    rule_g = quadrature(curve_g, GLSS_NODES_G) if rule_g is None else rule_g
    rule_f = quadrature(curve_f, GLSS_NODES_F) if rule_f is None else rule_f
    failures = {}
    g_rep = validate_admissible(curve_g, spec, cfg, rule_g, fp)
    if not g_rep.admissible:
        failures["a_inadmissible"] = g_rep.failing_conditions
    off = [e for e in (curve_g.a, curve_g.b) if not on_grid(e, spec.n, K)]
    if off:
        failures["a_endpoints_off_grid"] = off
    zt = rule_f.nodes
    if np.any(np.abs(zt) >= cfg.kappa):
        failures["b_abs"] = int(np.sum(np.abs(zt) >= cfg.kappa))
    d_hat, d_true = companion_support_distance(spec, cfg, zt)
    near = (d_hat < cfg.tau) | (d_true < cfg.tau)
    if np.any(near):
        failures["b_support_distance"] = [complex(z) for z in zt[near]]
    with np.errstate(all="ignore"):
        vphi = varphi_hat_derivs(spec, zt)[0]
    avp = np.abs(vphi)
    bad_vp = ~((cfg.tau <= avp) & (avp <= cfg.kappa))
    if np.any(bad_vp):
        failures["b_varphi_abs"] = int(np.sum(bad_vp))
    sep = np.min(np.abs(rule_g.nodes[:, None] - vphi[None, :]))
    if not sep >= cfg.tau:
        failures["c_separation"] = float(sep)
    return PairReport(not failures, failures, g_rep)
