"""Forward Marchenko-Pastur map: from a population spectrum H and ratio c to the
limiting sample spectrum nu, plus the conformal maps between the two sides."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fixed_point
from .errors import DomainError, IterationError, SingularityError
from .fixed_point import FixedPointConfig
from .measures import DiscreteMeasure, stieltjes, stieltjes_deriv

MEMBERSHIP_MARGIN = 1e-12
NEWTON_STEPS = 60

FORWARD_CFG = FixedPointConfig(tol=1e-13, max_iter=400)


@dataclass(frozen=True)
class ForwardModel:
    """Population spectral distribution ``H`` together with the aspect ratio ``c``.

    ``c = 0`` is accepted as the degenerate limit in which ``nu = H``.
    """

    H: DiscreteMeasure
    c: float

    def __post_init__(self):
        if not self.H.is_probability():
            raise ValueError("H must be a probability measure")
        if np.all(self.H.atoms == 0):
            raise ValueError("H must differ from delta_0")
        if not self.c >= 0:
            raise ValueError("c must be nonnegative")

    def nu_stieltjes(self, w, cfg: FixedPointConfig = FORWARD_CFG):
        """Stieltjes transform of the deterministic equivalent at any non-real ``w``."""
        w = np.asarray(w, dtype=complex)
        flip = w.imag < 0
        wu = np.where(flip, np.conj(w), w)
        if np.any(wu.imag == 0):
            raise DomainError("nu_stieltjes needs Im(w) != 0")
        s = solve_mp(self, wu, cfg)
        out = np.where(flip, np.conj(s), s)
        return out if out.ndim else complex(out)


def _mp_rhs(model, zt, s):
    c = model.c
    denom = model.H.atoms * (1 - c * zt * s - c)[..., None] - zt[..., None]
    return np.sum(model.H.weights / denom, axis=-1), denom


def _in_q_set(c, zt, s):
    # Im(c s + (c-1)/z~) > 0, the branch selector of the MP equation
    if c == 0:
        return s.imag > 0
    return (c * s + (c - 1) / zt).imag > MEMBERSHIP_MARGIN


def _newton(model, zt, s, tol, steps=NEWTON_STEPS):
    c = model.c
    for _ in range(steps):
        with np.errstate(all="ignore"):
            F, denom = _mp_rhs(model, zt, s)
            dF = np.sum(model.H.weights * model.H.atoms * c * zt[..., None] / denom**2, axis=-1)
            step = (F - s) / (dF - 1)
        fin = np.isfinite(step)
        s = np.where(fin, s - step, s)
        if np.all(~fin | (np.abs(step) <= tol * 1e-2)):
            break
    return s


def solve_mp(model: ForwardModel, ztilde, cfg: FixedPointConfig = FORWARD_CFG):
    """Solve ``s = int dH(l) / (l (1 - c z~ s - c) - z~)`` for ``s = s_nu(z~)``.

    Damped fixed-point iteration from ``s0 = i / (1 + |z~|)``; entries that
    have not converged within ``cfg.max_iter`` are polished by Newton steps.
    Raises :class:`IterationError` if an entry still fails, or if the converged
    root is not on the Stieltjes branch.
    """
    scalar = np.ndim(ztilde) == 0
    zt = np.atleast_1d(np.asarray(ztilde, dtype=complex))
    if np.any(zt.imag <= 0):
        raise DomainError("solve_mp needs Im(z~) > 0")

    def F(s, idx):
        return _mp_rhs(model, zt[idx], s)[0]

    s0 = 1j / (1 + np.abs(zt))
    s, _, resid, done = fixed_point.iterate(F, s0, cfg)
    if not np.all(done):
        bad = ~done
        s[bad] = _newton(model, zt[bad], s[bad], cfg.tol)
    with np.errstate(all="ignore"):
        resid = np.abs(_mp_rhs(model, zt, s)[0] - s)
    fail = ~(resid <= 10 * cfg.tol) | ~_in_q_set(model.c, zt, s)
    if np.any(fail):
        j = int(np.argmax(fail))
        raise IterationError(
            f"MP equation did not converge at z~={zt[j]} (residual {resid[j]:.3g})",
            last_iterate=complex(s[j]),
            residual=float(resid[j]),
            index=j,
        )
    return complex(s[0]) if scalar else s


def phi_map(model: ForwardModel, z):
    """``Phi_{H,c}(z) = (1 - c z s_H(z) - c) z``."""
    c = model.c
    sH = stieltjes(model.H, z)
    return (1 - c * z * sH - c) * z


def phi_map_derivs(model: ForwardModel, z):
    """First and second derivatives of :func:`phi_map` from the exact ``s_H``."""
    c = model.c
    s = stieltjes(model.H, z)
    s1 = stieltjes_deriv(model.H, z, 1)
    s2 = stieltjes_deriv(model.H, z, 2)
    # Phi = (1 - c) z - c z^2 s
    d1 = (1 - c) - c * (2 * z * s + z**2 * s1)
    d2 = -c * (2 * s + 4 * z * s1 + z**2 * s2)
    return d1, d2


def varphi_map(nu_stieltjes, c: float, ztilde):
    """``varphi(z~) = -1 / (c s_nu(z~) - (1 - c)/z~)``, the inverse of :func:`phi_map`."""
    zt = complex(ztilde) if np.ndim(ztilde) == 0 else np.asarray(ztilde, dtype=complex)
    su = c * nu_stieltjes(zt) - (1 - c) / zt
    if np.any(np.abs(su) < 1e-300):
        raise SingularityError(f"companion Stieltjes transform vanishes at z~={ztilde}")
    return -1 / su


def theoretical_domain_member(model: ForwardModel, theta: float, z):
    """Membership in ``{Im Phi(z) > 0, |c z Im(z s_H) / Im Phi(z)| < theta}``."""
    z = complex(z) if np.ndim(z) == 0 else np.asarray(z, dtype=complex)
    if np.any(np.imag(z) <= 0):
        raise DomainError("domain membership needs Im(z) > 0")
    c = model.c
    zs = z * stieltjes(model.H, z)
    im_phi = np.imag((1 - c * zs - c) * z)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(c * z * np.imag(zs) / im_phi)
    first = im_phi > 0
    if theta == np.inf:
        return first
    return first & (ratio < theta)


def support_upper_bound(sigma2: float, c: float) -> float:
    """``sigma^2 (1 + sqrt(c))^2``, an upper bound on the support of nu."""
    if sigma2 <= 0 or c < 0:
        raise ValueError("need sigma2 > 0 and c >= 0")
    return sigma2 * (1 + np.sqrt(c)) ** 2


def density_grid(model: ForwardModel, xs, eta: float, cfg: FixedPointConfig = FORWARD_CFG, return_s=False):
    """``Im s_nu(x + i eta) / pi`` on a grid of real ``x``.

    Small ``eta`` is reached by continuation: the solve starts at ``eta = 1``
    and walks geometrically down, Newton-polishing from the previous root, so
    every point stays on the Stieltjes branch.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    xs = np.asarray(xs, dtype=float)
    etas = [eta] if eta >= 1 else list(np.geomspace(1.0, eta, max(2, int(np.ceil(4 * np.log10(1 / eta))) + 1)))
    zt = xs + 1j * etas[0]
    try:
        s = solve_mp(model, zt, cfg)
    except IterationError as exc:
        raise IterationError(f"density grid point {exc.index}: {exc}", exc.last_iterate, exc.residual, exc.index)
    for e in etas[1:]:
        zt = xs + 1j * e
        s = _newton(model, zt, s, cfg.tol)
        with np.errstate(all="ignore"):
            resid = np.abs(_mp_rhs(model, zt, s)[0] - s)
        redo = ~(resid <= 10 * cfg.tol) | ~_in_q_set(model.c, zt, s)
        if np.any(redo):
            idx = np.flatnonzero(redo)
            try:
                s[idx] = solve_mp(model, zt[idx], cfg)
            except IterationError as exc:
                j = int(idx[exc.index])
                raise IterationError(f"density grid point {j}: {exc}", exc.last_iterate, exc.residual, j)
    dens = np.maximum(s.imag, 0.0) / np.pi
    return (dens, s) if return_s else dens
