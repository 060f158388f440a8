"""Vectorised damped fixed-point iteration shared by the forward and inverse solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FixedPointConfig:
    """Stopping rule and damping for ``x <- (1 - omega) x + omega F(x)``.

    ``tol`` bounds ``|F(x) - x|``, i.e. the distance between successive
    undamped iterates.
    """

    tol: float = 1e-9
    max_iter: int = 500
    damping_init: float = 1.0

    def __post_init__(self):
        if not self.tol >= 1e-14:
            raise ValueError("tol must be >= 1e-14")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.damping_init <= 1:
            raise ValueError("damping_init must lie in (0, 1]")


GROW_PATIENCE = 3


def iterate(F, x0, cfg: FixedPointConfig):
    """Run the damped iteration elementwise on a complex array.

    ``F`` maps an array of iterates to an array of the same shape; it is only
    called on still-active entries.  Returns ``(x, iterations, residual,
    converged)`` where ``x`` holds ``F(x_k)`` for the first ``k`` with
    ``|F(x_k) - x_k| <= tol`` and ``iterations`` counts applications of ``F``.
    Entries that produce non-finite values are frozen as unconverged.
    """
    x = np.array(x0, dtype=complex, copy=True).ravel()
    shape = np.shape(x0)
    m = x.size
    omega = np.full(m, float(cfg.damping_init))
    prev = np.full(m, np.inf)
    grow = np.zeros(m, dtype=int)
    iters = np.zeros(m, dtype=int)
    resid = np.full(m, np.inf)
    done = np.zeros(m, dtype=bool)
    active = np.arange(m)
    for _ in range(cfg.max_iter):
        if active.size == 0:
            break
        xa = x[active]
        with np.errstate(all="ignore"):
            fx = np.asarray(F(xa, active), dtype=complex)
        iters[active] += 1
        r = np.abs(fx - xa)
        bad = ~np.isfinite(r)
        resid[active] = r
        ok = (r <= cfg.tol) & ~bad
        x[active[ok]] = fx[ok]
        done[active[ok]] = True

        upd = ~ok & ~bad
        ia = active[upd]
        grew = r[upd] > prev[ia]
        grow[ia] = np.where(grew, grow[ia] + 1, 0)
        halve = grow[ia] >= GROW_PATIENCE
        omega[ia[halve]] *= 0.5
        grow[ia[halve]] = 0
        prev[ia] = r[upd]
        w = omega[ia]
        x[ia] = (1 - w) * xa[upd] + w * fx[upd]
        active = ia
    return x.reshape(shape), iters.reshape(shape), resid.reshape(shape), done.reshape(shape)
