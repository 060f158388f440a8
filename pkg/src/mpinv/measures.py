"""Finite atomic measures on [0, inf) and their Stieltjes transforms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SignedMeasureError

MERGE_TOL = 1e-12
NEG_CLAMP = -1e-10


def _merge(atoms, weights):
    order = np.argsort(atoms, kind="stable")
    atoms = atoms[order]
    weights = weights[order]
    out_a, out_w = [], []
    for a, w in zip(atoms, weights):
        if out_a and a - out_a[-1] < MERGE_TOL:
            out_w[-1] += w
        else:
            out_a.append(a)
            out_w.append(w)
    return np.asarray(out_a, dtype=float), np.asarray(out_w, dtype=float)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point masses ``sum_j w_j delta_{atoms_j}``.

    Atoms closer than ``1e-12`` are merged on construction, so two atoms never
    sit on top of each other inside a Stieltjes sum.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_1d(np.asarray(self.atoms, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if atoms.ndim != 1 or atoms.shape != weights.shape:
            raise ValueError("atoms and weights must be 1-d arrays of equal length")
        if atoms.size == 0:
            raise ValueError("a measure needs at least one atom")
        if not np.all(np.isfinite(atoms)) or np.any(atoms < 0):
            raise ValueError("atoms must be finite and nonnegative")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise ValueError("weights must be finite and strictly positive")
        atoms, weights = _merge(atoms, weights)
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def dirac(cls, x: float) -> "DiscreteMeasure":
        return cls(np.array([x]), np.array([1.0]))

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    def is_probability(self, tol: float = 1e-12) -> bool:
        return abs(self.total_mass - 1.0) <= tol

    def __len__(self):
        return self.atoms.size

    def integrate(self, g) -> float:
        """``sum_j w_j g(atom_j)``."""
        vals = np.asarray(g(self.atoms))
        if np.iscomplexobj(vals):
            return complex(math.fsum(vals.real * self.weights), math.fsum(vals.imag * self.weights))
        return math.fsum(vals * self.weights)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.weights)])
        return cum[np.searchsorted(self.atoms, x, side="right")]


def _check_off_atoms(mu, z):
    z = np.asarray(z, dtype=complex)
    gap = np.abs(z[..., None] - mu.atoms)
    hit = gap == 0
    if np.any(hit):
        idx = np.argwhere(hit)[0]
        atom = int(idx[-1])
        raise DomainError(
            f"z={complex(z[tuple(idx[:-1])])} coincides with atom {atom} "
            f"({mu.atoms[atom]})",
            index=atom,
        )


def stieltjes(mu: DiscreteMeasure, z):
    """Stieltjes transform ``sum_j w_j / (lambda_j - z)``.

    Scalar ``z`` uses exactly rounded (``math.fsum``) summation; array ``z``
    is vectorised over a ``(..., n_atoms)`` table with numpy's pairwise sum.
    """
    if np.ndim(z) == 0:
        z = complex(z)
        terms = []
        for j, (lam, w) in enumerate(zip(mu.atoms, mu.weights)):
            diff = lam - z
            if diff == 0:
                raise DomainError(f"z={z} coincides with atom {j} ({lam})", index=j)
            terms.append(w / diff)
        return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))
    z = np.asarray(z, dtype=complex)
    _check_off_atoms(mu, z)
    return np.sum(mu.weights / (mu.atoms - z[..., None]), axis=-1)


def stieltjes_deriv(mu: DiscreteMeasure, z, order: int = 1):
    """``order``-th derivative in z: ``order! * sum_j w_j / (lambda_j - z)^(order+1)``."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order!r}")
    fact = math.factorial(order)
    if np.ndim(z) == 0:
        z = complex(z)
        terms = []
        for j, (lam, w) in enumerate(zip(mu.atoms, mu.weights)):
            diff = lam - z
            if diff == 0:
                raise DomainError(f"z={z} coincides with atom {j} ({lam})", index=j)
            terms.append(w / diff ** (order + 1))
        return fact * complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))
    z = np.asarray(z, dtype=complex)
    _check_off_atoms(mu, z)
    return fact * np.sum(mu.weights / (mu.atoms - z[..., None]) ** (order + 1), axis=-1)


def underline_transform(nu: DiscreteMeasure, c: float) -> DiscreteMeasure:
    """Companion measure ``(1 - c) delta_0 + c nu``.

    Only defined as a measure for ``c <= 1``; for ``c > 1`` use
    :func:`underline_stieltjes`, which is valid for every ``c > 0``.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    if c > 1:
        raise SignedMeasureError(
            f"(1 - c) delta_0 + c nu has negative mass at 0 for c={c}; "
            "use underline_stieltjes(nu, c, z) instead"
        )
    if c == 1:
        return nu
    atoms = np.concatenate([[0.0], nu.atoms])
    weights = np.concatenate([[1.0 - c], c * np.asarray(nu.weights)])
    return DiscreteMeasure(atoms, weights)


def underline_stieltjes(nu: DiscreteMeasure, c: float, z):
    """``c s_nu(z) - (1 - c)/z``, the Stieltjes transform of the companion measure."""
    z = complex(z) if np.ndim(z) == 0 else np.asarray(z, dtype=complex)
    return c * stieltjes(nu, z) - (1.0 - c) / z


def underline_stieltjes_deriv(nu: DiscreteMeasure, c: float, z, order: int = 1):
    z = complex(z) if np.ndim(z) == 0 else np.asarray(z, dtype=complex)
    base = c * stieltjes_deriv(nu, z, order)
    if order == 1:
        return base + (1.0 - c) / z**2
    return base - 2.0 * (1.0 - c) / z**3


def from_eigenvalues(evals) -> DiscreteMeasure:
    """Uniform measure on a list of eigenvalues (duplicates merged).

    Values in ``[-1e-10, 0)`` are eigensolver dust and clamped to 0; anything
    more negative is rejected.
    """
    evals = np.asarray(evals, dtype=float).ravel()
    if evals.size == 0:
        raise ValueError("eigenvalue array is empty")
    if not np.all(np.isfinite(evals)):
        raise ValueError("eigenvalues must be finite")
    bad = evals < NEG_CLAMP
    if np.any(bad):
        j = int(np.argmax(bad))
        raise ValueError(f"eigenvalue {j} = {evals[j]} is negative beyond clamp threshold")
    evals = np.where(evals < 0, 0.0, evals)
    return DiscreteMeasure(evals, np.full(evals.size, 1.0 / evals.size))


def support_distance(mu: DiscreteMeasure, z) -> float:
    """``min_j |z - lambda_j|``."""
    z = np.asarray(z, dtype=complex)
    return np.min(np.abs(z[..., None] - mu.atoms), axis=-1)


def interval_distance(z, lo: float, hi: float):
    """Euclidean distance from z to the real segment [lo, hi]."""
    z = np.asarray(z, dtype=complex)
    x = np.clip(z.real, lo, hi)
    return np.hypot(z.real - x, z.imag)


def read_eigenvalue_file(path) -> np.ndarray:
    """Read a plain-text file with one float per line."""
    vals = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                vals.append(float(line))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: cannot parse {line!r} as float") from exc
    if not vals:
        raise ValueError(f"{path}: no eigenvalues found")
    return np.asarray(vals)
