"""Seeded synthetic data for the two reference examples and a Monte Carlo harness."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .measures import DiscreteMeasure
from .mp_inverse import SampleSpectrum

MASK64 = (1 << 64) - 1


def splitmix64(base_seed: int, index: int) -> int:
    """SplitMix64 finaliser applied to ``base_seed + (index + 1) * golden``."""
    x = (int(base_seed) + (int(index) + 1) * 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class ModelSpec:
    """Which data set to draw.  ``n`` defaults to ``ceil(20 d)`` for ``Ex1`` and
    ``ceil(d / 2)`` for ``Ex2``."""

    kind: str
    d: int
    n: Optional[int] = None
    seed: int = 0
    custom_eigs: Optional[tuple] = None
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("Ex1", "Ex2", "CustomDiag", "FromFile"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind != "FromFile" and self.d < 1:
            raise ValueError("d must be >= 1")
        if self.n is None and self.kind in ("Ex1", "Ex2", "CustomDiag"):
            n = math.ceil(self.d / 2) if self.kind == "Ex2" else math.ceil(20 * self.d)
            object.__setattr__(self, "n", n)
        if self.n is not None and self.n < 1:
            raise ValueError("n must be >= 1")
        if self.kind == "CustomDiag":
            if self.custom_eigs is None or len(self.custom_eigs) != self.d:
                raise ValueError("CustomDiag needs custom_eigs of length d")
        if self.kind == "FromFile" and not self.path:
            raise ValueError("FromFile needs a path")


def ex1_scales(d: int) -> np.ndarray:
    """Diagonal of B for Ex1: ceil(d/2) ones followed by floor(d/2) entries 1/sqrt(2)."""
    return np.concatenate([np.ones(d - d // 2), np.full(d // 2, np.sqrt(0.5))])


def ex2_scales(d: int) -> np.ndarray:
    """Diagonal of B for Ex2: floor(d/2) entries sqrt(1/2), then sqrt(1/2 + j/d)."""
    j = np.arange(1, d - d // 2 + 1)
    return np.concatenate([np.full(d // 2, np.sqrt(0.5)), np.sqrt(0.5 + j / d)])


def haar_orthogonal(d: int, seed) -> np.ndarray:
    """Haar-distributed orthogonal matrix from QR of a Gaussian matrix.

    The sign of each column is fixed by the sign of ``diag(R)`` so the
    distribution is exactly Haar.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    sgn = np.sign(np.diag(r))
    sgn[sgn == 0] = 1.0
    return q * sgn


def read_matrix_csv(path) -> np.ndarray:
    """Read a d x n matrix of decimal floats (one row per line)."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise OSError(f"{path}:{lineno}: cannot parse row as floats") from exc
            if len(rows[-1]) != len(rows[0]):
                raise OSError(f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(rows[-1])}")
    if not rows:
        raise OSError(f"{path}: empty matrix file")
    return np.asarray(rows)


def generate(spec: ModelSpec):
    """Draw ``(Y, H_truth, Sigma_eigs)`` with ``Y = B X`` of shape ``d x n``.

    For ``FromFile`` no population is known: ``H_truth`` and ``Sigma_eigs``
    are ``None``.
    """
    if spec.kind == "FromFile":
        return read_matrix_csv(spec.path), None, None
    rng = np.random.default_rng(spec.seed)
    d, n = spec.d, spec.n
    if spec.kind == "Ex1":
        scales = ex1_scales(d)
        Y = scales[:, None] * rng.standard_normal((d, n))
    elif spec.kind == "Ex2":
        scales = ex2_scales(d)
        V = haar_orthogonal(d, rng)
        X = rng.integers(0, 2, size=(d, n), dtype=np.int8).astype(float) * 2 - 1
        Y = (V * scales) @ X
    else:
        sig = np.asarray(spec.custom_eigs, dtype=float)
        if np.any(sig < 0):
            raise ValueError("custom eigenvalues must be nonnegative")
        scales = np.sqrt(sig)
        Y = scales[:, None] * rng.standard_normal((d, n))
    sigma_eigs = np.sort(scales**2)
    H = DiscreteMeasure(sigma_eigs, np.full(d, 1.0 / d))
    return Y, H, sigma_eigs


def sample_covariance(Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    return Y @ Y.T / Y.shape[1]


def sample_spectrum(Y) -> SampleSpectrum:
    """Eigenvalues of ``Y Y^T / n`` packaged with ``c_n = d / n``."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or min(Y.shape) < 1:
        raise ValueError("Y must be a nonempty 2-d array")
    d, n = Y.shape
    try:
        evals = np.linalg.eigvalsh(sample_covariance(Y))
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigensolver failed: {exc}") from exc
    return SampleSpectrum.from_eigenvalues(evals, n=n)


# -- Monte Carlo -------------------------------------------------------------

MC_HEADER = ("d", "rep", "estimate", "truth", "error", "abs_error", "runtime_s", "failed")


@dataclass
class McRow:
    d: int
    rep: int
    estimate: float
    truth: float
    error: float
    abs_error: float
    runtime_s: float
    failed: bool
    extra: dict = field(default_factory=dict)


@dataclass
class McTable:
    rows: list

    def for_dim(self, d):
        return [r for r in self.rows if r.d == d]

    def summary(self):
        """Per-dimension mean error, mean |error|, variance and mean runtime over successful rows."""
        out = {}
        for d in sorted({r.d for r in self.rows}):
            ok = [r for r in self.for_dim(d) if not r.failed]
            err = np.array([r.error for r in ok])
            out[d] = {
                "reps": len(self.for_dim(d)),
                "failed": len(self.for_dim(d)) - len(ok),
                "mean_error": float(err.mean()) if ok else math.nan,
                "mean_abs_error": float(np.abs(err).mean()) if ok else math.nan,
                "variance": float(np.var([r.estimate for r in ok], ddof=1)) if len(ok) > 1 else math.nan,
                "mean_runtime_s": float(np.mean([r.runtime_s for r in ok])) if ok else math.nan,
            }
        return out

    def write_csv(self, fh, extra_cols=(), runtime=True):
        """Write the table; ``extra_cols`` appends task-specific columns taken
        from each row's ``extra`` dict.  ``runtime=False`` writes 0 in the
        timing column so files are byte-reproducible."""
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MC_HEADER + tuple(extra_cols))
        for r in self.rows:
            rt = f"{r.runtime_s:.6f}" if runtime else "0"
            w.writerow([r.d, r.rep, repr(r.estimate), repr(r.truth), repr(r.error), repr(r.abs_error), rt,
                        int(r.failed)] + [repr(r.extra.get(k, math.nan)) for k in extra_cols])


def monte_carlo(spec_family, task: Callable, reps: int, base_seed: int, timer=time.perf_counter) -> McTable:
    """Run ``task(Y, H, sigma_eigs, spec) -> (estimate, truth[, extra])`` for each
    model in ``spec_family`` and each replication.

    Replication ``r`` uses seed ``splitmix64(base_seed, r)`` (the same across
    dimensions, so the d-sweep is paired).  A task that raises is recorded as a
    failed row.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    rows = []
    for base in spec_family:
        for r in range(reps):
            spec = ModelSpec(base.kind, base.d, base.n, splitmix64(base_seed, r), base.custom_eigs, base.path)
            t0 = timer()
            try:
                Y, H, sig = generate(spec)
                out = task(Y, H, sig, spec)
                est, truth = float(out[0]), float(out[1])
                extra = out[2] if len(out) > 2 else {}
                failed = False
            except Exception as exc:  # noqa: BLE001 - recorded per row
                est = truth = math.nan
                extra = {"error": repr(exc)}
                failed = True
            dt = timer() - t0
            err = est - truth
            rows.append(McRow(base.d, r, est, truth, err, abs(err), dt, failed, extra))
    return McTable(rows)
