from types import SimpleNamespace

import numpy as np
import pytest

from mpinv.errors import DomainError
from mpinv.fixed_point import FixedPointConfig
from mpinv.measures import DiscreteMeasure, stieltjes
from mpinv.mp_forward import ForwardModel
from mpinv.mp_inverse import (
    FailureReason,
    SampleSpectrum,
    estimate_stieltjes,
    estimate_stieltjes_ext,
    invert,
    phi_hat_derivs,
    t_operator,
    varphi_hat_derivs,
    virtual_t,
)
from mpinv.simgen import ModelSpec, generate, sample_spectrum

from conftest import EX1_H

TIGHT = FixedPointConfig(tol=1e-14, max_iter=5000)


def test_sample_spectrum_validation():
    sp = SampleSpectrum.from_eigenvalues([1.0, 2.0, 2.0], n=30)
    assert sp.d == 3 and sp.c_n == pytest.approx(0.1)
    assert sp.with_n(60).c_n == pytest.approx(0.05)
    assert SampleSpectrum.from_eigenvalues([1.0], c=0.5).n == pytest.approx(2.0)
    with pytest.raises(ValueError):
        SampleSpectrum(sp.nu_hat, 0.2, 3, 30)
    with pytest.raises(ValueError):
        SampleSpectrum.from_eigenvalues([1.0])


def test_t_operator_examples():
    zero = SampleSpectrum.from_eigenvalues([0.0], n=10)
    assert t_operator(zero, 1 + 1j, 0.3j) == 0
    one = SimpleNamespace(nu_hat=DiscreteMeasure.dirac(1.0), c_n=0.0)
    assert t_operator(one, 2.0, 0.0) == pytest.approx(-1.0)
    with pytest.raises(DomainError) as exc:
        t_operator(one, 1.0, 0.0)
    assert exc.value.index == 0


def test_t_operator_identity():
    rng = np.random.default_rng(0)
    sp = SampleSpectrum.from_eigenvalues(rng.uniform(0.2, 2, 30), n=300)
    for _ in range(10):
        z = complex(rng.normal(), rng.uniform(0.1, 2))
        v = complex(rng.normal(), rng.uniform(0.1, 2))
        w = (1 - sp.c_n * v) * z
        assert abs(t_operator(sp, z, v) - (1 + w * stieltjes(sp.nu_hat, w))) <= 1e-12


def test_virtual_roundtrip_single_point():
    model = ForwardModel(EX1_H, 1 / 20)
    z = -1 + 0.1j
    r = invert(virtual_t(model.nu_stieltjes), model.c, z, TIGHT)
    assert r.exists
    assert abs(r.s_hat - stieltjes(EX1_H, z)) <= 1e-8


def test_dirac_zero_candidate():
    sp = SampleSpectrum.from_eigenvalues([0.0, 0.0], n=20)
    z = np.array([-1 + 0.5j, 0.5 + 0.5j])
    r = estimate_stieltjes(sp, z)
    assert np.allclose(r.s_hat, -1 / z, atol=1e-15)
    # exists iff Im(Phi) > 0 and ratio < 1 for the candidate
    phi = (1 - sp.c_n * z * (-1 / z) - sp.c_n) * z
    assert np.array_equal(r.exists, phi.imag > 1e-12)


def test_invariants_when_exists(ex1_200):
    sp = ex1_200[3]
    z = np.array([x + 1j * y for x in np.linspace(-1.5, 2, 15) for y in (0.02, 0.2, 0.8)])
    r = estimate_stieltjes(sp, z)
    e = r.exists
    assert np.all(r.s_hat[e].imag > 0) and np.all(r.phi_hat[e].imag > 0) and np.all(r.ratio[e] < 1)
    # on exists the fixed-point residual of the estimating equation is small
    lam, w = sp.nu_hat.atoms, sp.nu_hat.weights
    s, phi = r.s_hat[e], r.phi_hat[e]
    rhs = np.sum(w / (lam - phi[:, None]), axis=1)
    # s_nu_hat(Phi) relation: Phi s_nu(Phi) = z s(z)
    assert np.max(np.abs(phi * rhs - z[e] * s)) <= 1e-7
    assert all((fr is None) == ex for fr, ex in zip(r.failure_reason, e))


def test_failure_reasons_reported(ex1_200):
    sp = ex1_200[3]
    r = estimate_stieltjes(sp, 0.8 + 0.01j)
    assert not r.exists and r.failure_reason is not None
    r = estimate_stieltjes(sp, -1 + 0.5j, FixedPointConfig(max_iter=1))
    assert not r.exists and r.failure_reason is FailureReason.NoConvergence


def test_lower_half_plane_rejected(ex1_200):
    with pytest.raises(DomainError):
        estimate_stieltjes(ex1_200[3], 1 - 1j)
    with pytest.raises(ValueError):
        estimate_stieltjes_ext(ex1_200[3], 1.0)


def test_uniqueness_from_two_starts(ex1_200):
    sp = ex1_200[3]
    z = np.array([-1 + 0.1j, 0.2 + 0.5j, 1.6 + 0.3j, -0.3 + 0.05j])
    a = estimate_stieltjes(sp, z)
    b = estimate_stieltjes(sp, z, v0=1 + 2j)
    both = a.exists & b.exists
    assert both.sum() >= 3
    assert np.max(np.abs(a.s_hat[both] - b.s_hat[both])) <= 1e-9


def test_extension_conjugates(ex1_200):
    sp = ex1_200[3]
    z = np.array([-1 + 0.1j, 0.8 + 0.01j, 1.2 + 0.4j])
    up = estimate_stieltjes_ext(sp, z)
    lo = estimate_stieltjes_ext(sp, np.conj(z))
    assert np.array_equal(up.exists, lo.exists)
    assert list(up.failure_reason) == list(lo.failure_reason)
    assert np.allclose(lo.s_hat, np.conj(up.s_hat), atol=0)


def test_cauchy_riemann(ex1_200):
    sp = ex1_200[3]
    h = 1e-5
    for z in (-1 + 0.3j, 0.5 + 0.6j, 1.8 + 0.2j):
        f = lambda w: estimate_stieltjes(sp, w, TIGHT).s_hat  # noqa: E731
        dx = (f(z + h) - f(z - h)) / (2 * h)
        dy = (f(z + 1j * h) - f(z - 1j * h)) / (2 * h)
        assert abs(dy - 1j * dx) <= 1e-4


def test_im_phi_nonpositive_has_no_valid_fixed_point():
    # c = 2 (Ex2) produces converged fixed points with Im Phi <= 0 left of the origin
    Y, _, _ = generate(ModelSpec("Ex2", 100, seed=1))
    sp = sample_spectrum(Y)
    rng = np.random.default_rng(11)
    grid = np.array([x + 1j * y for x in np.linspace(-0.6, -0.4, 5) for y in (0.01, 0.02, 0.04)])
    r = estimate_stieltjes(sp, grid)
    pts = grid[np.array([fr is FailureReason.ImPhiNonPositive for fr in r.failure_reason])]
    assert pts.size > 0
    for z in pts[:5]:
        starts = rng.normal(size=8) + 1j * rng.uniform(0.1, 3, 8)
        for v0 in starts:
            q = estimate_stieltjes(sp, z, v0=v0)
            assert not q.exists


def test_consistency_improves_with_d():
    z = np.array([-1 + 0.1j, -0.5 + 0.3j, 0.2 + 0.6j, 1.6 + 0.4j, 2 + 0.1j])
    truth = stieltjes(EX1_H, z)
    sups = {}
    for d in (50, 200):
        errs = []
        for seed in range(5):
            Y, _, _ = generate(ModelSpec("Ex1", d, seed=seed))
            r = estimate_stieltjes(sample_spectrum(Y), z)
            assert np.all(r.exists)
            errs.append(np.max(np.abs(r.s_hat - truth)))
        sups[d] = np.mean(errs)
    assert sups[200] < sups[50]


def test_phi_hat_inverse_pair_identity(ex1_200):
    sp = ex1_200[3]
    z = np.array([-1 + 0.1j, 0.5 + 0.6j, 1.7 + 0.3j])
    r = estimate_stieltjes(sp, z)
    d1, _ = phi_hat_derivs(sp, z, result=r)
    _, p1, _ = varphi_hat_derivs(sp, r.phi_hat)
    assert np.max(np.abs(d1 * p1 - 1)) <= 1e-12


def test_phi_hat_derivs_nan_when_missing(ex1_200):
    d1, d2 = phi_hat_derivs(ex1_200[3], 0.8 + 0.01j)
    assert np.isnan(d1) and np.isnan(d2)


@pytest.mark.parametrize("z", [-1 + 0.1j, 0.5 + 0.6j, 1.7 + 0.3j, -0.2 - 0.4j])
def test_phi_hat_derivs_finite_difference(ex1_200, z):
    sp = ex1_200[3]
    h = 1e-5
    phi = lambda w: estimate_stieltjes_ext(sp, w, TIGHT).phi_hat  # noqa: E731
    d1, d2 = phi_hat_derivs(sp, z, TIGHT)
    fd1 = (phi(z + h) - phi(z - h)) / (2 * h)
    fd2 = (phi_hat_derivs(sp, z + h, TIGHT)[0] - phi_hat_derivs(sp, z - h, TIGHT)[0]) / (2 * h)
    assert abs(fd1 - d1) <= 1e-6 * abs(d1)
    assert abs(fd2 - d2) <= 1e-6 * abs(d2)
