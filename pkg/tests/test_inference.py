import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtri

from mpinv.contours import quadrature, rectangle_curve
from mpinv.errors import SingularityError
from mpinv.estimators import function_from_name
from mpinv.inference import (
    VARIANCE_NODES_2,
    CiMoments,
    CltConfig,
    _c_kernel,
    c_hat,
    ci_moments,
    ci_report,
    confidence_interval,
    e_hat,
    gaussian_quantile,
    theoretical_kernels,
)
from mpinv.mp_forward import ForwardModel
from mpinv.mp_inverse import SampleSpectrum

from conftest import EX1_H, wishart_eigs

WIDE = rectangle_curve(-0.2, 1.6, 0.5)
GRID = [-1 + 0.3j, -0.5 + 0.5j, 0.75 + 0.6j, 1.5 + 0.4j, -0.2 + 0.8j]


def test_config_validation():
    with pytest.raises(ValueError):
        CltConfig(beta=3)
    with pytest.raises(ValueError):
        CltConfig(alpha=1.0)
    with pytest.raises(ValueError):
        e_hat(SampleSpectrum.from_eigenvalues([1.0], c=0.5), 1j, beta=0)


def test_e_hat_zero_for_complex_case(ex1_50):
    assert e_hat(ex1_50[3], -0.5 + 0.5j, beta=2) == 0


def test_e_hat_conjugate_symmetry(ex1_50):
    sp = ex1_50[3]
    for z in GRID:
        assert e_hat(sp, np.conj(z)) == pytest.approx(np.conj(e_hat(sp, z)), rel=1e-10)


def test_c_hat_symmetry_and_beta_scaling(ex1_50):
    sp = ex1_50[3]
    z1, z2 = -0.5 + 0.5j, 1.5 + 0.4j
    c12 = c_hat(sp, z1, z2)
    assert c_hat(sp, z2, z1) == pytest.approx(c12, rel=1e-12)
    assert c_hat(sp, z1, z2, beta=2) == pytest.approx(c12 / 2, rel=1e-12)
    assert c_hat(sp, np.conj(z1), np.conj(z2)) == pytest.approx(np.conj(c12), rel=1e-10)


def test_c_kernel_vanishes_for_identity_map():
    z1, z2 = np.array([0.3 + 1j]), np.array([2 + 0.5j])
    assert _c_kernel(0.5, 1, z1, z2, z1, z2, np.ones(1), np.ones(1)) == pytest.approx(0, abs=1e-14)


def test_c_hat_rejects_coincident_arguments(ex1_50):
    with pytest.raises(SingularityError):
        c_hat(ex1_50[3], -0.5 + 0.5j, -0.5 + 0.5j + 1e-10)


def test_kernels_agree_with_population_at_large_d():
    d = 2000
    scales = np.concatenate([np.ones(d // 2), np.full(d // 2, math.sqrt(0.5))])
    evals = wishart_eigs(scales, 20 * d, np.random.default_rng(7))
    sp = SampleSpectrum.from_eigenvalues(np.clip(evals, 0, None), n=20 * d)
    model = ForwardModel(EX1_H, sp.c_n)
    for z in GRID:
        et = theoretical_kernels(model, 1, z)
        assert abs(e_hat(sp, z) - et) <= 0.01 * abs(et)
    for z1 in GRID:
        for z2 in GRID:
            if z1 == z2:
                continue
            ch, ct = c_hat(sp, z1, z2), theoretical_kernels(model, 1, z1, z2)
            assert abs(ch - ct) <= 0.02 * abs(ct)


def test_theoretical_kernels_by_finite_differences():
    # c(z1, z2) = d^2/dz1 dz2 [log((z1 - z2)/(Phi(z1) - Phi(z2)))] / (beta c^2)
    from mpinv.mp_forward import phi_map

    model = ForwardModel(EX1_H, 0.3)
    z1, z2, h = -0.4 + 0.6j, 1.3 + 0.5j, 1e-4

    def L(a, b):
        return np.log((a - b) / (phi_map(model, a) - phi_map(model, b)))

    fd = (L(z1 + h, z2 + h) - L(z1 + h, z2 - h) - L(z1 - h, z2 + h) + L(z1 - h, z2 - h)) / (4 * h * h)
    assert abs(fd / 0.09 - theoretical_kernels(model, 1, z1, z2)) <= 1e-5
    assert theoretical_kernels(model, 2, z1) == 0
    assert theoretical_kernels(model, 1, z2, z1) == pytest.approx(theoretical_kernels(model, 1, z1, z2), rel=1e-12)


def test_moments_complex_case_has_no_bias(ex1_50):
    m = ci_moments(ex1_50[3], function_from_name("cube"), WIDE, beta=2)
    assert m.mu_n == m.estimate and m.sigma2_n >= 0


def test_variance_positive_and_real_case_doubles(ex1_50):
    sp = ex1_50[3]
    g = function_from_name("exp")
    m1 = ci_moments(sp, g, WIDE, beta=1)
    m2 = ci_moments(sp, g, WIDE, beta=2)
    assert m1.sigma2_n > 0 and not m1.clamped
    assert m1.sigma2_n == pytest.approx(2 * m2.sigma2_n, rel=1e-12)


def test_variance_scales_as_inverse_n_squared(ex1_50):
    # duplicating every eigenvalue doubles d and n at fixed c_n and nu_hat, so
    # s_hat and the kernels are unchanged and only the 1/n^2 prefactor moves
    sp = ex1_50[3]
    g = function_from_name("cube")
    rules = (quadrature(WIDE), quadrature(WIDE, VARIANCE_NODES_2))
    m = ci_moments(sp, g, WIDE, rules=rules)
    doubled = SampleSpectrum(sp.nu_hat, sp.c_n, 2 * sp.d, 2 * sp.n)
    m2 = ci_moments(doubled, g, WIDE, rules=rules)
    assert m2.estimate == m.estimate
    assert abs(m2.sigma2_n - m.sigma2_n / 4) <= 1e-12 * m.sigma2_n
    assert m.mu_n - m.estimate == pytest.approx(2 * (m2.mu_n - m2.estimate), rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_unclamped_variance_not_negative_on_seeded_runs(seed):
    from mpinv.simgen import ModelSpec, generate, sample_spectrum

    Y, _, _ = generate(ModelSpec("Ex1", 50, seed=100 + seed))
    m = ci_moments(sample_spectrum(Y), function_from_name("exp"), WIDE)
    assert m.sigma2_raw >= -1e-12 and m.sigma2_n >= 0


def test_interval_symmetric_about_centre(ex1_50):
    lo, hi, m = confidence_interval(ex1_50[3], function_from_name("cube"), WIDE)
    assert hi > lo
    assert (lo + hi) / 2 == pytest.approx(m.mu_n, rel=1e-12)
    assert (hi - lo) / 2 == pytest.approx(1.959963984540054 * math.sqrt(m.sigma2_n), rel=1e-9)


def test_interval_collapses_as_alpha_approaches_one():
    m = CiMoments(1.0, 1.1, 0.04, 0.04, False, 100)
    lo, hi, _ = confidence_interval(None, None, None, cfg=CltConfig(alpha=1 - 1e-9), moments=m)
    assert hi - lo <= 1e-8
    lo, hi, _ = confidence_interval(None, None, None, cfg=CltConfig(alpha=0.05), moments=m)
    assert lo < 1.1 < hi


def test_report_keys():
    m = CiMoments(1.0, 1.1, 0.04, 0.04, False, 100)
    rep = ci_report(0.7, 1.5, m, CltConfig())
    assert set(rep) == {"estimate", "mu_n", "sigma2_n", "lo", "hi", "alpha", "beta"}


def test_quantile_examples():
    assert gaussian_quantile(0.5) == 0.0
    assert gaussian_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-9)
    for p in (0, 1, -0.1, 1.5):
        with pytest.raises(ValueError):
            gaussian_quantile(p)


@settings(max_examples=200)
@given(st.floats(1e-12, 1 - 1e-12))
def test_quantile_against_ndtri(p):
    q = gaussian_quantile(p)
    assert abs(q - ndtri(p)) <= 1e-8
    assert abs(gaussian_quantile(1 - p) - ndtri(1 - p)) <= 1e-8
