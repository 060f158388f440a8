import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpinv.simgen import (
    MC_HEADER,
    ModelSpec,
    generate,
    haar_orthogonal,
    monte_carlo,
    read_matrix_csv,
    sample_covariance,
    sample_spectrum,
    ex2_scales,
    splitmix64,
)


def test_model_spec_defaults_and_validation():
    assert ModelSpec("Ex1", 50).n == 1000
    assert ModelSpec("Ex2", 51).n == 26
    for kw in ({"kind": "Ex3", "d": 5}, {"kind": "Ex1", "d": 0}, {"kind": "Ex1", "d": 5, "n": 0},
               {"kind": "CustomDiag", "d": 2, "custom_eigs": (1.0,)}, {"kind": "FromFile", "d": 0}):
        with pytest.raises(ValueError):
            ModelSpec(**kw)


def test_ex1_population_at_d4():
    _, H, sig = generate(ModelSpec("Ex1", 4, seed=0))
    assert np.allclose(sig, [0.5, 0.5, 1.0, 1.0])
    assert H.cdf(0.5 + 1e-12) == pytest.approx(0.5) and H.cdf(1.0 + 1e-12) == pytest.approx(1.0)


def test_ex2_population_close_to_limit():
    d = 1000
    _, H, _ = generate(ModelSpec("Ex2", d, seed=0))
    for x in np.linspace(0.4, 1.1, 71):
        limit = 0.0 if x < 0.5 else min(1.0, 0.5 + (x - 0.5))
        # evaluate just above x so atoms landing on x by rounding are counted
        assert abs(H.cdf(x + 1e-12) - limit) <= 2 / d


def test_generate_deterministic_and_shaped():
    a = generate(ModelSpec("Ex2", 30, seed=5))[0]
    b = generate(ModelSpec("Ex2", 30, seed=5))[0]
    c = generate(ModelSpec("Ex2", 30, seed=6))[0]
    assert a.shape == (30, 15) and np.array_equal(a, b) and not np.array_equal(a, c)


def test_custom_diag():
    Y, H, sig = generate(ModelSpec("CustomDiag", 3, n=10, seed=1, custom_eigs=(0.0, 1.0, 4.0)))
    assert np.allclose(sig, [0, 1, 4]) and np.all(Y[0] == 0)
    with pytest.raises(ValueError):
        generate(ModelSpec("CustomDiag", 2, n=3, custom_eigs=(-1.0, 1.0)))


def test_sample_spectrum_small_example():
    sp = sample_spectrum(np.array([[1.0, 2.0, 2.0]]))
    assert sp.eigenvalues == pytest.approx([3.0])
    assert sp.c_n == pytest.approx(1 / 3) and sp.d == 1 and sp.n == 3
    with pytest.raises(ValueError):
        sample_spectrum(np.zeros((0, 3)))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 8), st.integers(1, 12), st.integers(0, 1000))
def test_spectrum_trace_identity(d, n, seed):
    Y = np.random.default_rng(seed).normal(size=(d, n))
    sp = sample_spectrum(Y)
    mu = sp.nu_hat
    assert d * np.sum(mu.atoms * mu.weights) == pytest.approx(np.sum(Y * Y) / n, rel=1e-10, abs=1e-12)
    assert np.all(mu.atoms >= 0) and mu.total_mass == pytest.approx(1.0)
    assert sp.d == d and sp.n == n


def test_ex1_eigenvalues_inside_soft_bound():
    Y, _, _ = generate(ModelSpec("Ex1", 200, seed=2))
    sp = sample_spectrum(Y)
    assert sp.eigenvalues.max() <= 1.1 * (1 + np.sqrt(sp.c_n)) ** 2


def test_haar_orthogonal():
    Q = haar_orthogonal(6, 1)
    assert np.allclose(Q.T @ Q, np.eye(6), atol=1e-12)
    assert abs(abs(np.linalg.det(Q)) - 1) <= 1e-12
    assert abs(haar_orthogonal(1, 3)[0, 0]) == 1.0
    # E[Q_11^2] = 1/d under Haar measure
    vals = [haar_orthogonal(4, s)[0, 0] ** 2 for s in range(2000)]
    assert abs(np.mean(vals) - 0.25) <= 0.02


def test_ex2_entries_are_rademacher():
    d = 40
    spec = ModelSpec("Ex2", d, seed=3)
    Y, H, sig = generate(spec)
    # replay the generator's draws to recover V, then X = B^-1 V^T Y
    rng = np.random.default_rng(spec.seed)
    V = haar_orthogonal(d, rng)
    X = (V.T @ Y) / ex2_scales(d)[:, None]
    assert np.allclose(np.abs(X), 1.0, atol=1e-10)
    assert abs(np.mean(np.sign(X))) <= 0.1
    # H_truth is the eigenvalue measure of B B^T
    BBt = (V * ex2_scales(d) ** 2) @ V.T
    assert np.max(np.abs(np.linalg.eigvalsh(BBt) - sig)) <= 1e-12
    assert np.allclose(H.weights.sum(), 1.0)


def test_read_matrix_csv(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("1,2,3\n4,5,6\n")
    assert read_matrix_csv(p).shape == (2, 3)
    p.write_text("1,2,3\n4,x,6\n")
    with pytest.raises(OSError, match=":2:"):
        read_matrix_csv(p)
    p.write_text("1,2,3\n4,5\n")
    with pytest.raises(OSError, match=":2:"):
        read_matrix_csv(p)
    p.write_text("")
    with pytest.raises(OSError, match="empty"):
        read_matrix_csv(p)
    p.write_text("1.5,2.5\n")
    Y, H, sig = generate(ModelSpec("FromFile", 0, path=str(p)))
    assert Y.shape == (1, 2) and H is None and sig is None


def test_splitmix_distinct():
    seeds = {splitmix64(2024, r) for r in range(1000)}
    assert len(seeds) == 1000 and all(0 <= s < 2**64 for s in seeds)


def _task(Y, H, sig, spec):
    return float(np.trace(sample_covariance(Y))) / spec.d, float(np.sum(sig)) / spec.d


def test_monte_carlo_single_rep_and_rerun():
    fam = [ModelSpec("Ex1", 10), ModelSpec("Ex1", 20)]
    t1 = monte_carlo(fam, _task, 1, 7)
    assert len(t1.rows) == 2 and not any(r.failed for r in t1.rows)
    t2 = monte_carlo(fam, _task, 3, 7, timer=lambda: 0.0)
    t3 = monte_carlo(fam, _task, 3, 7, timer=lambda: 0.0)
    f2, f3 = io.StringIO(), io.StringIO()
    t2.write_csv(f2)
    t3.write_csv(f3)
    assert f2.getvalue() == f3.getvalue()
    assert f2.getvalue().splitlines()[0] == ",".join(MC_HEADER)
    assert t2.rows[0].estimate == t1.rows[0].estimate
    s = t2.summary()
    assert set(s) == {10, 20} and s[10]["reps"] == 3


def test_monte_carlo_records_failures():
    def bad(Y, H, sig, spec):
        raise ArithmeticError("boom")

    t = monte_carlo([ModelSpec("Ex1", 5)], bad, 2, 0)
    assert all(r.failed and "boom" in r.extra["error"] for r in t.rows)
    assert t.summary()[5]["failed"] == 2
    with pytest.raises(ValueError):
        monte_carlo([ModelSpec("Ex1", 5)], bad, 0, 0)


def test_write_csv_extra_columns_and_runtime_flag():
    def task(Y, H, sig, spec):
        return 1.0, 1.0, {"lo": 0.5}

    t = monte_carlo([ModelSpec("Ex1", 3)], task, 1, 0)
    fh = io.StringIO()
    t.write_csv(fh, extra_cols=("lo",), runtime=False)
    header, row = fh.getvalue().splitlines()
    assert header.endswith(",lo") and row.split(",")[-1] == "0.5" and row.split(",")[6] == "0"
