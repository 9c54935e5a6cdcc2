import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import erf

from l1analysis.cosparsity import analysis_profile
from l1analysis.linalg import Subspace
from l1analysis.operators import (
    build_custom,
    build_haar_dwt,
    build_haar_undecimated,
    build_identity,
    build_tv1,
    gram_info,
)
from l1analysis.rate import (
    H_BRACKET,
    approx_error_upper,
    exact_recovery_m,
    h_eval,
    h_inverse,
    krz_bound,
    krz_for_profile,
    phi_eval,
    recovery_probability,
    sampling_rate_M,
    simplified_M,
    stable_bound,
)
from l1analysis.signals import blocks


def h_by_quadrature(tau):
    # h(inf) = 0 and h'(s) = -sqrt(2/pi) exp(-s^2/2) / s^2
    val, _ = quad(lambda s: math.sqrt(2 / math.pi) * math.exp(-s * s / 2) / (s * s),
                  tau, np.inf, epsabs=1e-14, epsrel=1e-12)
    return val


def random_instance(rng, n, N, zeros):
    P = rng.standard_normal((N, n))
    x = rng.standard_normal(n)
    if zeros:
        B = P[:zeros]
        x = x - np.linalg.pinv(B) @ (B @ x)
    return build_custom(P), x


@pytest.mark.parametrize("tau", [0.05, 0.3, 1.0, 2.5, 6.0])
def test_h_matches_integral_oracle(tau):
    assert h_eval(tau) == pytest.approx(h_by_quadrature(tau), rel=1e-9)


def test_h_matches_direct_formula_where_it_is_stable():
    for tau in np.linspace(0.2, 3.0, 15):
        direct = math.sqrt(2 / math.pi) * math.exp(-tau * tau / 2) / tau + math.erf(tau / math.sqrt(2)) - 1
        assert h_eval(tau) == pytest.approx(direct, rel=1e-12)


def test_h_examples_and_limits():
    assert h_eval(1.0) == pytest.approx(0.16663, abs=5e-6)
    assert h_eval(1e-6) > 1e5
    assert 0 < h_eval(30.0) < 1e-12
    np.testing.assert_allclose(h_eval(np.array([1.0, 2.0])), [h_eval(1.0), h_eval(2.0)])
    with pytest.raises(ValueError):
        h_eval(0.0)


@pytest.mark.parametrize("tau", [0.1, 1.0, 5.0])
def test_h_inverse_examples(tau):
    assert h_inverse(h_eval(tau)) == pytest.approx(tau, abs=1e-9)


def test_h_inverse_log_grid():
    for tau in np.logspace(-3, math.log10(20), 60):
        t = h_inverse(h_eval(tau))
        assert abs(t - tau) <= 1e-9 * max(1.0, tau)


def test_h_inverse_residual_and_clamp():
    for rho in (1e-6, 0.01, 1.0, 30.0, 1e4):
        assert abs(h_eval(h_inverse(rho)) - rho) <= 1e-12 * max(1.0, rho)
    # h(40) underflows to zero, so only the upper end of rho can clamp
    assert h_inverse(1e-300) < H_BRACKET[1]
    t, clamped = h_inverse(1e15, return_clamped=True)
    assert clamped and t == H_BRACKET[0]
    _, clamped = h_inverse(1.0, return_clamped=True)
    assert not clamped
    with pytest.raises(ValueError):
        h_inverse(-1.0)


def test_phi_examples():
    assert phi_eval(1e-8) >= 1 - 1e-4
    assert phi_eval(1e8) <= 1e-3
    # independent route: bisection oracle on the integral form of h
    lo, hi = 1e-3, 10.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if h_by_quadrature(mid) > 1.0 else (lo, mid)
    assert phi_eval(1.0) == pytest.approx(erf(lo / math.sqrt(2)), abs=1e-9)
    assert phi_eval(1.0) == pytest.approx(0.337, abs=1e-3)


def test_phi_strictly_decreasing():
    rng = np.random.default_rng(0)
    for _ in range(100):
        a, b = np.sort(10 ** rng.uniform(-6, 6, size=2))
        if a == b:
            continue
        assert phi_eval(a) > phi_eval(b)


@pytest.mark.parametrize("kind,J,expected", [
    ("dwt", 6, 114.0), ("irdwt", 6, 100.0), ("rdwt", 6, 241.0), ("irdwt", 3, 109.0),
])
def test_sampling_rate_table_values(kind, J, expected):
    if kind == "dwt":
        op = build_haar_dwt(256, J)
    else:
        op = build_haar_undecimated(256, J, "dual" if kind == "irdwt" else "primal")
    rep = sampling_rate_M(op, gram_info(op), blocks(256))
    assert rep.degenerate == "none"
    assert rep.M == pytest.approx(expected, rel=0.02)
    assert rep.M <= rep.simplified + 1e-8


def test_sampling_rate_degenerate_cases():
    full = sampling_rate_M(build_identity(5), None, np.arange(1.0, 6.0))
    assert full.degenerate == "full_support" and full.M == 5
    kern = sampling_rate_M(build_tv1(6), None, np.full(6, 2.0))
    assert kern.degenerate == "kernel_member" and kern.M == 1.0


def test_rate_report_json():
    rep = sampling_rate_M(build_identity(4), None, np.array([1.0, 0, 0, 0]))
    d = rep.to_dict()
    assert {"M", "simplified", "n", "degenerate", "profile"} <= set(d)
    assert rep.m_exact(3.0) == exact_recovery_m(rep.M, 3.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.integers(0, 6), st.integers(0, 2**32 - 1))
def test_M_bounded_by_n_and_simplified(n, extra, seed):
    rng = np.random.default_rng(seed)
    N = n + extra
    zeros = int(rng.integers(1, n))
    op, x = random_instance(rng, n, N, zeros)
    rep = sampling_rate_M(op, None, x)
    assert 0 < rep.M <= n
    if math.isfinite(rep.simplified):
        assert rep.M <= rep.simplified + 1e-8


@pytest.mark.parametrize("lam", [0.1, 3.0])
def test_M_scale_invariant(lam):
    op = build_haar_undecimated(64, 3, "dual")
    x = blocks(64)
    assert sampling_rate_M(op.scaled(lam), None, x).M == pytest.approx(
        sampling_rate_M(op, None, x).M, abs=1e-8)


@pytest.mark.parametrize("S", [1, 4, 8, 16])
def test_simplified_orthonormal_bound(S):
    n = 32
    x = np.zeros(n)
    x[:S] = 1.0
    prof = analysis_profile(build_identity(n), None, x)
    assert simplified_M(prof, n) <= 2 * S * math.log(n / S) + 2 * S


def test_simplified_direct_evaluation():
    n, S = 256, 41.0
    L = Lb = 215.0
    first = n - Lb**2 / L + (Lb / L) ** 2 * (2 * S * math.log((S + Lb) / S) + S)
    second = n - 2 / math.pi * Lb**2 / (S + Lb)
    op = build_haar_dwt(256, 6)
    prof = analysis_profile(op, None, blocks(256))
    assert simplified_M(prof, 256) == pytest.approx(min(first, second), rel=1e-10)
    assert simplified_M(prof, 256) >= sampling_rate_M(op, None, blocks(256)).M


def test_exact_recovery_examples():
    assert exact_recovery_m(114.0, 3.0) == 189
    assert exact_recovery_m(0.0, 1e-12) == 2
    assert recovery_probability(3.0) == pytest.approx(1 - math.exp(-4.5))
    m = exact_recovery_m(57.3, 1.7)
    assert m > (math.sqrt(57.3) + 1.7) ** 2 + 1 >= m - 1


def test_krz_examples():
    assert krz_bound("frame", n=4, N=4, b=1.0, cosupport_norm_sum=3.0, eps=math.exp(-2)) == 14
    full = krz_bound("tv1", n=100, N=99, S=99)
    assert full == pytest.approx(101, abs=1)
    with pytest.raises(ValueError):
        krz_bound("frame", n=1, N=1, b=0.01, cosupport_norm_sum=10.0)
    with pytest.raises(ValueError):
        krz_bound("other", n=1, N=1)


def test_krz_exceeds_M_for_irdwt_blocks():
    op = build_haar_undecimated(256, 6, "dual")
    g = gram_info(op)
    rep = sampling_rate_M(op, g, blocks(256))
    assert krz_for_profile(op, g, rep.profile) > rep.M


def sparse_vector(n, tail=0.0):
    x = np.full(n, tail)
    x[:3] = [3.0, -2.0, 1.0]
    return x


def test_stable_bound_full_space_reduces_to_noise_term():
    op = build_identity(200)
    x = sparse_vector(200)
    sb = stable_bound(op, None, x, Subspace.full(200), R=2.0, u=1.0, eta=0.5, m=10**6)
    np.testing.assert_allclose(sb.x_bar, x)
    M = sampling_rate_M(op, None, x).M
    m0 = (1.5 * (math.sqrt(M) + 1) + 1) ** 2 + 1
    assert sb.m0 == pytest.approx(m0)
    m = int(m0) + 20
    sb = stable_bound(op, None, x, Subspace.full(200), R=2.0, u=1.0, eta=0.5, m=m)
    assert sb.err == pytest.approx(2 * 0.5 / (math.sqrt(m - 1) - math.sqrt(m0 - 1)))


def test_stable_bound_noiseless_and_insufficient():
    op = build_identity(200)
    x = sparse_vector(200, tail=1e-3)
    U = Subspace.span(np.eye(200)[:, :3])
    sb = stable_bound(op, None, x, U, R=1.0, u=0.5, eta=0.0, m=150)
    assert sb.sufficient and sb.m0 < 150
    assert sb.err == pytest.approx(np.linalg.norm(x - sb.x_bar))
    assert not stable_bound(op, None, x, U, R=1.0, u=0.5, eta=0.0, m=int(sb.m0)).sufficient
    exact = stable_bound(op, None, sparse_vector(200), Subspace.full(200), R=math.inf,
                         u=0.5, eta=0.0, m=150)
    assert exact.err == 0.0
    with pytest.raises(ValueError):
        stable_bound(op, None, x, Subspace.trivial(200), R=1.0, u=0.5, eta=0.0, m=150)


def test_second_simplified_branch_holds_for_redundant_frames():
    # for unit-norm rows L >= Lbar, and Phi(S/L) >= (2/pi) L/(S+L) gives the branch
    op = build_haar_undecimated(256, 6, "primal")
    rep = sampling_rate_M(op, None, blocks(256))
    p = rep.profile
    second = 256 - 2 / math.pi * p.gen_cosparsity_diag**2 / (p.gen_sparsity + p.gen_cosparsity)
    assert rep.M <= second
    assert rep.simplified == pytest.approx(second)


def test_approx_error_upper_examples():
    op = build_identity(2)
    U = Subspace.span(np.array([[1.0], [0.0]]))
    assert approx_error_upper(op, np.array([1.0, 1.0]), U) == pytest.approx(2.0)
    assert approx_error_upper(op, np.array([2.0, 0.0]), U) == 0.0


def test_approx_error_upper_dominates_true_error():
    rng = np.random.default_rng(3)
    from l1analysis.approx import surrogate_point
    for _ in range(100):
        n = int(rng.integers(2, 7))
        op = build_custom(rng.standard_normal((n + 3, n)))
        x = rng.standard_normal(n)
        U = Subspace.span(rng.standard_normal((n, int(rng.integers(1, n + 1)))))
        xb = surrogate_point(op, x, U)
        assert np.linalg.norm(x - xb) <= approx_error_upper(op, x, U) + 1e-10
