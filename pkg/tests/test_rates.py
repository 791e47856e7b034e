import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridpilot.pilots import FrameDesign
from hybridpilot.rates import (RateInputs, RateReport, asymptotic_rate, data_aided_constants, empirical_rate,
                               mf_constants, min_rate, rate_approx, sinr_approx)
from hybridpilot.receiver import SinrEstimate, empirical_sinr
from hybridpilot.scenario import make_scenario

ONE = np.ones((1, 1))


def _single(alpha=1.0, lam=0.5, tau=10, T=10, M=1e12, sigma_n2=0.01, p_e=None):
    return RateInputs(alpha, lam, tau, T, M, ONE, sigma_n2, p_e)


def test_sinr_single_user_limit():
    gI, _ = sinr_approx(_single(), 0)
    assert gI == pytest.approx(5.0, rel=1e-9)


def test_sinr_single_user_finite_array():
    gI, _ = sinr_approx(_single(M=100), 0)
    assert gI == pytest.approx(0.5 / (0.1 + 0.0001), rel=1e-12)
    assert gI == pytest.approx(4.995004995, rel=1e-9)


def test_sinr_pure_tm_drops_tau_term():
    sc = make_scenario(L=3, K=2)
    inp = RateInputs(0.0, 0.4, 20, 60, 64, sc.beta, sc.sigma_n2)
    b1, b2 = mf_constants(sc.beta, 1)
    bk = sc.beta[0, 1]
    gI, gII = sinr_approx(inp, 1)
    assert gII == pytest.approx(0.6 * bk ** 2 * 64 / (0.6 * b2 + sc.sigma_n2 * bk), rel=1e-12)
    assert gI == pytest.approx(0.6 * bk ** 2 * 64 / (b2 + sc.sigma_n2 * bk), rel=1e-12)


@pytest.mark.parametrize("lam", [0.0, 1.0])
def test_sinr_rejects_degenerate_power_split(lam):
    with pytest.raises(ValueError):
        sinr_approx(_single(lam=lam), 0)
    with pytest.raises(ValueError):
        rate_approx(_single(lam=lam), 0)


def test_mf_constants_by_hand():
    beta = np.array([[1.0, 1.0, 1.0], [0.2, 0.1, 0.05]])
    b1, b2 = mf_constants(beta, 0)
    assert b1 == pytest.approx(3 + 0.04 + 0.01 + 0.0025)
    assert b2 == pytest.approx(0.35 + 2.0)


def test_data_aided_constants_without_errors_drop_own_cell():
    beta = np.array([[1.0, 2.0], [0.2, 0.1]])
    c1, c2 = data_aided_constants(beta, 1, 0.0)
    assert c1 == pytest.approx(0.04 + 0.01)
    assert c2 == pytest.approx(2.0 * 0.3)
    # a quarter error rate restores the plain constants
    assert data_aided_constants(beta, 1, 0.25) == pytest.approx(mf_constants(beta, 1))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.25), st.integers(0, 1))
def test_data_aided_constants_bounded_by_plain(p_e, k):
    beta = make_scenario(L=3, K=2, seed=3).beta
    c1, c2 = data_aided_constants(beta, k, p_e)
    b1, b2 = mf_constants(beta, k)
    assert c1 <= b1 + 1e-15 and c2 <= b2 + 1e-15
    assert c1 >= np.sum(beta[1:] ** 2) - 1e-15


def test_per_user_error_vector():
    beta = np.array([[1.0, 1.0], [0.1, 0.1]])
    c1, c2 = data_aided_constants(beta, 0, [0.0, 0.25])
    assert c1 == pytest.approx(1.0 + 0.02)
    assert c2 == pytest.approx(0.2 + 1.0)
    with pytest.raises(ValueError):
        _single().c_constants(0)


def test_rate_weights():
    sc = make_scenario(L=3, K=2)
    ts = RateInputs(1.0, 0.5, 60, 60, 256, sc.beta, sc.sigma_n2)
    gI, _ = sinr_approx(ts, 0)
    assert rate_approx(ts, 0) == pytest.approx(math.log2(1 + gI), rel=1e-12)
    tm = ts.with_(alpha=0.0, tau=20)
    _, gII = sinr_approx(tm, 0)
    assert rate_approx(tm, 0) == pytest.approx((1 - 20 / 60) * math.log2(1 + gII), rel=1e-12)
    assert min_rate(ts) == min(rate_approx(ts, k) for k in range(2))


def test_data_aided_rate_upper_bounds_plain():
    sc = make_scenario()
    inp = RateInputs(0.5, 0.8, 70, 280, 256, sc.beta, sc.sigma_n2)
    for k in range(sc.K):
        assert rate_approx(inp.with_(p_e=0.0), k) >= rate_approx(inp, k)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_phase_two_sinr_dominates(alpha, lam, frac):
    sc = make_scenario(L=3, K=2, seed=2)
    T = 120
    tau = 6 + frac * (T - 6)
    gI, gII = sinr_approx(RateInputs(alpha, lam, tau, T, 128, sc.beta, sc.sigma_n2), 0)
    assert gII >= gI


def test_asymptotic_examples():
    inp = _single(alpha=1.0, lam=0.5, tau=40, T=40)
    assert asymptotic_rate(inp, 0) == pytest.approx(math.log2(1 + 40 * 0.5 / 1.0), rel=1e-12)
    assert asymptotic_rate(inp.with_(alpha=0.0), 0) == math.inf


def test_large_array_converges_to_limit():
    sc = make_scenario()
    inp = RateInputs(0.7, 0.6, 70, 210, 1e6, sc.beta, sc.sigma_n2)
    assert rate_approx(inp, 3) == pytest.approx(asymptotic_rate(inp, 3), rel=0.01)
    errs = [abs(rate_approx(inp.with_(M=m), 3) - asymptotic_rate(inp, 3)) for m in (1e3, 2e3, 4e3)]
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.1)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.05, 0.9))
def test_limit_rate_increasing_in_lam(alpha, lam):
    sc = make_scenario(L=3, K=2)
    inp = RateInputs(alpha, lam, 20, 60, 1.0, sc.beta, sc.sigma_n2)
    assert asymptotic_rate(inp.with_(lam=lam + 0.05), 0) > asymptotic_rate(inp, 0)


@pytest.mark.parametrize("alpha,lam,tau,T", [(0.5, 0.5, 70, 140), (1.0, 0.5, 70, 140), (1.0, 0.2, 140, 140)])
def test_rate_saturates_in_m(alpha, lam, tau, T):
    sc = make_scenario()
    inp = RateInputs(alpha, lam, tau, T, 2000, sc.beta, sc.sigma_n2)
    for k in range(sc.K):
        r = [rate_approx(inp.with_(M=m), k) for m in (2e3, 1e4, 5e4)]
        assert r[1] - r[0] < 0.1
        assert 0 < r[2] - r[1] < r[1] - r[0]


def _fake_sinr(inv_I, inv_II, se=0.0):
    a, b = np.atleast_1d(inv_I).astype(float), np.atleast_1d(inv_II).astype(float)
    z = np.full_like(a, se)
    return SinrEstimate(a, b, z, z, np.zeros_like(a), 1, z, z)


def test_empirical_rate_unit_sinr():
    r = empirical_rate(_fake_sinr(1.0, 1.0), FrameDesign(1.0, 0.5, 10, 20))
    assert r.rate[0] == pytest.approx(1.0, rel=1e-12)
    assert r.se[0] == 0.0


def test_empirical_rate_single_phase_ignores_nan():
    r = empirical_rate(_fake_sinr(np.nan, 1.0), FrameDesign(0.0, 0.5, 10, 20))
    assert r.rate[0] == pytest.approx(0.5)
    r = empirical_rate(_fake_sinr(1.0, np.nan), FrameDesign(1.0, 0.5, 20, 20))
    assert r.rate[0] == pytest.approx(1.0)


def test_empirical_interval_brackets_estimate():
    sc = make_scenario(L=3, K=2, M=32, T=40, seed=1)
    d = FrameDesign(0.5, 0.7, 20, 40)
    r = empirical_rate(empirical_sinr(sc, d, 200, seed=5), d)
    assert np.all(r.rate >= 0)
    assert np.all(r.lower <= r.rate) and np.all(r.rate <= r.upper)
    assert np.all(r.se > 0)


def test_report_closed_form():
    sc = make_scenario(L=3, K=2)
    d = FrameDesign(0.5, 0.7, 12, 30)
    rep = RateReport.closed_form(d, sc, p_e=0.01)
    assert rep.rate_closed.shape == (2,)
    assert rep.min_rate_closed == pytest.approx(rep.rate_closed.min())
    assert rep.min_rate_empirical is None
    assert np.all(rep.rate_closed >= 0) and np.all(rep.p_e == 0.01)
    assert np.all(rep.rate_asymptotic > rep.rate_closed)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.1, 0.9), st.integers(0, 9))
def test_first_derivatives_match_finite_differences(alpha, lam, frac, k):
    sc = make_scenario(seed=0)
    T = 420
    tau = 70 + frac * (T - 70)
    u = RateInputs(alpha, lam, tau, T, 256, sc.beta, sc.sigma_n2).objective(k)
    h = 1e-6
    fd_a = (u(alpha + h, lam, tau) - u(alpha - h, lam, tau)) / (2 * h)
    fd_l = (u(alpha, lam + h, tau) - u(alpha, lam - h, tau)) / (2 * h)
    fd_t = (u(alpha, lam, tau + h * tau) - u(alpha, lam, tau - h * tau)) / (2 * h * tau)
    scale = abs(u(alpha, lam, tau))
    assert fd_a == pytest.approx(u.d_alpha(alpha, lam, tau), rel=1e-5, abs=1e-7 * scale)
    assert fd_l == pytest.approx(u.d_lam(alpha, lam, tau), rel=1e-5, abs=1e-7 * scale)
    assert fd_t == pytest.approx(u.d_tau(alpha, lam, tau), rel=1e-5, abs=1e-9 * scale)


def test_design_constants_relations():
    sc = make_scenario()
    u = RateInputs(0.5, 0.6, 70, 140, 256, sc.beta, sc.sigma_n2).objective(2)
    lam, tau, alpha = 0.6, 90.0, 0.4
    assert u.g(lam, tau) == pytest.approx(tau * u.f() * lam / (1 - lam), rel=1e-12)
    assert u.h(alpha, lam) == pytest.approx(lam * u.f() / ((1 - lam) * alpha), rel=1e-12)
    assert u.f() > 0 and u.g(lam, tau) > 0
