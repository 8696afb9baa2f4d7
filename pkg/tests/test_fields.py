import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vectorgas.exceptions import AdmissibilityError, DomainError
from vectorgas.fields import ModelParams, growth_proxy, make_field, q_field, script_v, v_n
from vectorgas.special import log_bessel_i


def test_model_params_validation():
    with pytest.raises(DomainError):
        ModelParams(0.0, 0, 2)
    with pytest.raises(DomainError):
        ModelParams(1.0, -1, 2)
    with pytest.raises(DomainError):
        ModelParams(1.0, 0, 2.5)
    with pytest.raises(DomainError):
        ModelParams(1.0, 0, 3).require_even()
    p = ModelParams(2, 1, 4).require_even()
    assert p.M == 5 and p.n_lattice_particles == 2 and isinstance(p.a, float)
    assert ModelParams(1.0, 0.5, 2).M is None


# ----------------------------------------------------------------- v_n


def test_v_n_at_origin():
    for a, n in [(1.0, 2), (3.0, 50)]:
        assert v_n(ModelParams(a, 0, n), 0.0) == 0.0
    assert v_n(ModelParams(1.0, 2, 10), 0.0) == math.inf


def test_v_n_gap_is_the_bessel_prefactor():
    # the gap to x - 2 sqrt(ax) is (1/N) * 0.5 log(4 pi N sqrt(ax)) to leading order
    n = 100
    gap = v_n(ModelParams(1.0, 0, n), 1.0) - (1.0 - 2.0)
    assert abs(gap - 0.5 * math.log(4 * math.pi * n) / n) <= 1e-5
    assert abs(gap) <= 0.04


@pytest.mark.xfail(strict=True, reason="leading residual 0.5 log(400 pi)/100 = 0.0357 exceeds 0.03")
def test_v_n_within_three_hundredths_at_n100():
    assert abs(v_n(ModelParams(1.0, 0, 100), 1.0) - (1.0 - 2.0)) <= 0.03


def test_v_n_matches_direct_log_weight():
    p = ModelParams(1.5, 2.0, 7)
    x = np.array([0.1, 1.0, 4.0, 30.0])
    direct = -(0.5 * p.alpha * np.log(x) + log_bessel_i(p.alpha, 2 * p.N * np.sqrt(p.a * x)) - p.N * x) / p.N
    assert np.allclose(v_n(p, x), direct, rtol=1e-14, atol=0)


def test_v_n_survives_large_n():
    # e^{-Nx} and I_alpha both leave double range here
    val = v_n(ModelParams(1.0, 3, 10_000), 50.0)
    assert np.isfinite(val) and abs(val - q_field(1.0, 50.0)) < 1e-3


def test_v_n_sup_gap_decreases_with_n():
    x = np.linspace(0.05, 10.0, 400)
    gaps = [np.max(np.abs(v_n(ModelParams(1.0, 1, n), x) - q_field(1.0, x))) for n in (50, 100, 200, 400)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("n", [2, 10, 100])
def test_v_n_minus_log_bounded_below(n):
    p = ModelParams(1.0, 1, n)
    x = np.concatenate([np.linspace(0, 10, 2001), np.geomspace(10, 1e6, 500)])
    g = v_n(p, x) - np.log1p(x * x)
    assert np.all(np.isfinite(g[1:]))
    # on the tail v_n grows linearly, so the tail is increasing
    assert np.all(np.diff(g[-400:]) > 0)


def test_v_n_domain():
    with pytest.raises(DomainError):
        v_n(ModelParams(1.0, 0, 2), -1.0)


# ------------------------------------------------------------- limits


def test_q_field_values():
    assert q_field(1.0, 0.0) == 0.0
    assert q_field(1.0, 1.0) == -1.0


@given(st.floats(0.01, 50.0), st.floats(0.0, 200.0))
def test_q_field_minimum(a, x):
    assert q_field(a, x) >= -a - 1e-12 * (1 + a)
    assert q_field(a, a) == pytest.approx(-a, rel=1e-14)


def test_script_v_values():
    assert script_v(1.0, 0.0) == 0.0
    assert script_v(1.0, 1.0) == pytest.approx(-1.0 - 0.75 * math.log(2.0), rel=1e-15)
    assert script_v(1.0, np.inf) == math.inf


def test_script_v_bounded_below_and_growing():
    x = np.concatenate([np.linspace(0, 50, 5001), np.geomspace(50, 1e8, 300)])
    v = script_v(2.0, x)
    assert np.isfinite(v.min()) and v.min() > -10
    assert np.all(np.diff(v[-250:]) > 0) and v[-1] > 1e7


def test_script_v_with_finite_n():
    x = np.array([0.5, 2.0])
    assert np.allclose(script_v(1.0, x, n=50, alpha=1.0), v_n(ModelParams(1.0, 1.0, 50), x) - 0.75 * np.log1p(x * x))


# ------------------------------------------------------------ make_field


def test_make_field_wishart():
    f = make_field("wishart", a=1.0)
    assert f(1.0) == -1.0 and f.kind == "wishart"


def test_make_field_custom_accept_and_reject():
    assert make_field("custom", lambda x: x, a=1.0).growth_margin > 1
    with pytest.raises(AdmissibilityError):
        make_field("custom", lambda x: 2 * np.log1p(x), a=1.0)
    f = make_field("custom", lambda x: x**2, a=4.0)
    assert f(1.0) == pytest.approx(1.0 - 4.0)


def test_growth_proxy_of_log_potential():
    x = np.geomspace(1e2, 1e8, 7)
    # without the square-root term the proxy decreases to 1
    bare = growth_proxy(lambda t: 2 * np.log1p(t), 0.0, x)
    assert np.all(np.diff(bare) < 0) and abs(bare[-1] - 1) < 1e-6
    # with it the proxy is below 1 everywhere
    assert np.all(growth_proxy(lambda t: 2 * np.log1p(t), 1.0, x) < 1)


def test_make_field_domain():
    with pytest.raises(DomainError):
        make_field("wishart", a=-1.0)
    with pytest.raises(DomainError):
        make_field("quartic")
    with pytest.raises(DomainError):
        make_field("custom")
