"""Marginal lifetime families against independently computed references.

Frozen constants below were produced with mpmath at 40 significant digits
from the closed forms; scipy.stats serves as a second, structurally
different reference where a matching distribution exists.
"""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from netsurv.errors import DomainError
from netsurv.marginals import (
    ExpWeibull,
    Exponential,
    PiecewiseExponential,
    Weibull,
    family_from_name,
)

# mpmath references: Weibull(rate=0.182, shape=1.609)
WB_CDF_2 = 0.42602727532838443085
WB_PDF_2 = 0.25635745682572435933
WB_SF_5 = 0.08847694222857106794
WB_Q_HALF = 2.2958367450582113647
WB_PDF_1 = 0.24411014932466309634

# mpmath references: ExpWeibull(scale=3, shape=4, power=0.1)
EW_CDF_HALF = 0.48834050248147254782
EW_PDF_HALF = 0.39052169899089052274
EW_SF_2 = 0.1579366772825195547
EW_CDF_15 = 0.75550596889457745296
EW_Q_HALF = 0.53039485376109496613
EW_Q_001 = 3.0e-5

# mpmath references: ExpWeibull(scale=1.5, shape=0.8, power=2.5)
EW2_CDF_12 = 0.24184548805026511536
EW2_Q_037 = 1.7173371708890031789
EW2_PDF_08 = 0.25245946535590384027

# mpmath references: Exponential(rate=0.7)
EXP_CDF_13 = 0.59747577596636402533
EXP_Q_025 = 0.41097438921682989634


def test_weibull_frozen_values():
    m = Weibull(0.182, 1.609)
    np.testing.assert_allclose(m.cdf(2.0), WB_CDF_2, rtol=1e-14)
    np.testing.assert_allclose(m.pdf(2.0), WB_PDF_2, rtol=1e-14)
    np.testing.assert_allclose(m.sf(5.0), WB_SF_5, rtol=1e-14)
    np.testing.assert_allclose(m.quantile(0.5), WB_Q_HALF, rtol=1e-12)
    np.testing.assert_allclose(m.pdf(1.0), WB_PDF_1, rtol=1e-14)


def test_expweibull_frozen_values():
    m = ExpWeibull(3.0, 4.0, 0.1)
    np.testing.assert_allclose(m.cdf(0.5), EW_CDF_HALF, rtol=1e-14)
    np.testing.assert_allclose(m.pdf(0.5), EW_PDF_HALF, rtol=1e-14)
    np.testing.assert_allclose(m.sf(2.0), EW_SF_2, rtol=1e-14)
    np.testing.assert_allclose(m.cdf(1.5), EW_CDF_15, rtol=1e-14)
    np.testing.assert_allclose(m.quantile(0.5), EW_Q_HALF, rtol=1e-12)

    m2 = ExpWeibull(1.5, 0.8, 2.5)
    np.testing.assert_allclose(m2.cdf(1.2), EW2_CDF_12, rtol=1e-14)
    np.testing.assert_allclose(m2.quantile(0.37), EW2_Q_037, rtol=1e-12)
    np.testing.assert_allclose(m2.pdf(0.8), EW2_PDF_08, rtol=1e-14)


def test_expweibull_tiny_quantile_does_not_collapse_to_zero():
    # p^(1/power) underflows the naive 1 - (1 - x) path for small p when
    # power << 1; the quantile must stay strictly positive and exact
    m = ExpWeibull(3.0, 4.0, 0.1)
    np.testing.assert_allclose(m.quantile(0.01), EW_Q_001, rtol=1e-12)
    tiny = m.quantile(np.array([1e-8, 1e-12, 1e-15]))
    assert np.all(tiny > 0.0)
    np.testing.assert_allclose(m.cdf(tiny), [1e-8, 1e-12, 1e-15], rtol=1e-8)


def test_exponential_frozen_values():
    m = Exponential(0.7)
    np.testing.assert_allclose(m.cdf(1.3), EXP_CDF_13, rtol=1e-14)
    np.testing.assert_allclose(m.quantile(0.25), EXP_Q_025, rtol=1e-14)
    np.testing.assert_allclose(m.hazard(np.array([0.1, 5.0])), 0.7)


def test_expweibull_power_one_is_weibull_at_scale():
    # ExpWeibull(scale, shape, 1) == Weibull with rate = scale**(-shape)
    m = ExpWeibull(2.0, 3.0, 1.0)
    np.testing.assert_allclose(m.cdf(2.0), 1.0 - math.exp(-1.0), rtol=1e-14)
    np.testing.assert_allclose(m.quantile(1.0 - math.exp(-1.0)), 2.0, rtol=1e-12)

    rng = np.random.default_rng(7)
    for _ in range(20):
        scale = float(rng.uniform(0.2, 5.0))
        shape = float(rng.uniform(0.3, 4.0))
        t = float(rng.uniform(0.01, 8.0))
        ew = ExpWeibull(scale, shape, 1.0)
        wb = Weibull(scale ** -shape, shape)
        np.testing.assert_allclose(ew.cdf(t), wb.cdf(t), rtol=1e-12)
        np.testing.assert_allclose(ew.pdf(t), wb.pdf(t), rtol=1e-12)


def test_unit_expweibull_is_standard_exponential():
    m = ExpWeibull(1.0, 1.0, 1.0)
    np.testing.assert_allclose(m.pdf(0.5), math.exp(-0.5), rtol=1e-14)
    t = np.linspace(0.1, 6.0, 25)
    np.testing.assert_allclose(m.hazard(t), 1.0, rtol=1e-12)


def test_against_scipy_references():
    t = np.array([0.2, 0.9, 1.7, 3.5, 6.0])
    wb = Weibull(0.182, 1.609)
    # rate-form Weibull == weibull_min with scale rate**(-1/shape)
    ref = stats.weibull_min(1.609, scale=0.182 ** (-1.0 / 1.609))
    np.testing.assert_allclose(wb.cdf(t), ref.cdf(t), rtol=1e-12)
    np.testing.assert_allclose(wb.pdf(t), ref.pdf(t), rtol=1e-12)

    ew = ExpWeibull(1.5, 0.8, 2.5)
    ref = stats.exponweib(2.5, 0.8, scale=1.5)
    np.testing.assert_allclose(ew.cdf(t), ref.cdf(t), rtol=1e-12)
    np.testing.assert_allclose(ew.pdf(t), ref.pdf(t), rtol=1e-12)
    np.testing.assert_allclose(ew.sf(t), ref.sf(t), rtol=1e-10)


@pytest.mark.parametrize("model", [
    Weibull(0.182, 1.609),
    Weibull(2.0, 0.7),
    ExpWeibull(3.0, 4.0, 0.1),
    ExpWeibull(1.5, 0.8, 2.5),
    Exponential(0.7),
])
def test_pdf_integrates_to_one(model):
    total, err = integrate.quad(lambda x: float(model.pdf(x)), 0.0, np.inf,
                                limit=200)
    assert abs(total - 1.0) < 1e-6


@pytest.mark.parametrize("model", [
    Weibull(0.182, 1.609),
    ExpWeibull(3.0, 4.0, 0.1),
    ExpWeibull(1.5, 0.8, 2.5),
    Exponential(0.7),
])
def test_pdf_matches_cdf_derivative(model):
    t = np.linspace(0.05, 6.0, 100)
    h = 1e-6 * np.maximum(1.0, t)
    fd = (model.cdf(t + h) - model.cdf(t - h)) / (2.0 * h)
    np.testing.assert_allclose(model.pdf(t), fd, rtol=1e-4)


@pytest.mark.parametrize("model", [
    Weibull(0.182, 1.609),
    Weibull(2.0, 0.7),
    ExpWeibull(3.0, 4.0, 0.1),
    ExpWeibull(1.5, 0.8, 2.5),
    Exponential(0.7),
])
def test_cdf_shape_and_round_trips(model):
    t = np.linspace(0.0, 40.0, 200)
    c = model.cdf(t)
    assert c[0] == 0.0
    assert np.all(np.diff(c) >= 0.0)
    assert np.all((c >= 0.0) & (c <= 1.0))
    assert model.cdf(1e9) > 1.0 - 1e-12

    p = np.linspace(0.01, 0.99, 50)
    np.testing.assert_allclose(model.cdf(model.quantile(p)), p, atol=1e-10)
    assert model.quantile(0.0) == 0.0


@given(p=st.floats(min_value=1e-12, max_value=0.999999))
def test_expweibull_round_trip_small_p(p):
    m = ExpWeibull(3.0, 4.0, 0.1)
    t = float(m.quantile(p))
    assert t > 0.0
    assert abs(float(m.cdf(t)) - p) <= 1e-8 * p + 1e-15


def test_hazard_shapes():
    t = np.linspace(0.2, 10.0, 80)
    increasing = Weibull(0.182, 1.609).hazard(t)
    assert np.all(np.diff(increasing) > 0.0)

    # shape > 1 with shape*power < 1 gives a bathtub: down, then up
    bath = ExpWeibull(3.0, 4.0, 0.1).hazard(np.linspace(0.05, 6.0, 400))
    turning = int(np.argmin(bath))
    assert 0 < turning < bath.size - 1
    assert np.all(np.diff(bath[:turning + 1]) < 0.0)
    assert np.all(np.diff(bath[turning:]) > 0.0)


def test_density_limit_at_zero_tracks_shape_times_power():
    # t -> 0: pdf ~ t^(shape*power - 1), so the limit is 0, a constant, or
    # divergence depending on the sign of shape*power - 1
    assert ExpWeibull(1.0, 2.0, 3.0).pdf(0.0) == 0.0
    assert ExpWeibull(1.0, 1.0, 1.0).pdf(0.0) == 1.0
    assert np.isinf(ExpWeibull(3.0, 4.0, 0.1).pdf(0.0))
    assert np.isinf(ExpWeibull(1.5, 0.8, 0.5).pdf(0.0))
    assert np.isinf(Weibull(1.0, 0.5).pdf(0.0))
    assert Weibull(2.0, 1.0).pdf(0.0) == 2.0


def test_parameter_validation():
    for bad in [(-1.0, 1.0), (0.0, 1.0), (1.0, -2.0), (np.inf, 1.0), (np.nan, 1.0)]:
        with pytest.raises(DomainError):
            Weibull(*bad)
    with pytest.raises(DomainError):
        ExpWeibull(1.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        ExpWeibull(1.0, -1.0, 1.0)
    with pytest.raises(DomainError):
        Exponential(0.0)


def test_argument_validation():
    m = Weibull(1.0, 2.0)
    with pytest.raises(DomainError):
        m.cdf(-0.5)
    with pytest.raises(DomainError):
        m.pdf(np.array([1.0, np.nan]))
    with pytest.raises(DomainError):
        m.quantile(1.5)
    with pytest.raises(DomainError):
        m.quantile(-0.1)


def test_vector_round_trip_and_names():
    m = ExpWeibull(3.0, 4.0, 0.1)
    np.testing.assert_array_equal(m.as_vector(), [3.0, 4.0, 0.1])
    assert ExpWeibull.from_vector(m.as_vector()) == m
    assert Weibull.param_names == ("rate", "shape")
    assert ExpWeibull.param_names == ("scale", "shape", "power")
    assert Exponential.param_names == ("rate",)
    assert family_from_name("weibull") is Weibull
    assert family_from_name("expweibull") is ExpWeibull
    with pytest.raises(DomainError):
        family_from_name("gamma")


def test_piecewise_exponential_conventions():
    pe = PiecewiseExponential([0.0, 1.0, 3.0], [0.5, 0.0, 2.0])
    np.testing.assert_allclose(pe.cumulative_hazard(np.array([0.5, 1.0, 2.0, 4.0])),
                               [0.25, 0.5, 0.5, 2.5], rtol=1e-14)
    # hazard at a boundary belongs to the segment ending there (left rule)
    np.testing.assert_array_equal(pe.hazard(np.array([0.0, 0.5, 1.0, 2.0, 3.0, 5.0])),
                                  [0.5, 0.5, 0.5, 0.0, 0.0, 2.0])
    np.testing.assert_allclose(pe.sf(2.0), math.exp(-0.5), rtol=1e-14)
    np.testing.assert_allclose(pe.pdf(4.0), 2.0 * math.exp(-2.5), rtol=1e-14)

    # quantile through the zero-rate plateau: mass exactly at the flat
    # stretch maps to the segment start
    p_flat = 1.0 - math.exp(-0.5)
    np.testing.assert_allclose(pe.quantile(p_flat), 1.0, rtol=1e-12)
    p_late = 1.0 - math.exp(-1.5)
    np.testing.assert_allclose(pe.quantile(p_late), 3.5, rtol=1e-12)
    np.testing.assert_allclose(pe.cdf(pe.quantile(0.95)), 0.95, rtol=1e-12)

    for starts, rates in [([0.5, 1.0], [1.0, 1.0]),
                          ([0.0, 0.0], [1.0, 1.0]),
                          ([0.0, 1.0], [1.0]),
                          ([0.0, 1.0], [1.0, -1.0])]:
        with pytest.raises(DomainError):
            PiecewiseExponential(starts, rates)
