"""Tail-probability routines validated against quadrature and closed forms."""

import math

import pytest
from scipy import integrate

from gdimodels.stats import (
    betainc,
    chi2_quantile,
    chi2_sf,
    f_sf,
    gammainc_lower,
    gammainc_upper,
)


def chi2_density(x, df):
    return x ** (df / 2 - 1) * math.exp(-x / 2) / (2 ** (df / 2) * math.gamma(df / 2))


def f_density(x, d1, d2):
    c = math.gamma((d1 + d2) / 2) / (math.gamma(d1 / 2) * math.gamma(d2 / 2))
    c *= (d1 / d2) ** (d1 / 2)
    return c * x ** (d1 / 2 - 1) * (1 + d1 * x / d2) ** (-(d1 + d2) / 2)


def test_chi2_quantile_95_1df():
    assert chi2_quantile(0.95, 1) == pytest.approx(3.841459, abs=1e-5)


def test_chi2_sf_matches_erfc_identity():
    # For 1 df the upper tail is erfc(sqrt(x/2)).
    for x in (0.1, 1.0, 3.841459, 7.5, 15.0):
        assert chi2_sf(x, 1) == pytest.approx(math.erfc(math.sqrt(x / 2)), rel=1e-10)
    assert chi2_sf(3.841459, 1) == pytest.approx(0.05, abs=1e-4)


@pytest.mark.parametrize("x,df", [(0.5, 1), (2.3, 2), (5.0, 3), (11.07, 5), (30.0, 20)])
def test_chi2_sf_against_quadrature(x, df):
    expected, err = integrate.quad(chi2_density, x, math.inf, args=(df,))
    assert err < 1e-9
    assert chi2_sf(x, df) == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("f,d1,d2", [(0.5, 1, 10), (2.0, 3, 8), (4.26, 2, 9),
                                     (1.0, 5, 5), (3.0, 10, 40)])
def test_f_sf_against_quadrature(f, d1, d2):
    expected, err = integrate.quad(f_density, f, math.inf, args=(d1, d2))
    assert err < 1e-8
    assert f_sf(f, d1, d2) == pytest.approx(expected, abs=1e-6)


def test_gammainc_complementarity():
    for a in (0.5, 1.0, 2.5, 10.0):
        for x in (0.1, 1.0, 5.0, 20.0):
            assert gammainc_lower(a, x) + gammainc_upper(a, x) == pytest.approx(1.0, abs=1e-12)


def test_betainc_symmetry_and_bounds():
    for a, b, x in ((2.0, 3.0, 0.3), (0.5, 0.5, 0.7), (5.0, 1.5, 0.9)):
        assert betainc(a, b, x) == pytest.approx(1.0 - betainc(b, a, 1.0 - x), abs=1e-12)
    assert betainc(2.0, 3.0, 0.0) == 0.0
    assert betainc(2.0, 3.0, 1.0) == 1.0


def test_betainc_against_quadrature():
    def density(t, a, b):
        return t ** (a - 1) * (1 - t) ** (b - 1) * math.gamma(a + b) / (
            math.gamma(a) * math.gamma(b))

    for a, b, x in ((2.0, 5.0, 0.2), (0.5, 2.0, 0.5), (4.5, 0.5, 0.8)):
        expected, err = integrate.quad(density, 0, x, args=(a, b))
        assert err < 1e-9
        assert betainc(a, b, x) == pytest.approx(expected, abs=1e-8)


def test_chi2_quantile_roundtrip():
    for p in (0.5, 0.9, 0.95, 0.99):
        for df in (1, 2, 7):
            assert chi2_sf(chi2_quantile(p, df), df) == pytest.approx(1 - p, abs=1e-9)


def test_domain_errors():
    with pytest.raises(ValueError):
        chi2_quantile(1.5, 1)
    with pytest.raises(ValueError):
        chi2_sf(1.0, 0)
    with pytest.raises(ValueError):
        betainc(-1.0, 1.0, 0.5)
    assert chi2_sf(-2.0, 3) == 1.0
    assert f_sf(0.0, 2, 4) == 1.0
