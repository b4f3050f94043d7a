import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as spi
from scipy import special as sps
from scipy import stats as sst

from motoo_lab import special
from motoo_lab.special import DensitySpec

GRID_36 = [(d, t, a) for d in (0.5, 1.0, 2.0, 4.0) for t in (0.5, 1.0, 10.0) for a in (0.0, 1.0, 4.0)]


def scipy_pdf(spec: DensitySpec, y):
    # Z_t / t is noncentral chi-square with df = delta and noncentrality x0^2 / t
    if spec.x0_sq == 0:
        return sst.chi2.pdf(np.asarray(y) / spec.t, spec.delta) / spec.t
    return sst.ncx2.pdf(np.asarray(y) / spec.t, spec.delta, spec.x0_sq / spec.t) / spec.t


def scipy_cdf(spec: DensitySpec, c):
    if spec.x0_sq == 0:
        return sst.chi2.cdf(np.asarray(c) / spec.t, spec.delta)
    return sst.ncx2.cdf(np.asarray(c) / spec.t, spec.delta, spec.x0_sq / spec.t)


def effective_infinity(spec: DensitySpec) -> float:
    return 50.0 * max(spec.t * spec.delta, spec.x0_sq, spec.t)


# --------------------------------------------------------------------------
# Bessel series


def test_bessel_at_zero():
    assert special.bessel_i(0, 0.0) == 1.0
    for nu in (0.3, 1.0, 2.5):
        assert special.bessel_i(nu, 0.0) == 0.0


@pytest.mark.parametrize("nu", [-0.5, -0.25, 0.0, 0.3, 1.0, 2.5, 7.0])
def test_bessel_against_scipy(nu):
    x = np.logspace(-4, 2, 120)
    ours = special.bessel_i(nu, x)
    ref = sps.iv(nu, x)
    assert np.max(np.abs(ours - ref) / ref) < 1e-12


@pytest.mark.parametrize("x", [0.1, 1.0, 5.0, 20.0])
def test_half_integer_closed_form(x):
    pref = math.sqrt(2.0 / (math.pi * x))
    assert special.bessel_i(0.5, x) == pytest.approx(pref * math.sinh(x), rel=1e-10)
    assert special.bessel_i(-0.5, x) == pytest.approx(pref * math.cosh(x), rel=1e-10)


def test_negative_integer_order_uses_reciprocal_gamma():
    x = np.array([0.5, 3.0, 11.0])
    np.testing.assert_allclose(special.bessel_i(-2, x), special.bessel_i(2, x), rtol=0, atol=0)


def test_bessel_errors():
    with pytest.raises(ValueError):
        special.bessel_i(1.0, -1.0)
    with pytest.raises(special.BesselRangeError, match="supported"):
        special.bessel_i(1.0, 150.0)


def test_small_x_limit():
    assert special.bessel_small_x_limit(0) == 1.0
    assert special.bessel_small_x_limit(1) == 0.5
    for nu in (-0.5, 0.3, 2.0):
        x = 1e-4
        ratio = special.bessel_i(nu, x) / x**nu
        assert ratio == pytest.approx(special.bessel_small_x_limit(nu), rel=1e-6)
    with pytest.raises(ValueError):
        special.bessel_small_x_limit(-1.0)


def test_xbar_delta_two():
    xbar = special.find_xbar(2.0)
    assert sps.iv(0, xbar * (1 - 1e-6)) < 2.0
    # the witness is tight: I_0 reaches 2 just above it
    assert sps.iv(0, xbar * (1 + 1e-6)) > 2.0


@pytest.mark.parametrize("delta", [1.0, 4.0, 0.5, 3.0])
def test_xbar_inequality_below_witness(delta):
    nu = delta / 2 - 1
    xbar = special.find_xbar(delta)
    x = np.linspace(xbar / 1000, xbar, 1000, endpoint=False)
    bound = 2 * 0.5**nu * x**nu / math.gamma(nu + 1)
    assert np.all(sps.iv(nu, x) < bound)


# --------------------------------------------------------------------------
# density and CDF


def test_density_second_branch_example():
    spec = DensitySpec.from_x0(2.0, 0.5, 0.0)
    assert special.sqbessel_density(spec, 0.7) == pytest.approx(math.exp(-0.7), rel=1e-15)


@pytest.mark.parametrize("delta,t,a", GRID_36)
def test_density_matches_noncentral_chi2(delta, t, a):
    spec = DensitySpec(delta, t, a)
    y = np.linspace(0.01, effective_infinity(spec) / 5, 200)
    ours = special.sqbessel_density(spec, y)
    ref = scipy_pdf(spec, y)
    assert np.all(ours >= 0)
    mask = ref > 1e-250
    assert np.max(np.abs(ours[mask] - ref[mask]) / ref[mask]) < 1e-9


def test_density_vanishes_at_origin_for_delta_above_two():
    spec = DensitySpec(4.0, 1.0, 1.0)
    vals = special.sqbessel_density(spec, np.array([1e-4, 1e-6, 1e-8]))
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-7


def test_density_domain():
    with pytest.raises(ValueError):
        special.sqbessel_density(DensitySpec(2.0, 1.0), 0.0)
    with pytest.raises(ValueError):
        DensitySpec(0.0, 1.0)


def test_cdf_closed_form_example():
    spec = DensitySpec.from_x0(2.0, 0.5, 0.0)
    assert special.sqbessel_cdf(spec, 1.0) == pytest.approx(1 - math.exp(-1), abs=1e-12)


@pytest.mark.parametrize("delta,t,a", GRID_36)
def test_cdf_matches_noncentral_chi2(delta, t, a):
    spec = DensitySpec(delta, t, a)
    c = np.array([0.05, 0.5, 1.0, 3.0, 10.0]) * max(t * delta, a, t)
    assert np.max(np.abs(special.sqbessel_cdf(spec, c) - scipy_cdf(spec, c))) < 1e-9


@pytest.mark.parametrize("delta,t,a", GRID_36)
def test_total_mass(delta, t, a):
    spec = DensitySpec(delta, t, a)
    assert abs(special.sqbessel_cdf(spec, effective_infinity(spec)) - 1.0) <= 1e-8
    # at 50 max(t delta, x0^2) the deficit is the law's own tail mass
    c = 50.0 * max(t * delta, a)
    tail = 1.0 - scipy_cdf(spec, c)
    assert abs(special.sqbessel_cdf(spec, c) - (1.0 - tail)) <= 1e-9


def test_array_cdf_matches_scalar():
    spec = DensitySpec(1.0, 1.0, 4.0)
    c = np.array([3.0, 0.2, 7.5, 1.0])
    arr = special.sqbessel_cdf(spec, c)
    scal = [special.sqbessel_cdf(spec, v) for v in c]
    np.testing.assert_allclose(arr, scal, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from([0.5, 1.0, 2.0, 4.0]),
    st.floats(0.2, 5.0),
    st.floats(0.0, 4.0),
    st.floats(0.01, 20.0),
    st.floats(0.01, 20.0),
)
def test_cdf_monotone_and_bounded(delta, t, a, c1, c2):
    spec = DensitySpec(delta, t, a)
    lo, hi = sorted((c1, c2))
    f_lo, f_hi = special.sqbessel_cdf(spec, lo), special.sqbessel_cdf(spec, hi)
    assert 0.0 <= f_lo <= f_hi + 1e-10 <= 1.0 + 1e-8 + 1e-10


def test_chapman_kolmogorov():
    s = t = 0.5
    first = DensitySpec(2.0, s, 1.0)
    y = 2.0

    def integrand(z):
        return special.sqbessel_density(first, z) * special.sqbessel_density(DensitySpec(2.0, t, z), y)

    lhs = spi.quad(integrand, 0.0, 60.0, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
    rhs = special.sqbessel_density(DensitySpec(2.0, s + t, 1.0), y)
    assert abs(lhs - rhs) <= 1e-5


# --------------------------------------------------------------------------
# Step-A tail bound


def test_tail_bound_origin_example():
    spec = DensitySpec.from_x0(2.0, 0.5, 0.0)
    assert special.step_a_tail_bound(spec, 1.0) == pytest.approx(1.0, rel=1e-15)
    assert special.sqbessel_cdf(spec, 1.0) <= 1.0


@pytest.mark.parametrize("delta", [0.5, 1.0, 3.0])
def test_tail_bound_power_law(delta):
    for x0 in (0.0, 1.0):
        tmin = special.tail_bound_spec(DensitySpec.from_x0(delta, 1.0, x0), 1.5).t_min
        t = max(tmin, 0.3)
        b1 = special.step_a_tail_bound(DensitySpec.from_x0(delta, t, x0), 1.5)
        b2 = special.step_a_tail_bound(DensitySpec.from_x0(delta, 2 * t, x0), 1.5)
        assert b2 == pytest.approx(2 ** (-delta / 2) * b1, rel=1e-14)


@pytest.mark.parametrize("delta", [0.5, 1.0, 3.0])
@pytest.mark.parametrize("c", [0.5, 2.0])
def test_tail_bound_dominates_cdf(delta, c):
    tb = special.tail_bound_spec(DensitySpec.from_x0(delta, 1.0, 1.0), c)
    assert tb.t_min == pytest.approx(math.sqrt(c) / tb.xbar)
    for t in (tb.t_min, 2 * tb.t_min, 10 * tb.t_min):
        spec = DensitySpec.from_x0(delta, t, 1.0)
        assert special.sqbessel_cdf(spec, c) <= special.step_a_tail_bound(spec, c)


def test_tail_bound_precondition():
    spec = DensitySpec.from_x0(1.0, 1e-3, 1.0)
    with pytest.raises(special.TailBoundPreconditionError) as info:
        special.step_a_tail_bound(spec, 1.0)
    assert info.value.t_min > 1e-3


def test_step_a_integral_examples():
    assert special.step_a_integral_finite(DensitySpec.from_x0(2.0, 1.0, 0.0), 1.0).convergent
    assert special.step_a_integral_finite(DensitySpec.from_x0(0.5, 1.0, 1.0), 1.0).convergent
    harmonic = special.step_a_integral_finite(DensitySpec(2.0, 1.0), 1.0, probability=lambda t: 1.0)
    assert harmonic.divergent
