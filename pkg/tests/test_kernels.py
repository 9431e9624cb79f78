import numpy as np
import pytest
from scipy.integrate import dblquad, quad

from contdml.kernels import (
    KernelSpec,
    convolution_kernel,
    kernel_constants,
    kernel_derivative,
    kernel_value,
    product_kernel,
    product_kernel_partial_t1,
)

FAMILIES = ["epanechnikov", "gaussian"]
LIMITS = {"epanechnikov": (-1.0, 1.0), "gaussian": (-np.inf, np.inf)}


def test_kernel_values():
    assert kernel_value("epanechnikov", 0.0) == 0.75
    assert kernel_value("epanechnikov", 1.5) == 0.0
    assert kernel_value(KernelSpec("gaussian"), 0.0) == pytest.approx(0.3989422804, abs=1e-10)


@pytest.mark.parametrize("family", FAMILIES)
def test_kernel_symmetric_nonnegative(family, rng):
    u = rng.uniform(-3, 3, 200)
    k = kernel_value(family, u)
    assert np.all(k >= 0)
    np.testing.assert_array_equal(k, kernel_value(family, -u))


@pytest.mark.parametrize("family", FAMILIES)
def test_second_order_moments(family):
    lo, hi = LIMITS[family]
    assert quad(lambda u: kernel_value(family, u), lo, hi)[0] == pytest.approx(1.0, abs=1e-8)
    assert abs(quad(lambda u: u * kernel_value(family, u), lo, hi)[0]) < 1e-8


@pytest.mark.parametrize("family", FAMILIES)
def test_constants_match_quadrature(family):
    lo, hi = LIMITS[family]
    kc = kernel_constants(family)
    assert kc.second_moment == pytest.approx(quad(lambda u: u * u * kernel_value(family, u), lo, hi)[0], abs=1e-9)
    assert kc.roughness == pytest.approx(quad(lambda u: kernel_value(family, u) ** 2, lo, hi)[0], abs=1e-9)
    assert kc.deriv_roughness == pytest.approx(quad(lambda u: kernel_derivative(family, u) ** 2, lo, hi)[0], abs=1e-9)
    assert min(kc.second_moment, kc.roughness, kc.deriv_roughness) > 0


def test_constant_values():
    e = kernel_constants("epanechnikov")
    assert (e.second_moment, e.roughness, e.deriv_roughness) == (0.2, 0.6, 1.5)
    g = kernel_constants("gaussian")
    assert g.second_moment == 1.0
    assert g.roughness == pytest.approx(0.2820947918, abs=1e-10)


def test_product_kernel_examples():
    assert product_kernel(KernelSpec("epanechnikov", 1.0), [0.3], [0.3]) == 0.75
    assert product_kernel(KernelSpec("epanechnikov", 2.0), [0.0], [0.0]) == 0.375
    assert product_kernel(KernelSpec("epanechnikov", 1.0), [1.0, 2.0], [1.0, 2.0]) == pytest.approx(0.5625)


@pytest.mark.parametrize("family", FAMILIES)
def test_product_kernel_integrates_to_one(family):
    spec = KernelSpec(family, 0.7)
    lo, hi = (-0.7, 0.7) if family == "epanechnikov" else (-10.0, 10.0)
    one = quad(lambda s: product_kernel(spec, [s], [0.0]), lo, hi)[0]
    assert one == pytest.approx(1.0, abs=1e-3)
    two = dblquad(lambda a, b: product_kernel(spec, [a, b], [0.0, 0.0]), lo, hi, lo, hi)[0]
    assert two == pytest.approx(1.0, abs=1e-3)


def test_partial_derivative_example():
    spec = KernelSpec("epanechnikov", 1.0)
    assert product_kernel_partial_t1(spec, [0.5], [0.0]) == pytest.approx(0.75)
    for fam in FAMILIES:
        assert product_kernel_partial_t1(KernelSpec(fam, 0.8), [0.2, 0.1], [0.2, 0.4]) == 0.0


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("d_t", [1, 2])
def test_partial_derivative_matches_finite_difference(family, d_t, rng):
    spec = KernelSpec(family, 0.9)
    step = 1e-6
    for _ in range(100):
        t_obs = rng.uniform(-1, 1, d_t)
        t_eval = rng.uniform(-1, 1, d_t)
        up, dn = t_eval.copy(), t_eval.copy()
        up[0] += step
        dn[0] -= step
        fd = (product_kernel(spec, t_obs, up) - product_kernel(spec, t_obs, dn)) / (2 * step)
        assert product_kernel_partial_t1(spec, t_obs, t_eval) == pytest.approx(fd, abs=1e-5)


def test_convolution_examples():
    assert convolution_kernel("epanechnikov", 0.0) == pytest.approx(0.6)
    assert convolution_kernel("epanechnikov", 2.0) == 0.0
    ref = quad(lambda u: 0.5625 * (1 - u * u) * (1 - (u - 1) ** 2), 0, 1, epsabs=1e-13)[0]
    assert convolution_kernel("epanechnikov", 1.0) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("family", FAMILIES)
def test_convolution_against_quadrature(family):
    lo, hi = LIMITS[family]
    rhos = np.linspace(0, 3, 20)
    for rho in rhos:
        a, b = (max(lo, rho - 1), min(hi, 1)) if family == "epanechnikov" else (lo, hi)
        ref = quad(lambda u: kernel_value(family, u) * kernel_value(family, u - rho), a, b,
                   epsabs=1e-12)[0] if a < b else 0.0
        assert convolution_kernel(family, rho) == pytest.approx(ref, abs=1e-8)
    vals = convolution_kernel(family, rhos)
    assert np.all(np.diff(vals) <= 1e-15)
    assert vals[0] == pytest.approx(kernel_constants(family).roughness)
