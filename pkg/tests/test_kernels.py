import math

import numpy as np
import pytest
from scipy.integrate import quad

from fbreg.kernels import (
    Density,
    KernelError,
    fractional_laplacian,
    isotropic_constant,
    make_kernel,
    radial_cosine_constant,
    radial_sine_constant,
    symbol,
)


def cosine_radial_oracle(s, cut=50.0):
    """int_0^inf (1 - cos u) u^{-1-2s} du via split + oscillatory tail."""
    head, _ = quad(lambda u: (1 - math.cos(u)) * u ** (-1 - 2 * s), 0, cut, limit=400)
    tail_one = cut ** (-2 * s) / (2 * s)
    tail_cos, _ = quad(lambda u: u ** (-1 - 2 * s), cut, np.inf, weight="cos", wvar=1.0)
    return head + tail_one - tail_cos


def brute_symbol_a(density, s, e, n_theta=40000):
    """Independent dense-trapezoid oracle for the symbol real part (2D)."""
    phi = (np.arange(n_theta) + 0.5) * (2 * math.pi / n_theta)
    theta = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    a = density(theta)
    c1 = cosine_radial_oracle(s)
    proj = theta @ np.asarray(e)
    return c1 * np.sum(0.5 * (a + density(-theta)) * np.abs(proj) ** (2 * s)) * (
        2 * math.pi / n_theta
    )


def test_radial_cosine_constant_matches_quadrature():
    for s in [0.3, 0.5, 0.6, 0.75, 0.9]:
        assert radial_cosine_constant(s) == pytest.approx(
            cosine_radial_oracle(s), rel=1e-8
        )


def test_radial_sine_constants_match_quadrature():
    s = 0.3
    head, _ = quad(lambda u: math.sin(u) * u ** (-1 - 2 * s), 0, 50.0, limit=400)
    tail, _ = quad(lambda u: u ** (-1 - 2 * s), 50.0, np.inf, weight="sin", wvar=1.0)
    assert radial_sine_constant(s) == pytest.approx(head + tail, rel=1e-7)
    s = 0.75
    head, _ = quad(lambda u: (math.sin(u) - u) * u ** (-1 - 2 * s), 0, 50.0, limit=400)
    tail, _ = quad(lambda u: u ** (-1 - 2 * s), 50.0, np.inf, weight="sin", wvar=1.0)
    linear = 50.0 ** (1 - 2 * s) / (1 - 2 * s)  # -int_50^inf u^{-2s} du
    assert radial_sine_constant(s) == pytest.approx(head + tail + linear, rel=1e-6)


def test_isotropic_symbol_is_exactly_one():
    for dim in (1, 2):
        for s in (0.35, 0.5, 0.75):
            kern = fractional_laplacian(s, dim=dim)
            e = np.zeros(dim)
            e[0] = 1.0
            sym = symbol(kern, e, 1.0)
            assert sym.A == pytest.approx(1.0, abs=1e-12)
            assert sym.B == 0.0


def test_isotropic_normalization_known_value():
    # half Laplacian on the line: kernel density 1/pi
    assert isotropic_constant(0.5, 1) == pytest.approx(1.0 / math.pi, rel=1e-13)
    assert isotropic_constant(0.5, 2) == pytest.approx(1.0 / (2 * math.pi), rel=1e-13)


def test_symbol_homogeneity_exact():
    kern = make_kernel(0.75, density=Density(base=1.0, c2=0.4, label="aniso"), dim=2)
    e = np.array([math.cos(0.3), math.sin(0.3)])
    s1 = symbol(kern, e, 1.0)
    s2 = symbol(kern, e, 2.0)
    assert s2.A == pytest.approx(2.0 ** 1.5 * s1.A, rel=1e-10)


def test_anisotropic_symbol_against_dense_oracle():
    dens = Density(base=1.0, c2=0.5, label="aniso")
    s = 0.75
    kern = make_kernel(s, density=dens, dim=2)
    for ang in (0.0, 0.7, 1.3):
        e = np.array([math.cos(ang), math.sin(ang)])
        got = symbol(kern, e, 1.0).A
        want = brute_symbol_a(dens, s, e)
        assert got == pytest.approx(want, rel=1e-6)


def test_drift_enters_symbol_imaginary_part():
    kern = fractional_laplacian(0.5, dim=2).with_drift((0.8, -0.2))
    e = np.array([1.0, 0.0])
    sym = symbol(kern, e, 1.0)
    assert sym.B == pytest.approx(0.8, abs=1e-12)
    sym2 = symbol(kern, e, 3.0)
    assert sym2.B == pytest.approx(3.0 * 0.8, rel=1e-12)


def test_odd_density_zero_moment_accepted_and_symbol_finite():
    dens = Density(base=1.0, c3=0.4, label="odd")
    kern = make_kernel(0.5, density=dens, dim=2)
    assert not kern.symmetric
    e = np.array([1.0, 0.0])
    sym = symbol(kern, e, 1.0)
    assert np.isfinite(sym.B) and sym.B != 0.0
    # odd part flips with the direction
    sym_rev = symbol(kern, -e, 1.0)
    assert sym_rev.B == pytest.approx(-sym.B, rel=1e-9, abs=1e-12)
    assert sym_rev.A == pytest.approx(sym.A, rel=1e-9)


def test_make_kernel_rejections():
    with pytest.raises(KernelError):
        make_kernel(1.2)
    with pytest.raises(KernelError):
        make_kernel(0.75, drift=(1.0,))  # drift requires s = 1/2
    with pytest.raises(KernelError):
        make_kernel(0.5, lam=2.0, Lam=3.0)  # isotropic density below lam
    with pytest.raises(KernelError):
        # asymmetric 1D critical kernel violates the zero-moment condition
        make_kernel(0.5, density=Density(base=1.0, a_plus=1.5, a_minus=0.5), dim=1)
    with pytest.raises(KernelError):
        make_kernel(0.5, density=Density(base=1.0, c2=-1.5), dim=2)  # sign change


def test_canonical_examples():
    half = fractional_laplacian(0.5, dim=1)
    assert half.symmetric and not half.has_drift
    critical_drift = fractional_laplacian(0.5, dim=2).with_drift((1.0, 0.0))
    assert critical_drift.has_drift
    with pytest.raises(KernelError):
        make_kernel(0.75, density=Density(base=1.0, c2=0.3), drift=(0.5, 0.0), dim=2)


def test_density_bounds_default_to_sampled_range():
    dens = Density(base=1.0, c2=0.25, label="aniso")
    kern = make_kernel(0.6, density=dens, dim=2)
    assert kern.lam == pytest.approx(0.75, abs=1e-4)
    assert kern.Lam == pytest.approx(1.25, abs=1e-4)
