import math

import numpy as np
import pytest

from fbreg.grids import GridFunction
from fbreg.kernels import Density, fractional_laplacian, make_kernel, symbol
from fbreg.operator import (
    ExtensionError,
    apply_at_points,
    apply_operator,
    callable_extension,
    constant_extension,
    effective_1d_kernel,
    periodic_extension,
    zero_extension,
)


def periodic_grid(n, s, fn):
    h = 2.0 * math.pi / n
    x = -math.pi + h * np.arange(n)
    return GridFunction(values=fn(x), h=h, origin=(-math.pi,), s=s), x


def estimated_order(errors, factors=2.0):
    errors = np.asarray(errors, dtype=float)
    return np.log(errors[:-1] / errors[1:]) / math.log(factors)


def test_constant_annihilation():
    kern = fractional_laplacian(0.6, dim=1)
    grid = GridFunction(values=np.full(33, 3.7), h=0.1, origin=(-1.6,), s=0.6)
    out = apply_operator(kern, grid, constant_extension(3.7))
    assert np.max(np.abs(out.values)) < 1e-10


def test_cosine_spectral_oracle_periodic():
    # L cos = -A(1) cos at unit frequency; discrete error refines at order >= 1
    for s in (0.35, 0.5, 0.75):
        kern = fractional_laplacian(s, dim=1)
        errs = []
        for n in (32, 64, 128):
            grid, x = periodic_grid(n, s, np.cos)
            out = apply_operator(kern, grid, periodic_extension())
            errs.append(np.max(np.abs(out.values + np.cos(x))))
        orders = estimated_order(errs)
        assert orders.min() >= 1.0, (s, errs, orders)


def test_cosine_dft_multiplier():
    # independent oracle: the DFT of L cos(kx) concentrates on frequency k
    s = 0.5
    kern = fractional_laplacian(s, dim=1)
    n = 128
    freq = 3
    grid, x = periodic_grid(n, s, lambda x: np.cos(freq * x))
    out = apply_operator(kern, grid, periodic_extension())
    spec = np.fft.rfft(out.values)
    mags = np.abs(spec)
    assert np.argmax(mags) == freq
    # multiplier value close to -A * freq^{2s} = -freq
    coef = 2.0 / n * np.sum(out.values * np.cos(freq * x))
    assert coef == pytest.approx(-float(freq) ** (2 * s), rel=0.02)


def test_drift_shows_up_as_sine_component():
    s = 0.5
    kern = fractional_laplacian(s, dim=1).with_drift((0.7,))
    n = 256
    grid, x = periodic_grid(n, s, np.cos)
    out = apply_operator(kern, grid, periodic_extension())
    # L cos = -A cos - B sin with B = b (at unit frequency)
    resid = out.values + np.cos(x) + 0.7 * np.sin(x)
    assert np.max(np.abs(resid)) < 0.05


def test_power_identity_apply_at_points():
    # L (x_+)^s = 0 on {x > 0}: residual at fixed points shrinks with h
    for s in (0.5, 0.75):
        kern = fractional_laplacian(s, dim=1)
        pts = np.array([[0.5], [1.0], [1.7]])
        fn = lambda p: np.maximum(np.asarray(p)[..., 0], 0.0) ** s
        res = []
        for h in (0.04, 0.02, 0.01):
            vals = apply_at_points(kern, fn, pts, h, growth=s, scale=1.0, tol=1e-4)
            res.append(np.max(np.abs(vals)))
        assert res[-1] < res[0]
        assert res[-1] < 2e-3, (s, res)


def test_power_identity_on_grid_with_exact_extension():
    s = 0.75
    kern = fractional_laplacian(s, dim=1)
    fn = lambda p, t=None: np.maximum(np.asarray(p)[..., 0], 0.0) ** s
    ext = callable_extension(fn, growth=s, scale=1.0, label="power")
    res = []
    for n in (65, 129, 257):
        h = 4.0 / (n - 1)
        x = -2.0 + h * np.arange(n)
        grid = GridFunction(values=fn(x[:, None]), h=h, origin=(-2.0,), s=s)
        out = apply_operator(kern, grid, ext, tol=1e-4)
        inside = x >= 0.5
        res.append(np.max(np.abs(out.values[inside])))
    assert res[-1] < res[0]
    assert res[-1] < 5e-3, res


def test_linearity_random():
    rng = np.random.default_rng(7)
    kern = fractional_laplacian(0.6, dim=1)
    n = 48
    h = 0.05
    u = rng.normal(size=n)
    w = rng.normal(size=n)
    alpha, beta = rng.normal(size=2)
    mk = lambda v: GridFunction(values=v, h=h, origin=(-1.2,), s=0.6)
    ext = zero_extension()
    lu = apply_operator(kern, mk(u), ext).values
    lw = apply_operator(kern, mk(w), ext).values
    lboth = apply_operator(kern, mk(alpha * u + beta * w), ext).values
    assert np.allclose(lboth, alpha * lu + beta * lw, atol=1e-9 * (1 + np.max(np.abs(lboth))))


def test_linearity_random_2d():
    rng = np.random.default_rng(11)
    kern = make_kernel(0.5, density=Density(base=1.0, c2=0.3), dim=2)
    n = 12
    mk = lambda v: GridFunction(values=v, h=0.1, origin=(-0.55, -0.55), s=0.5)
    u, w = rng.normal(size=(2, n, n))
    ext = zero_extension()
    lu = apply_operator(kern, mk(u), ext).values
    lw = apply_operator(kern, mk(w), ext).values
    lboth = apply_operator(kern, mk(2.5 * u - 0.5 * w), ext).values
    assert np.allclose(lboth, 2.5 * lu - 0.5 * lw, atol=1e-8 * (1 + np.max(np.abs(lboth))))


def test_odd_function_annihilation_at_center():
    kern = fractional_laplacian(0.5, dim=1)
    n = 41
    h = 0.05
    x = h * (np.arange(n) - n // 2)
    vals = np.sin(3 * x) + 0.5 * np.sin(x)
    grid = GridFunction(values=vals, h=h, origin=(x[0],), s=0.5)
    out = apply_operator(
        kern, grid,
        callable_extension(lambda p, t=None: np.sin(3 * p[..., 0]) + 0.5 * np.sin(p[..., 0]),
                           growth=0.0, scale=2.0),
        tol=1e-3,
    )
    # odd data about the center node: exact cancellation of the symmetric pairs
    assert abs(out.values[n // 2]) < 1e-8


def test_convex_minimum_nonnegative():
    kern = fractional_laplacian(0.7, dim=1)
    n = 31
    h = 0.1
    x = h * (np.arange(n) - n // 2)
    grid = GridFunction(values=x ** 2, h=h, origin=(x[0],), s=0.7)
    out = apply_operator(
        kern, grid,
        callable_extension(lambda p, t=None: p[..., 0] ** 2 * 0.0 + x.max() ** 2,
                           growth=0.0, scale=x.max() ** 2 + 1),
    )
    assert out.values[n // 2] >= 0.0


def test_growth_rejection():
    kern = fractional_laplacian(0.5, dim=1)
    grid = GridFunction(values=np.zeros(16), h=0.1, origin=(0.0,), s=0.5)
    with pytest.raises(ExtensionError):
        apply_operator(kern, grid, callable_extension(lambda p, t=None: p[..., 0], 1.5, 1.0))


def test_effective_1d_kernel_strength_and_drift():
    kern = fractional_laplacian(0.5, dim=2)
    e = np.array([0.0, 1.0])
    eff = effective_1d_kernel(kern, e, v=1.0)
    assert eff.dim == 1
    assert symbol(eff, [1.0], 1.0).A == pytest.approx(1.0, rel=1e-12)
    assert eff.drift == (-1.0,)
    aniso = make_kernel(0.75, density=Density(base=1.0, c2=0.4), dim=2)
    eff2 = effective_1d_kernel(aniso, np.array([0.0, 1.0]))
    want = symbol(aniso, [0.0, 1.0], 1.0).A
    assert symbol(eff2, [1.0], 1.0).A == pytest.approx(want, rel=1e-9)
    with pytest.raises(Exception):
        effective_1d_kernel(aniso, np.array([0.0, 1.0]), v=0.5)


def test_apply_at_points_2d_gaussian_oracle():
    # radially symmetric data at the origin: exact 1D radial reduction
    from scipy.integrate import quad

    s = 0.5
    kern = make_kernel(s, density=Density(base=1.0, c2=0.3), dim=2)
    fn = lambda p: np.exp(-0.5 * np.sum(np.asarray(p) ** 2, axis=-1))
    rad, _ = quad(lambda r: (math.exp(-0.5 * r * r) - 1.0) * r ** (-1 - 2 * s), 0, 60.0,
                  limit=400)
    tail = -(60.0 ** (-2 * s)) / (2 * s)
    want = 2.0 * math.pi * (rad + tail)  # angular mass of the density is 2*pi
    for h in (0.1, 0.05):
        got = apply_at_points(kern, fn, np.array([[0.0, 0.0]]), h=h, growth=0.0,
                              scale=1.0, tol=1e-4, uniform_radius=2.0)[0]
        assert abs(got - want) < 1e-3 * abs(want), (h, got, want)
