import numpy as np
import pytest

from fbreg.grids import GridFunction, GridError, read_grid, uniform_grid, write_grid


def test_roundtrip_elliptic(tmp_path):
    rng = np.random.default_rng(3)
    g = GridFunction(values=rng.normal(size=(17, 9)), h=0.125, origin=(-1.0, -0.5), s=0.75)
    p = tmp_path / "g.fbrg"
    write_grid(p, g)
    back = read_grid(p)
    assert back.dt is None
    assert back.h == g.h and back.origin == g.origin and back.s == g.s
    assert np.array_equal(back.values, g.values)


def test_roundtrip_parabolic(tmp_path):
    g = uniform_grid(extent=1.0, nodes=9, dim=1, s=0.5, horizon=0.5, steps=4)
    g = g.map_like(np.arange(g.values.size, dtype=float).reshape(g.values.shape))
    p = tmp_path / "g.fbrg"
    write_grid(p, g)
    back = read_grid(p)
    assert back.dt == pytest.approx(0.125)
    assert np.array_equal(back.values, g.values)


def test_write_is_deterministic(tmp_path):
    g = uniform_grid(extent=1.0, nodes=33, dim=1, s=0.6)
    p1, p2 = tmp_path / "a.fbrg", tmp_path / "b.fbrg"
    write_grid(p1, g)
    write_grid(p2, g)
    assert p1.read_bytes() == p2.read_bytes()


def test_nonfinite_rejected():
    with pytest.raises(GridError):
        GridFunction(values=np.array([1.0, np.nan]), h=0.1, origin=(0.0,), s=0.5)


def test_cylinder_slices_exact_mapping():
    # Q_r = B_r x (t0 - r^{2s}, t0 + r^{2s}]: half-open below, closed above
    g = uniform_grid(extent=1.0, nodes=21, dim=1, s=0.5, horizon=1.0, steps=10)
    sl = g.cylinder_slices(center=(0.0, 0.5), r=0.2)
    x = g.axis_coords(0)[sl[0]]
    t = g.axis_coords(1)[sl[1]]
    assert np.all(np.abs(x) <= 0.2 + 1e-12)
    assert x.min() == pytest.approx(-0.2) and x.max() == pytest.approx(0.2)
    # r^{2s} = 0.2 at s = 1/2: window (0.3, 0.7]
    assert t.min() == pytest.approx(0.4)  # first node strictly above 0.3
    assert t.max() == pytest.approx(0.7)  # closed right endpoint included


def test_cylinder_time_scaling_uses_order():
    g = uniform_grid(extent=1.0, nodes=11, dim=1, s=0.75, horizon=1.0, steps=100)
    sl = g.cylinder_slices(center=(0.0, 0.5), r=0.4)
    t = g.axis_coords(1)[sl[1]]
    half = 0.4 ** 1.5
    assert t.max() <= 0.5 + half + 1e-12
    assert t.min() >= 0.5 - half
