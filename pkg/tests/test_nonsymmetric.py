"""Profile-equation residual checks for the non-symmetric exponent formulas.

These close the sign-convention loop: the root in gamma of the 1D operator
applied to zeta_+^gamma must land exactly at s - arctan(B(e)/A(e))/pi, both
for drift (critical) and for density asymmetry (subcritical elliptic).
"""

import numpy as np
import pytest

from fbreg.kernels import Density, fractional_laplacian, make_kernel, symbol
from fbreg.operator import apply_at_points, effective_1d_kernel
from fbreg.profiles import Profile1D, gamma_elliptic, profile_residual


def residual_at(kern1d, gamma, pts=np.array([0.5, 1.0, 1.8]), h=0.01):
    def trace(p):
        z = np.asarray(p)[..., 0]
        out = np.zeros_like(z)
        pos = z > 0
        out[pos] = z[pos] ** gamma
        return out

    vals = apply_at_points(kern1d, trace, pts[:, None], h, growth=gamma, scale=1.0,
                           tol=1e-3, uniform_radius=4.0)
    return float(np.max(np.abs(vals)))


def test_drift_elliptic_root_is_gamma_elliptic():
    kern = fractional_laplacian(0.5, dim=1).with_drift((0.8,))
    for e in ([1.0], [-1.0]):
        gam = gamma_elliptic(kern, e)
        eff = effective_1d_kernel(kern, e)
        r_at = residual_at(eff, gam)
        r_up = residual_at(eff, gam + 0.05)
        r_dn = residual_at(eff, gam - 0.05)
        assert r_at < r_up / 5.0, (e, r_at, r_up)
        assert r_at < r_dn / 5.0, (e, r_at, r_dn)


def test_density_asymmetry_elliptic_root():
    # zero-moment odd density at s = 1/2 in 2D: exponent from the symbol
    kern = make_kernel(0.5, density=Density(base=1.0, c3=0.35), dim=2)
    e = np.array([1.0, 0.0])
    gam = gamma_elliptic(kern, e)
    assert gam != 0.5  # the odd part shifts the exponent
    eff = effective_1d_kernel(kern, e)
    r_at = residual_at(eff, gam)
    r_up = residual_at(eff, gam + 0.05)
    r_dn = residual_at(eff, gam - 0.05)
    assert r_at < r_up / 4.0
    assert r_at < r_dn / 4.0


def test_subcritical_asymmetric_effective_kernel():
    # s > 1/2: the odd symbol part becomes a 1D density asymmetry
    kern = make_kernel(0.75, density=Density(base=1.0, c3=0.3), dim=2)
    e = np.array([1.0, 0.0])
    sym = symbol(kern, e, 1.0)
    assert sym.B != 0.0
    eff = effective_1d_kernel(kern, e)
    sym1 = symbol(eff, [1.0], 1.0)
    assert sym1.A == pytest.approx(sym.A, rel=1e-8)
    assert sym1.B == pytest.approx(sym.B, rel=1e-8)
    gam = gamma_elliptic(kern, e)
    r_at = residual_at(eff, gam)
    r_up = residual_at(eff, min(gam + 0.05, 2 * 0.75 - 0.01))
    r_dn = residual_at(eff, gam - 0.05)
    assert r_at < r_up / 4.0
    assert r_at < r_dn / 4.0


def test_profile_residual_report_for_nonsymmetric_kernel():
    # reported, not asserted: the residual study runs and carries its order
    kern = make_kernel(0.5, density=Density(base=1.0, c3=0.35), dim=2)
    e = np.array([1.0, 0.0])
    gam = gamma_elliptic(kern, e)
    prof = Profile1D(kappa=1.0, e=tuple(e), v=0.0, gamma=gam, s=0.5)
    rep = profile_residual(kern, prof, np.array([0.5, 1.0]), refinement_levels=2,
                           h0=0.02)
    assert np.isfinite(rep.residuals).all()
    assert rep.residuals[-1] < 0.05
