"""Admissible translation-invariant integro-differential operators.

An operator acts as

    L u(x) = p.v. int ( u(x+y) - u(x) ) K(y) dy  +  b . grad u(x),

with a homogeneous kernel K(y) = a(y/|y|) |y|^(-n-2s) whose spherical density
a is pinched between the ellipticity constants, lam <= a <= Lam.  Drift b is
admissible only at the critical order s = 1/2, and a non-symmetric density at
s = 1/2 must satisfy the zero-moment condition int_{S^{n-1}} theta a(theta)
dtheta = 0 so the principal value is well defined.

Symbol convention (self-consistent, pinned here; reference conventions may
differ by a constant): writing A(xi) = int (1 - cos(y.xi)) K_sym(y) dy and
B(xi) = b.xi + (odd-part sine transform), the operator maps e^{i xi.x} to
(-A(xi) + i B(xi)) e^{i xi.x}.  The isotropic density constant is chosen so
that the isotropic kernel has A(xi) = |xi|^{2s} exactly, which makes the
exponent formulas and the cosine eigenfunction test dimensionless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gamma as gamma_fn


class KernelError(ValueError):
    """Rejected kernel specification."""


class QuadratureError(RuntimeError):
    """Sphere quadrature failed to converge under resolution escalation."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


def radial_cosine_constant(s: float) -> float:
    """int_0^inf (1 - cos u) u^{-1-2s} du, the radial factor of the symbol."""
    return math.pi / (2.0 * gamma_fn(1.0 + 2.0 * s) * math.sin(math.pi * s))


def radial_sine_constant(s: float) -> float:
    """Radial factor of the odd-part symbol for s != 1/2.

    For s < 1/2 this is int_0^inf sin(u) u^{-1-2s} du; for s > 1/2 the
    gradient-compensated int_0^inf (sin u - u) u^{-1-2s} du.  Both are the
    analytic continuation Gamma(-2s) sin(-pi s) of the Mellin transform.
    """
    if abs(s - 0.5) < 1e-14:
        raise ValueError("radial sine constant is logarithmic at s = 1/2")
    return -gamma_fn(-2.0 * s) * math.sin(math.pi * s)


def sphere_surface_moment(s: float, dim: int) -> float:
    """int_{S^{n-1}} |theta_1|^{2s} dtheta (counting measure on S^0)."""
    if dim == 1:
        return 2.0
    return (
        2.0
        * math.pi ** ((dim - 1) / 2.0)
        * gamma_fn(s + 0.5)
        / gamma_fn(s + dim / 2.0)
    )


def isotropic_constant(s: float, dim: int) -> float:
    """Density value making the isotropic kernel's symbol exactly |xi|^{2s}."""
    return 1.0 / (radial_cosine_constant(s) * sphere_surface_moment(s, dim))


@dataclass(frozen=True)
class Density:
    """Spherical density a(theta), evaluated on unit vectors.

    The harmonic family a(theta) = base * (1 + c2 cos(2 phi) + c3 cos(3 phi))
    (2D; phi the polar angle) covers the cases exercised at desk scale: c2
    gives symmetric anisotropy, c3 an odd part with zero first moment.  A 1D
    density is the pair of values at theta = +1 / -1.
    """

    base: float = 1.0
    c2: float = 0.0
    c3: float = 0.0
    a_plus: float | None = None   # 1D override, value at theta = +1
    a_minus: float | None = None  # 1D override, value at theta = -1
    label: str = "isotropic"

    def __call__(self, theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        if theta.shape[1] == 1:
            ap = self.base if self.a_plus is None else self.a_plus
            am = self.base if self.a_minus is None else self.a_minus
            return np.where(theta[:, 0] > 0.0, ap, am)
        phi = np.arctan2(theta[:, 1], theta[:, 0])
        return self.base * (1.0 + self.c2 * np.cos(2.0 * phi) + self.c3 * np.cos(3.0 * phi))

    @property
    def is_symmetric(self) -> bool:
        if self.a_plus is not None or self.a_minus is not None:
            ap = self.base if self.a_plus is None else self.a_plus
            am = self.base if self.a_minus is None else self.a_minus
            return ap == am
        return self.c3 == 0.0

    def even_part(self, theta):
        return 0.5 * (self(theta) + self(-np.atleast_2d(theta)))

    def odd_part(self, theta):
        return 0.5 * (self(theta) - self(-np.atleast_2d(theta)))


@dataclass(frozen=True)
class KernelSpec:
    """A validated operator: order, ellipticity, density, optional drift."""

    s: float
    lam: float
    Lam: float
    dim: int
    density: Density
    drift: tuple = ()
    symmetric: bool = True
    isotropic: bool = False  # exact-symbol fast path

    @property
    def drift_vector(self) -> np.ndarray:
        if not self.drift:
            return np.zeros(self.dim)
        return np.asarray(self.drift, dtype=float)

    @property
    def has_drift(self) -> bool:
        return bool(self.drift) and any(b != 0.0 for b in self.drift)

    def with_drift(self, drift) -> "KernelSpec":
        drift = tuple(float(b) for b in np.atleast_1d(drift))
        _check_drift(self.s, drift, self.Lam, self.dim)
        return replace(self, drift=drift)


def _check_drift(s, drift, Lam, dim):
    if drift and any(b != 0.0 for b in drift):
        if abs(s - 0.5) > 1e-12:
            raise KernelError("drift requires s = 1/2")
        if len(drift) != dim:
            raise KernelError(f"drift has {len(drift)} components, expected {dim}")


def sphere_nodes(dim: int, m: int):
    """Quadrature nodes and weights on S^{n-1} (counting measure on S^0)."""
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if dim == 2:
        phi = (np.arange(m) + 0.5) * (2.0 * math.pi / m)
        nodes = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        weights = np.full(m, 2.0 * math.pi / m)
        return nodes, weights
    raise NotImplementedError("sphere quadrature implemented for n in {1, 2}")


def make_kernel(
    s: float,
    lam: float | None = None,
    Lam: float | None = None,
    density: Density | float | None = None,
    drift=None,
    dim: int = 1,
) -> KernelSpec:
    """Validate and construct an operator specification.

    ``density=None`` picks the isotropic density at the pinned constant, so
    the symbol is exactly |xi|^{2s}.  A float is a constant density; pass a
    :class:`Density` for anisotropy.  Ellipticity bounds default to the
    sampled min/max of the density.
    """
    if not 0.0 < s < 1.0:
        raise KernelError(f"order s must lie in (0, 1), got {s}")
    if dim < 1:
        raise KernelError("dim must be >= 1")

    iso = isotropic_constant(s, dim)
    isotropic = False
    if density is None:
        density = Density(base=iso, label="isotropic")
        isotropic = True
    elif isinstance(density, (int, float)):
        density = Density(base=float(density), label=f"constant:{float(density)!r}")
        isotropic = True
    elif not isinstance(density, Density):
        raise KernelError("density must be a Density, a number, or None")

    if dim > 2:
        # closed forms cover the isotropic case in any dimension; anisotropy
        # needs a sphere rule, implemented for n in {1, 2}
        if not isotropic:
            raise NotImplementedError("anisotropic densities implemented for n in {1, 2}")
        base = density.base
        if lam is None:
            lam = base
        if Lam is None:
            Lam = base
        drift = tuple(float(b) for b in np.atleast_1d(drift)) if drift is not None else ()
        _check_drift(s, drift, Lam, dim)
        return KernelSpec(
            s=float(s), lam=float(lam), Lam=float(Lam), dim=dim,
            density=density, drift=drift, symmetric=True, isotropic=True,
        )

    nodes, weights = sphere_nodes(dim, 512 if dim > 1 else 2)
    values = density(nodes)
    amin, amax = float(values.min()), float(values.max())
    if amin <= 0.0:
        raise KernelError("density must be strictly positive")
    if lam is None:
        lam = amin
    if Lam is None:
        Lam = amax
    if not 0.0 < lam <= Lam:
        raise KernelError("require 0 < lam <= Lam")
    if amin < lam - 1e-12 * max(1.0, lam) or amax > Lam + 1e-12 * max(1.0, Lam):
        raise KernelError(
            f"density range [{amin:.6g}, {amax:.6g}] violates ellipticity "
            f"bounds [{lam:.6g}, {Lam:.6g}]"
        )

    odd = density.odd_part(nodes)
    symmetric = bool(np.max(np.abs(odd)) <= 1e-12 * max(1.0, amax))
    if not symmetric and abs(s - 0.5) < 1e-12:
        moment = (nodes * (odd * weights)[:, None]).sum(axis=0)
        if np.linalg.norm(moment) > 1e-8 * amax:
            raise KernelError(
                "non-symmetric critical kernel violates the zero-moment "
                f"condition (moment {moment})"
            )

    drift = tuple(float(b) for b in np.atleast_1d(drift)) if drift is not None else ()
    _check_drift(s, drift, Lam, dim)

    return KernelSpec(
        s=float(s),
        lam=float(lam),
        Lam=float(Lam),
        dim=dim,
        density=density,
        drift=drift,
        symmetric=symmetric,
        isotropic=isotropic and density.is_symmetric,
    )


def fractional_laplacian(s: float, dim: int = 1) -> KernelSpec:
    """The operator -(-Delta)^s in the pinned normalization."""
    return make_kernel(s, dim=dim)


@dataclass(frozen=True)
class Symbol:
    """Symbol values at a direction/magnitude: -L e_xi = (-A + iB) e_xi."""

    A: float
    B: float
    s: float
    err_A: float = 0.0
    err_B: float = 0.0
    resolution: int = 0

    def at_magnitude(self, magnitude: float) -> "Symbol":
        scale = magnitude ** (2.0 * self.s)
        return replace(
            self,
            A=self.A * scale,
            B=self.B * scale,
            err_A=self.err_A * scale,
            err_B=self.err_B * scale,
        )


def _angular_integrals(kernel: KernelSpec, e: np.ndarray, m: int):
    nodes, weights = sphere_nodes(kernel.dim, m)
    proj = nodes @ e
    even = kernel.density.even_part(nodes)
    a_part = float(np.sum(even * np.abs(proj) ** (2.0 * kernel.s) * weights))
    b_part = 0.0
    if not kernel.symmetric:
        odd = kernel.density.odd_part(nodes)
        s = kernel.s
        if abs(s - 0.5) < 1e-12:
            with np.errstate(divide="ignore", invalid="ignore"):
                g = np.where(proj != 0.0, -proj * np.log(np.abs(proj)), 0.0)
            b_part = float(np.sum(odd * g * weights))
        else:
            g = radial_sine_constant(s) * np.sign(proj) * np.abs(proj) ** (2.0 * s)
            b_part = float(np.sum(odd * g * weights))
    return a_part, b_part


def symbol(
    kernel: KernelSpec,
    e,
    magnitude: float = 1.0,
    rel_tol: float = 1e-9,
    max_resolution: int = 1 << 20,
) -> Symbol:
    """Evaluate (A, B) at xi = magnitude * e by escalating sphere quadrature.

    The unit-direction values scale analytically: the value at magnitude r is
    r^{2s} times the value at r = 1 (checked to 1e-10 by the homogeneity
    property tests), so only the direction requires quadrature.
    """
    e = np.asarray(e, dtype=float).reshape(-1)
    if e.shape[0] != kernel.dim:
        raise KernelError(f"direction has dim {e.shape[0]}, kernel has {kernel.dim}")
    norm = np.linalg.norm(e)
    if not math.isclose(norm, 1.0, rel_tol=0, abs_tol=1e-9):
        raise KernelError("direction must be a unit vector")
    if magnitude <= 0.0:
        raise KernelError("magnitude must be positive")
    e = e / norm

    s = kernel.s
    drift_b = float(kernel.drift_vector @ e) if kernel.has_drift else 0.0

    if kernel.isotropic:
        base = Symbol(A=kernel.density.base * radial_cosine_constant(s)
                      * sphere_surface_moment(s, kernel.dim) / 1.0,
                      B=drift_b, s=s)
        # exact by construction for density=None; still exact for constants
        return base.at_magnitude(magnitude)

    c_rad = radial_cosine_constant(s)
    if kernel.dim == 1:
        a_part, b_part = _angular_integrals(kernel, e, 2)
        sym = Symbol(A=c_rad * a_part, B=b_part + drift_b, s=s, resolution=2)
        return sym.at_magnitude(magnitude)

    m = 256
    prev = _angular_integrals(kernel, e, m)
    while True:
        m *= 2
        cur = _angular_integrals(kernel, e, m)
        err_a = abs(cur[0] - prev[0])
        err_b = abs(cur[1] - prev[1])
        scale = max(abs(cur[0]), 1e-300)
        if err_a <= rel_tol * scale and err_b <= rel_tol * max(scale, abs(cur[1])):
            sym = Symbol(
                A=c_rad * cur[0],
                B=cur[1] + drift_b,
                s=s,
                err_A=c_rad * err_a,
                err_B=err_b,
                resolution=m,
            )
            return sym.at_magnitude(magnitude)
        if m >= max_resolution:
            raise QuadratureError(
                f"sphere quadrature did not converge at resolution {m} "
                f"(error estimate {c_rad * err_a:.3e})",
                estimate=c_rad * err_a,
            )
        prev = cur
