"""Explicit barriers and pointwise verification of their inequalities.

Every constant the underlying comparison arguments assert to exist without a
value (cusp exponents theta, cone exponents, subsolution exponents gamma,
amplitudes M, collar widths delta) is found here by monotone parameter
search, and the certified margins are reported per refinement level.  A
barrier packages an evaluation closure, its validity region, and the claimed
one-sided bound; verify_inequality is the uniform harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import uniform_grid
from .kernels import KernelSpec
from .operator import apply_at_points, feasible_tail_tol
from .profiles import gamma_critical
from .solver import solve_linear_parabolic


class BarrierError(ValueError):
    pass


@dataclass(frozen=True)
class Claim:
    operator: str          # "L" (elliptic) or "heat" ((dt - L))
    sense: str             # "le" or "ge"
    bound: float | None    # None: searched constant, certified by stability


@dataclass(frozen=True)
class Barrier:
    kind: str
    params: dict
    evaluate: object       # fn(points, t) -> values, global in space
    claim: Claim
    growth: float
    scale: float
    time_derivative: object | None = None  # analytic dt, else centered FD
    validity: object | None = None         # fn(points, t) -> bool mask

    def __call__(self, points, t=0.0):
        return self.evaluate(points, t)


@dataclass(frozen=True)
class VerificationReport:
    kind: str
    claim: Claim
    margins: tuple         # per level: claimed-sense violation (<= 0 passes)
    observed: tuple        # per level: observed extreme of the operator value
    spacings: tuple
    passed: bool
    stable: bool
    constant: float        # certified constant (for searched-constant claims)

    @property
    def final_margin(self) -> float:
        return self.margins[-1]


def _heat_value(kernel, barrier, pts, t, h, tol):
    f_t = lambda p: barrier.evaluate(p, t)
    lval = apply_at_points(
        kernel, f_t, pts, h, growth=barrier.growth, scale=barrier.scale, tol=tol
    )
    if barrier.claim.operator == "L":
        return lval
    if barrier.time_derivative is not None:
        dt_val = barrier.time_derivative(pts, t)
    else:
        tau = 1e-5
        dt_val = (barrier.evaluate(pts, t + tau) - barrier.evaluate(pts, t - tau)) / (2 * tau)
    return dt_val - lval


def verify_inequality(
    kernel: KernelSpec,
    barrier: Barrier,
    sample_points,
    sample_times=None,
    refinement_levels: int = 2,
    h0: float = 0.05,
    tol: float = 1e-4,
) -> VerificationReport:
    """Worst-case margin of the claimed inequality per refinement level.

    For claims with a known bound the margin is the signed violation
    (negative = satisfied with room).  Searched-constant claims certify the
    observed constant and require level-to-level stability (within 30%).
    """
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    times = [0.0] if sample_times is None else list(sample_times)
    if barrier.validity is not None:
        for t in times:
            ok = barrier.validity(pts, t)
            if not np.all(ok):
                raise BarrierError("sample points outside the barrier's validity region")
    tol = max(tol, 2.0 * feasible_tail_tol(kernel, barrier.growth, barrier.scale))

    claim = barrier.claim
    margins = []
    observed = []
    spacings = []
    for level in range(refinement_levels):
        h = h0 / 2 ** level
        worst = -math.inf if claim.sense == "le" else math.inf
        for t in times:
            vals = _heat_value(kernel, barrier, pts, t, h, tol)
            if claim.sense == "le":
                worst = max(worst, float(np.max(vals)))
            else:
                worst = min(worst, float(np.min(vals)))
        observed.append(worst)
        if claim.bound is None:
            margins.append(worst if claim.sense == "le" else -worst)
        else:
            margins.append(
                worst - claim.bound if claim.sense == "le" else claim.bound - worst
            )
        spacings.append(h)

    if claim.bound is None:
        # searched constant: certify the finest-level extreme, demand stability
        ref = abs(observed[-1]) + 1e-12
        stable = all(
            abs(observed[i + 1] - observed[i]) <= 0.3 * ref + 0.3 * abs(observed[i])
            for i in range(len(observed) - 1)
        )
        passed = stable and np.isfinite(observed[-1])
        constant = float(observed[-1])
    else:
        stable = True
        if len(margins) >= 2 and margins[-1] < 0 and margins[-2] < 0:
            stable = abs(margins[-1] - margins[-2]) <= 0.3 * abs(margins[-2])
        passed = margins[-1] <= 0.0
        constant = float(observed[-1])
    return VerificationReport(
        kind=barrier.kind,
        claim=claim,
        margins=tuple(margins),
        observed=tuple(observed),
        spacings=tuple(spacings),
        passed=bool(passed),
        stable=bool(stable),
        constant=constant,
    )


# ---------------------------------------------------------------------------
# cusp barrier


def exp_cusp_barrier(e, theta: float, v: float = 0.0, parabolic: bool = False) -> Barrier:
    """exp(-|x.e + v t|^{1-theta}): a supersolution up to a constant.

    Elliptic claim: L phi <= C.  Parabolic (s = 1/2, traveling) claim:
    (dt - L) psi >= -C.  The constant is certified by refinement stability.
    """
    if not 0.0 < theta <= 0.25:
        raise BarrierError("cusp exponent theta must lie in (0, 1/4]")
    if v < 0.0:
        raise BarrierError("speed must be nonnegative")
    e = np.asarray(e, dtype=float)
    e = e / np.linalg.norm(e)

    def evaluate(pts, t=0.0):
        zeta = np.asarray(pts, dtype=float) @ e + v * t
        return np.exp(-np.abs(zeta) ** (1.0 - theta))

    claim = Claim(operator="heat" if parabolic else "L",
                  sense="ge" if parabolic else "le", bound=None)
    return Barrier(
        kind="ExpCusp",
        params={"theta": theta, "v": v, "e": tuple(e)},
        evaluate=evaluate,
        claim=claim,
        growth=0.0,
        scale=1.0,
    )


# ---------------------------------------------------------------------------
# cone supersolution


def cone_argument(pts, e, eta):
    pts = np.asarray(pts, dtype=float)
    r = np.linalg.norm(pts, axis=-1)
    proj = pts @ e
    with np.errstate(divide="ignore", invalid="ignore"):
        cosang = np.where(r > 0, proj / np.where(r > 0, r, 1.0), 1.0)
    return proj + eta * r * (1.0 - cosang ** 2)


def cone_supersolution(e, eta: float, theta_exp: float) -> Barrier:
    """(x.e + eta |x| (1 - (x.e/|x|)^2))_+^theta with L Phi <= -c on the cone."""
    if eta <= 0.0:
        raise BarrierError("cone opening parameter eta must be positive")
    if not 0.0 < theta_exp < 1.0:
        raise BarrierError("cone exponent must lie in (0, 1)")
    e = np.asarray(e, dtype=float)
    e = e / np.linalg.norm(e)

    def evaluate(pts, t=0.0):
        arg = cone_argument(pts, e, eta)
        out = np.zeros_like(arg)
        pos = arg > 0
        out[pos] = arg[pos] ** theta_exp
        return out

    def validity(pts, t=0.0):
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1)
        inside_cone = cone_argument(pts, e, eta) >= 0.0
        return inside_cone & (r <= 2.0) & (r > 0.0)

    return Barrier(
        kind="ConeSuper",
        params={"eta": eta, "theta_exp": theta_exp, "e": tuple(e)},
        evaluate=evaluate,
        claim=Claim(operator="L", sense="le", bound=0.0),
        growth=theta_exp,
        scale=2.0 * (1.0 + eta),
        validity=validity,
    )


def find_cone_exponent(
    kernel: KernelSpec,
    e,
    eta: float,
    sample_points,
    candidates=(0.4, 0.2, 0.1, 0.05),
    h0: float = 0.05,
    refinement_levels: int = 2,
):
    """Descend the exponent ladder until the margin is strictly negative."""
    last = None
    for theta_exp in candidates:
        barrier = cone_supersolution(e, eta, theta_exp)
        rep = verify_inequality(
            kernel, barrier, sample_points, refinement_levels=refinement_levels, h0=h0
        )
        last = (theta_exp, rep)
        if rep.passed and rep.final_margin < 0.0:
            return theta_exp, rep
    raise BarrierError(f"no exponent in {candidates} certified a negative margin: {last}")


# ---------------------------------------------------------------------------
# traveling-cone subsolution


def _cone_profile_factory(theta0: float):
    """1-homogeneous psi on the cone {angle <= theta0}: distance function on
    the outer collar, monotone C^1 blend inside."""
    b = 0.9 * theta0

    def g(phi_abs):
        out = np.where(
            phi_abs >= b,
            np.sin(np.maximum(theta0 - phi_abs, 0.0)),
            np.sin(theta0 - _q_blend(phi_abs, b)),
        )
        return out

    return g


def _q_blend(phi, b):
    # C^1 ramp with q(0)=0, q'(0)=0, q(b)=b, q'(b)=1: slows the angle near
    # the axis so the profile has zero angular slope there
    u = np.clip(phi / b, 0.0, 1.0)
    return b * u * u * (2.0 - u)


def traveling_cone_subsolution(
    kernel_s: float, e, omega: float, theta0: float, gamma: float
) -> Barrier:
    """(psi(x + omega t e))_+^{2s-gamma} with (dt - L) <= -c on B1 x (-1, 0)."""
    if omega < 0.0:
        raise BarrierError("cone speed must be nonnegative")
    if not 0.0 < theta0 < math.pi:
        raise BarrierError("opening angle must lie in (0, pi)")
    if not 0.0 < gamma < 2.0 * kernel_s:
        raise BarrierError("exponent gamma must lie in (0, 2s)")
    e = np.asarray(e, dtype=float)
    e = e / np.linalg.norm(e)
    power = 2.0 * kernel_s - gamma

    if len(e) == 1:

        def psi(pts):
            return np.asarray(pts, dtype=float)[..., 0] * float(e[0])

    else:
        gfun = _cone_profile_factory(theta0)
        perp = np.array([-e[1], e[0]])

        def psi(pts):
            pts = np.asarray(pts, dtype=float)
            r = np.hypot(pts @ e, pts @ perp)
            ang = np.abs(np.arctan2(np.abs(pts @ perp), pts @ e))
            vals = np.where(ang <= theta0, r * gfun(ang), -r * (ang - theta0))
            return vals

    def evaluate(pts, t=0.0):
        shifted = np.asarray(pts, dtype=float) + omega * t * e
        val = psi(shifted)
        out = np.zeros_like(val)
        pos = val > 0
        out[pos] = val[pos] ** power
        return out

    def time_derivative(pts, t=0.0):
        tau = 1e-6
        return (evaluate(pts, t + tau) - evaluate(pts, t - tau)) / (2 * tau)

    def validity(pts, t=0.0):
        pts = np.asarray(pts, dtype=float)
        return (np.linalg.norm(pts, axis=-1) <= 1.0) & (t <= 0.0) & (t >= -1.0)

    return Barrier(
        kind="TravelingConeSub",
        params={"omega": omega, "theta0": theta0, "gamma": gamma, "e": tuple(e)},
        evaluate=evaluate,
        claim=Claim(operator="heat", sense="le", bound=0.0),
        growth=power,
        scale=2.0,
        time_derivative=time_derivative,
        validity=validity,
    )


def find_traveling_cone_gamma(
    kernel: KernelSpec,
    e,
    omega: float,
    theta0: float,
    sample_points,
    sample_times,
    candidates=(0.5, 0.25, 0.1, 0.05),
    h0: float = 0.05,
    refinement_levels: int = 2,
):
    """Bisect gamma downward until the subsolution margin is negative."""
    for gamma in candidates:
        if gamma >= 2.0 * kernel.s:
            continue
        barrier = traveling_cone_subsolution(kernel.s, e, omega, theta0, gamma)
        rep = verify_inequality(
            kernel, barrier, sample_points, sample_times=sample_times,
            refinement_levels=refinement_levels, h0=h0,
        )
        if rep.passed and rep.final_margin < 0.0:
            return gamma, rep
    raise BarrierError(f"no exponent in {candidates} certified a negative margin")


# ---------------------------------------------------------------------------
# regularized power barriers on a flat or graph moving boundary


class GraphDomain:
    """Moving region {x.e > G(t)} described by a graph over time (1D space).

    ``curve`` must be callable; a non-callable description has no graph
    structure and is rejected.  The space-time distance, inward normal, and
    boundary speed are computed from a dense sampling of the curve; the
    exponent field at the boundary is gamma(A(e), -G'(t)).
    """

    def __init__(self, curve, t_range=(-1.0, 1.0), samples: int = 801):
        if not callable(curve):
            raise BarrierError("moving domain needs a graph: curve must be callable")
        self.curve = curve
        self.tau = np.linspace(t_range[0], t_range[1], samples)
        self.gx = np.asarray(curve(self.tau), dtype=float)
        self.slope = np.gradient(self.gx, self.tau)
        if np.any(self.slope > 1e-9):
            raise BarrierError("graph must be nonincreasing (expanding domain)")

    def signed_distance(self, x, t):
        """Positive inside the domain; Euclidean space-time distance."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        dx = x[..., None] - self.gx[None, :]
        dt_ = t[..., None] - self.tau[None, :]
        dist = np.sqrt(dx * dx + dt_ * dt_).min(axis=-1)
        inside = x > np.interp(t, self.tau, self.gx)
        return np.where(inside, dist, -dist)

    def boundary_speed(self, t):
        return -np.interp(np.asarray(t, dtype=float), self.tau, self.slope)


def power_regularized_barriers(
    kernel: KernelSpec,
    normal,
    speed: float = 0.0,
    eps: float = 0.1,
    M: float = 4.0,
    gamma0: float | None = None,
    graph: GraphDomain | None = None,
):
    """Sharp sub/supersolution pair M phi +- rho^{gamma0 + eps}.

    Flat moving domain {x.e + speed t > 0} by default: the regularized
    distance is the exact space-time distance, the boundary exponent field
    is constant gamma0 = gamma(A(e), speed), and phi = rho^{gamma0} solves
    the profile equation exactly.  With ``graph`` the domain is a moving
    graph region: rho is the mollified numeric distance (smoothing length
    d/2), the exponent field interpolates gamma(A, speed) from the nearest
    boundary point, and phi = rho^{Gamma}.  Claims: (dt - L) Phi1 <= -1 and
    (dt - L) Phi2 >= +1 near the boundary; the growth sandwich
    C^-1 d^Gamma <= Phi_i <= C d^Gamma holds on the validity collar.
    """
    if graph is not None:
        return _graph_power_barriers(kernel, graph, eps, M)
    e = np.asarray(normal, dtype=float)
    e = e / np.linalg.norm(e)
    if gamma0 is None:
        gamma0 = gamma_critical(kernel, e, speed)
    if not 0.0 < eps < gamma0 / 2.0:
        raise BarrierError("need 0 < eps < gamma0 / 2")
    slow = 1.0 / math.sqrt(1.0 + speed * speed)

    def dist(pts, t):
        zeta = np.asarray(pts, dtype=float) @ e + speed * t
        return np.clip(zeta, 0.0, None) * slow

    def make(sign):
        def evaluate(pts, t=0.0):
            d = dist(pts, t)
            out = np.zeros_like(d)
            pos = d > 0
            out[pos] = M * d[pos] ** gamma0 + sign * d[pos] ** (gamma0 + eps)
            return out

        return evaluate

    def validity(pts, t=0.0):
        return np.ones(np.asarray(pts).shape[:-1], dtype=bool)

    common = {
        "gamma0": gamma0, "eps": eps, "M": M, "speed": speed, "e": tuple(e),
    }
    phi1 = Barrier(
        kind="PowerRegularized",
        params={**common, "sign": +1},
        evaluate=make(+1.0),
        claim=Claim(operator="heat", sense="le", bound=-1.0),
        growth=gamma0 + eps,
        scale=M + 1.0,
        validity=validity,
    )
    phi2 = Barrier(
        kind="PowerRegularized",
        params={**common, "sign": -1},
        evaluate=make(-1.0),
        claim=Claim(operator="heat", sense="ge", bound=1.0),
        growth=gamma0 + eps,
        scale=M + 1.0,
        validity=validity,
    )
    return phi1, phi2


_MOLLIFIER_OFFSETS = np.linspace(-0.5, 0.5, 9)
_MOLLIFIER_WEIGHTS = np.exp(-4.0 * _MOLLIFIER_OFFSETS ** 2)
_MOLLIFIER_WEIGHTS = _MOLLIFIER_WEIGHTS / _MOLLIFIER_WEIGHTS.sum()


def _graph_power_barriers(kernel: KernelSpec, graph: GraphDomain, eps: float, M: float):
    if kernel.dim != 1 or abs(kernel.s - 0.5) > 1e-12:
        raise NotImplementedError("graph domains run at s = 1/2 in 1D space")
    e = np.array([1.0])

    def gamma_field(x, t):
        # nearest-boundary-point interpolation of the speed-law exponent
        tt = np.asarray(t, dtype=float)
        xx = np.asarray(x, dtype=float)
        dx = xx[..., None] - graph.gx[None, :]
        dt_ = tt[..., None] - graph.tau[None, :]
        near = np.argmin(dx * dx + dt_ * dt_, axis=-1)
        speeds = np.clip(-graph.slope[near], 0.0, None)
        a_val = 1.0 if kernel.isotropic else None
        if a_val is None:
            from .kernels import symbol as _symbol

            a_val = _symbol(kernel, e, 1.0).A
        return 0.5 + np.arctan2(speeds, a_val) / math.pi

    def rho(x, t):
        # mollified distance, smoothing length = local d / 2
        d = np.clip(graph.signed_distance(x, t), 0.0, None)
        width = 0.5 * d
        smeared = np.zeros_like(d)
        for off, wgt in zip(_MOLLIFIER_OFFSETS, _MOLLIFIER_WEIGHTS):
            smeared += wgt * np.clip(
                graph.signed_distance(x + off * width, t), 0.0, None
            )
        return smeared

    gamma0 = float(gamma_field(np.array([0.0]), np.array([0.0]))[0])
    if not 0.0 < eps < gamma0 / 2.0:
        raise BarrierError("need 0 < eps < gamma0 / 2")

    def make(sign):
        def evaluate(pts, t=0.0):
            x = np.asarray(pts, dtype=float)[..., 0]
            tt = np.broadcast_to(np.asarray(t, dtype=float), x.shape)
            r = rho(x, tt)
            gam = gamma_field(x, tt)
            out = np.zeros_like(r)
            pos = r > 0
            out[pos] = M * r[pos] ** gam[pos] + sign * r[pos] ** (gamma0 + eps)
            return out

        return evaluate

    common = {"gamma0": gamma0, "eps": eps, "M": M, "speed": float("nan"),
              "e": (1.0,), "graph": True}
    phi1 = Barrier(
        kind="PowerRegularized",
        params={**common, "sign": +1},
        evaluate=make(+1.0),
        claim=Claim(operator="heat", sense="le", bound=-1.0),
        growth=gamma0 + eps,
        scale=M + 1.0,
    )
    phi2 = Barrier(
        kind="PowerRegularized",
        params={**common, "sign": -1},
        evaluate=make(-1.0),
        claim=Claim(operator="heat", sense="ge", bound=1.0),
        growth=gamma0 + eps,
        scale=M + 1.0,
    )
    return phi1, phi2


def find_power_barrier_amplitude(
    kernel: KernelSpec,
    normal,
    speed: float,
    eps: float,
    sample_points,
    sample_times,
    m_candidates=(1.0, 2.0, 4.0, 8.0, 16.0),
    h0: float = 0.02,
    refinement_levels: int = 2,
):
    """Double M until both signed claims certify on the sample collar."""
    for m_val in m_candidates:
        phi1, phi2 = power_regularized_barriers(kernel, normal, speed, eps, m_val)
        rep1 = verify_inequality(
            kernel, phi1, sample_points, sample_times=sample_times,
            refinement_levels=refinement_levels, h0=h0,
        )
        rep2 = verify_inequality(
            kernel, phi2, sample_points, sample_times=sample_times,
            refinement_levels=refinement_levels, h0=h0,
        )
        if rep1.passed and rep2.passed:
            return m_val, rep1, rep2
    raise BarrierError("amplitude doubling search failed to certify the pair")


def growth_sandwich_constants(barrier: Barrier, sample_points, sample_times):
    """Observed constants in C^-1 d^Gamma <= Phi <= C d^Gamma (flat case)."""
    gamma0 = barrier.params["gamma0"]
    speed = barrier.params["speed"]
    e = np.asarray(barrier.params["e"], dtype=float)
    slow = 1.0 / math.sqrt(1.0 + speed * speed)
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    lo, hi = math.inf, 0.0
    for t in sample_times:
        d = np.clip(pts @ e + speed * t, 0.0, None) * slow
        pos = d > 0
        if not pos.any():
            continue
        ratio = barrier.evaluate(pts, t)[pos] / d[pos] ** gamma0
        lo = min(lo, float(ratio.min()))
        hi = max(hi, float(ratio.max()))
    if not math.isfinite(lo) or hi <= 0.0:
        raise BarrierError("no sample points inside the domain")
    return lo, hi


# ---------------------------------------------------------------------------
# heat-tail supersolution


def heat_tail_supersolution(
    kernel: KernelSpec,
    cutoff: float,
    gamma0: float,
    nodes: int = 129,
    steps: int = 32,
):
    """S(x,t) = h + cutoff^{-gamma0} (t + 1) with h a linear heat evolution.

    h starts from |x|^{2s-gamma0} outside B_{cutoff/2} and evolves freely;
    the two certified bounds are S <= C cutoff^{-gamma0} inside B_{cutoff/4}
    and S >= c |x|^{2s-gamma0} on the annulus outside B_cutoff.  Returns
    (barrier, report dict with the observed constants).
    """
    if not 0.0 < gamma0 < 2.0 * kernel.s:
        raise BarrierError("gamma0 must lie in (0, 2s)")
    box = 2.0 * cutoff
    tpl = uniform_grid(box, nodes, kernel.dim, kernel.s, horizon=1.0, steps=steps)
    if kernel.dim != 1:
        raise NotImplementedError("heat-tail supersolution runs in 1D at desk scale")
    x = tpl.axis_coords(0)
    initial = np.where(np.abs(x) > cutoff / 2.0, np.abs(x) ** (2 * kernel.s - gamma0), 0.0)
    sol = solve_linear_parabolic(
        kernel, tpl,
        mask_fn=lambda t: np.zeros(nodes, dtype=bool),
        rhs_fn=lambda pts, t: np.zeros(len(pts)),
        initial=initial,
    )
    shift = cutoff ** (-gamma0)
    t_axis = sol.axis_coords(1)
    svals = sol.values + shift * (t_axis[None, :] + 0.0) + shift  # t in (0,1] ~ (t+1)

    inner = np.abs(x) <= cutoff / 4.0
    c_upper = float(np.max(svals[inner, :]) / shift)
    annulus = np.abs(x) >= cutoff
    ref = np.abs(x[annulus]) ** (2 * kernel.s - gamma0)
    c_lower = float(np.min(svals[annulus, :] / ref[:, None]))

    report = {
        "upper_constant": c_upper,
        "lower_constant": c_lower,
        "upper_holds": bool(np.isfinite(c_upper)),
        "lower_holds": bool(c_lower > 0.0),
    }

    def evaluate(pts, t=0.0):
        px = np.asarray(pts, dtype=float)[..., 0]
        xi = np.clip((px - sol.origin[0]) / sol.h, 0, nodes - 1)
        ti = np.clip((t - sol.origin[1]) / sol.dt, 0, steps)
        i0 = np.floor(xi).astype(int)
        frac = xi - i0
        i1 = np.minimum(i0 + 1, nodes - 1)
        k = int(round(float(ti)))
        base = (1 - frac) * sol.values[i0, k] + frac * sol.values[i1, k]
        return base + shift * (t + 1.0)

    barrier = Barrier(
        kind="HeatTailSuper",
        params={"cutoff": cutoff, "gamma0": gamma0},
        evaluate=evaluate,
        claim=Claim(operator="heat", sense="ge", bound=None),
        growth=2 * kernel.s - gamma0,
        scale=2.0,
    )
    return barrier, report
