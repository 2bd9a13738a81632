"""Free-boundary extraction, growth exponents, blow-ups, and classification.

A boundary point is Regular when the gap u - phi grows like r^{1+gamma} on
shrinking cylinders, with gamma tied to the boundary speed in the critical
case (gamma = 1/2 + arctan(v0 / A(e)) / pi) and gamma = s above it;
quadratic-or-flatter growth is Degenerate.  Growth exponents come from
log-log fits of cylinder suprema; speeds from total-least-squares plane fits
of the space-time boundary cloud.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.optimize import minimize

from .grids import GridError, GridFunction
from .kernels import KernelSpec
from .profiles import Profile1D, gamma_critical


class BoundaryError(ValueError):
    pass


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClassifierConfig:
    """Desk-scale classification thresholds (kept in config, not call sites)."""

    delta_cls: float = 0.12
    eps_degenerate: float = 0.2
    min_r2: float = 0.98


@dataclass(frozen=True)
class Classification:
    kind: str  # "regular" | "degenerate" | "unresolved"
    gamma: float | None = None

    def __str__(self):
        if self.kind == "regular" and self.gamma is not None:
            return f"Regular(gamma={self.gamma:.4f})"
        return self.kind.capitalize()


@dataclass(frozen=True)
class FreeBoundaryPoint:
    location: tuple
    normal: tuple
    speed: float
    beta: float
    r2: float
    classification: Classification
    gamma_pred: float | None = None
    kappa: float | None = None
    lip_distance: float | None = None


@dataclass(frozen=True)
class GrowthFit:
    beta: float
    r2: float
    radii: tuple
    sups: tuple
    narrow_range: bool


def contact_set(u: GridFunction, phi: np.ndarray, gap_tol: float) -> np.ndarray:
    """Nodes where u - phi <= gap_tol * local scale (scale = max(1, |phi|))."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != u.values.shape:
        raise BoundaryError("obstacle values must live on the solution grid")
    scale = np.maximum(1.0, np.abs(phi))
    return (u.values - phi) <= gap_tol * scale


def extract_boundary(mask: np.ndarray, w: GridFunction, gap_tol: float = 0.0) -> np.ndarray:
    """Sub-grid boundary points by linear interpolation along crossing edges.

    ``w`` holds the gap u - phi on the same grid as ``mask``.  Returns an
    (m, d) array of physical coordinates (space-time for parabolic grids).
    """
    if not mask.any():
        raise BoundaryError("contact set is empty: no free boundary")
    if mask.all():
        raise BoundaryError("contact set covers the grid: no free boundary")
    scale = np.maximum(1.0, np.abs(w.values))
    level = w.values - gap_tol * scale
    points = []
    ndim = mask.ndim
    steps = [w.h] * w.space_dim + ([w.dt] if w.has_time else [])
    for axis in range(ndim):
        sl_a = [slice(None)] * ndim
        sl_b = [slice(None)] * ndim
        sl_a[axis] = slice(0, mask.shape[axis] - 1)
        sl_b[axis] = slice(1, mask.shape[axis])
        cross = mask[tuple(sl_a)] != mask[tuple(sl_b)]
        if not cross.any():
            continue
        idx = np.argwhere(cross)
        da = level[tuple(sl_a)][cross]
        db = level[tuple(sl_b)][cross]
        denom = np.where(np.abs(db - da) > 1e-300, db - da, 1.0)
        frac = np.clip(-da / denom, 0.0, 1.0)
        coords = np.empty((len(idx), ndim))
        for a in range(ndim):
            coords[:, a] = w.origin[a] + idx[:, a] * steps[a]
        coords[:, axis] += frac * steps[axis]
        points.append(coords)
    if not points:
        raise BoundaryError("mask has no crossing edges")
    return np.vstack(points)


def estimate_normal_speed(points: np.ndarray, center, radius: float, w: GridFunction | None = None):
    """Total-least-squares space-time plane fit near ``center``.

    Returns (nu, v0): nu the unit normal oriented into {u > phi} (when ``w``
    is supplied for orientation), v0 = nu_t / |nu_x| for space-time clouds.
    A cloud with fewer than d+2 points or rank-deficient spread raises
    BoundaryError (callers map this to Unresolved).
    """
    points = np.asarray(points, dtype=float)
    center = np.asarray(center, dtype=float)
    d = points.shape[1]
    sel = points[np.linalg.norm(points - center, axis=1) <= radius]
    if len(sel) < d + 2:
        raise BoundaryError(f"need at least {d + 2} boundary points in the ball")
    centered = sel - sel.mean(axis=0)
    _, svals, vt = np.linalg.svd(centered, full_matrices=True)
    if len(svals) < d or (d > 1 and svals[d - 2] < 1e-10):
        raise BoundaryError("rank-deficient boundary cloud")
    nu = vt[-1]
    if w is not None:
        probe = 2.0 * w.h
        up = _sample_value(w, center + probe * nu)
        dn = _sample_value(w, center - probe * nu)
        if dn > up:
            nu = -nu
    elif nu[-1] < 0:
        nu = -nu
    if w is not None and w.has_time:
        nu_x = nu[:-1]
        nx = float(np.linalg.norm(nu_x))
        v0 = math.inf if nx < 1e-8 else float(nu[-1] / nx)
    else:
        v0 = 0.0
    return nu, v0


def _sample_value(grid: GridFunction, point) -> float:
    steps = [grid.h] * grid.space_dim + ([grid.dt] if grid.has_time else [])
    idx = [(point[a] - grid.origin[a]) / steps[a] for a in range(grid.values.ndim)]
    idx = [np.clip(i, 0, grid.values.shape[a] - 1) for a, i in enumerate(idx)]
    return float(map_coordinates(grid.values, [[i] for i in idx], order=1, mode="nearest")[0])


def fit_growth_exponent(
    w: GridFunction,
    point,
    r_min: float,
    r_max: float,
    n_radii: int = 8,
) -> GrowthFit:
    """Log-log slope of sup_{Q_r} w over geometrically spaced radii.

    Suprema are taken over grid nodes strictly inside the cylinder (one-sided
    bias, documented); radii below 4h are rejected as unresolvable.
    """
    if r_min < 4.0 * w.h - 1e-12:
        raise BoundaryError("r_min below 4h: cylinder suprema are unresolved")
    if r_max <= r_min:
        raise BoundaryError("need r_max > r_min")
    radii = np.geomspace(r_min, r_max, n_radii)
    sups = []
    for r in radii:
        sl = w.cylinder_slices(point, r)
        block = w.values[sl]
        ball = w.ball_mask(sl, np.asarray(point)[: w.space_dim], r)
        vals = block[ball]
        if vals.size == 0:
            raise BoundaryError(f"cylinder at r={r} contains no nodes")
        sup = float(vals.max())
        if sup <= 0.0:
            raise BoundaryError(
                f"sup over the cylinder at r={r} vanishes: point lies inside "
                "the contact set"
            )
        sups.append(sup)
    logs_r = np.log(radii)
    logs_s = np.log(sups)
    slope, intercept = np.polyfit(logs_r, logs_s, 1)
    pred = slope * logs_r + intercept
    ss_res = float(np.sum((logs_s - pred) ** 2))
    ss_tot = float(np.sum((logs_s - logs_s.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return GrowthFit(
        beta=float(slope),
        r2=r2,
        radii=tuple(radii),
        sups=tuple(sups),
        narrow_range=bool(r_max / r_min < 10.0),
    )


def classify_point(
    beta: float,
    v0: float,
    kernel: KernelSpec,
    normal_space=None,
    config: ClassifierConfig = ClassifierConfig(),
) -> Classification:
    """Dichotomy: Regular at the speed-law exponent, Degenerate near 2."""
    if beta >= 2.0 - config.eps_degenerate:
        return Classification(kind="degenerate")
    if abs(kernel.s - 0.5) < 1e-12:
        if normal_space is None:
            e = np.zeros(kernel.dim)
            e[0] = 1.0
        else:
            e = np.asarray(normal_space, dtype=float)
            norm = np.linalg.norm(e)
            if norm < 1e-12:
                return Classification(kind="unresolved")
            e = e / norm
        if not np.isfinite(v0):
            return Classification(kind="unresolved")
        gamma_pred = gamma_critical(kernel, e, max(v0, 0.0))
    else:
        gamma_pred = kernel.s
    if abs(beta - (1.0 + gamma_pred)) <= config.delta_cls:
        return Classification(kind="regular", gamma=gamma_pred)
    return Classification(kind="unresolved")


def blow_up_rescale(
    u: GridFunction,
    point,
    r: float,
    norm_mode: str = "gradient",
    out_nodes: int = 33,
    out_steps: int = 32,
) -> GridFunction:
    """Parabolic rescaling onto the unit cylinder.

    u~(x, t) = u(x0 + r x, t0 + r^{2s} t) / N_r with N_r the gradient
    normalization r sup|grad u| + r^{2s} sup|du/dt| over Q_r (mode
    "gradient") or the plain supremum (mode "sup").
    """
    point = np.asarray(point, dtype=float)
    sl = u.cylinder_slices(point, r)
    block = u.values[sl]
    if norm_mode == "gradient":
        grads = np.gradient(block, *( [u.h] * u.space_dim + ([u.dt] if u.has_time else []) ))
        if u.values.ndim == 1:
            grads = [grads]
        denom = r * max(float(np.max(np.abs(g))) for g in grads[: u.space_dim])
        if u.has_time:
            denom += r ** (2.0 * u.s) * float(np.max(np.abs(grads[-1])))
    elif norm_mode == "sup":
        denom = float(np.max(np.abs(block)))
    else:
        raise ValueError("norm_mode must be 'gradient' or 'sup'")
    if denom <= 0.0:
        raise BoundaryError("rescaling denominator vanishes: point is deep in the contact set")

    space_axes = [np.linspace(-1.0, 1.0, out_nodes) for _ in range(u.space_dim)]
    steps = [u.h] * u.space_dim + ([u.dt] if u.has_time else [])
    axes_out = space_axes
    if u.has_time:
        axes_out = space_axes + [np.linspace(-1.0, 1.0, out_steps + 1)]
    mesh = np.meshgrid(*axes_out, indexing="ij")
    idx = []
    for a in range(u.values.ndim):
        scale = r if a < u.space_dim else r ** (2.0 * u.s)
        phys = point[a] + mesh[a] * scale
        idx.append((phys - u.origin[a]) / steps[a])
    vals = map_coordinates(u.values, idx, order=1, mode="nearest") / denom
    out_h = 2.0 / (out_nodes - 1)
    out_dt = 2.0 / out_steps if u.has_time else None
    origin = (-1.0,) * u.space_dim + ((-1.0,) if u.has_time else ())
    return GridFunction(values=vals, h=out_h, origin=origin, s=u.s, dt=out_dt)


def lip_distance(a: GridFunction, b_vals: np.ndarray) -> float:
    """Sup of value and difference-quotient deviations over the cylinder."""
    diff = a.values - b_vals
    worst = float(np.max(np.abs(diff)))
    steps = [a.h] * a.space_dim + ([a.dt] if a.has_time else [])
    for axis in range(diff.ndim):
        quot = np.diff(diff, axis=axis) / steps[axis]
        worst = max(worst, float(np.max(np.abs(quot))))
    return worst


def fit_1d_profile(rescaled: GridFunction, kernel: KernelSpec, restarts: int = 8):
    """Nonlinear least squares for (kappa, e, v) with the exponent tied.

    The exponent is not free: gamma = gamma(A(e), v) in the critical case and
    gamma = s above it, so the fit has 2 (1D) or 3 (2D) parameters.  Raises
    FitError when no restart converges (callers map this to Unresolved).
    """
    s = kernel.s
    critical = abs(s - 0.5) < 1e-12
    mesh = rescaled.meshgrid()
    space = np.stack(mesh[: rescaled.space_dim], axis=-1)
    tvals = mesh[-1] if rescaled.has_time else 0.0

    def profile_values(kappa, e, v):
        gamma = gamma_critical(kernel, e, v) if critical else s
        zeta = space @ np.asarray(e) + (v * tvals if rescaled.has_time else 0.0)
        out = np.zeros_like(zeta)
        pos = zeta > 0
        out[pos] = kappa * zeta[pos] ** (1.0 + gamma)
        return out, gamma

    target = rescaled.values

    def loss(params, e_dir):
        kappa = abs(params[0])
        v = abs(params[1]) if critical and rescaled.has_time else 0.0
        vals, _ = profile_values(kappa, e_dir, v)
        return float(np.mean((vals - target) ** 2))

    sup_t = float(np.max(np.abs(target))) or 1.0
    best = None
    if kernel.dim == 1:
        directions = [np.array([1.0]), np.array([-1.0])]
    else:
        angles = np.linspace(0, 2 * math.pi, 8, endpoint=False)
        directions = [np.array([math.cos(a), math.sin(a)]) for a in angles]
    v_inits = [0.0, 1.0] if critical and rescaled.has_time else [0.0]
    tries = 0
    for e_dir in directions:
        for v0 in v_inits:
            if tries >= max(restarts, len(directions)):
                break
            tries += 1
            res = minimize(
                loss, x0=np.array([sup_t, v0]), args=(e_dir,), method="Nelder-Mead",
                options={"xatol": 1e-8, "fatol": 1e-14, "maxiter": 800},
            )
            if not np.isfinite(res.fun):
                continue
            if best is None or res.fun < best[0]:
                best = (res.fun, abs(res.x[0]), e_dir, abs(res.x[1]) if critical and rescaled.has_time else 0.0)
    if best is None:
        raise FitError("profile fit failed from all restarts")
    _, kappa, e_dir, v = best
    if kernel.dim == 2:
        # polish the direction angle around the best coarse direction
        base = math.atan2(e_dir[1], e_dir[0])

        def loss_ang(params):
            ang = params[2]
            e = np.array([math.cos(ang), math.sin(ang)])
            return loss([params[0], params[1]], e)

        res = minimize(
            loss_ang, x0=np.array([kappa, v, base]), method="Nelder-Mead",
            options={"xatol": 1e-9, "fatol": 1e-15, "maxiter": 1200},
        )
        kappa, v = abs(res.x[0]), (abs(res.x[1]) if critical and rescaled.has_time else 0.0)
        e_dir = np.array([math.cos(res.x[2]), math.sin(res.x[2])])
    gamma = gamma_critical(kernel, e_dir, v) if critical else s
    vals, _ = profile_values(kappa, e_dir, v)
    prof = Profile1D(kappa=float(kappa), e=tuple(e_dir), v=float(v), gamma=float(gamma), s=s)
    return prof, lip_distance(rescaled, vals)


def analyze_boundary(
    u: GridFunction,
    phi: np.ndarray,
    kernel: KernelSpec,
    gap_tol: float = 1e-6,
    config: ClassifierConfig = ClassifierConfig(),
    normal_radius: float | None = None,
    r_min: float | None = None,
    r_max: float | None = None,
    max_points: int = 50,
    seed: int = 0,
    time_window: tuple | None = None,
):
    """End-to-end per-point pipeline: extract, fit, classify.

    Returns a list of FreeBoundaryPoint.  Points whose fits fail are reported
    as Unresolved rather than dropped.  ``time_window`` restricts the analyzed
    cloud (the instantaneous lift-off face at t = 0 is rarely informative).
    """
    mask = contact_set(u, phi, gap_tol)
    w = u.map_like(u.values - np.asarray(phi))
    cloud = extract_boundary(mask, w, gap_tol)
    if time_window is not None and u.has_time:
        keep = (cloud[:, -1] >= time_window[0]) & (cloud[:, -1] <= time_window[1])
        cloud = cloud[keep]
        if len(cloud) == 0:
            raise BoundaryError("no boundary points inside the time window")
    rng = np.random.default_rng(seed)
    if len(cloud) > max_points:
        pick = rng.choice(len(cloud), size=max_points, replace=False)
        cloud_sel = cloud[np.sort(pick)]
    else:
        cloud_sel = cloud
    box_r = u.h * (max(u.values.shape[: u.space_dim]) - 1) / 2.0
    r_lo = r_min if r_min is not None else 4.0 * u.h
    r_hi = r_max if r_max is not None else box_r / 4.0
    nr = normal_radius if normal_radius is not None else max(6.0 * u.h, 0.1 * box_r)

    results = []
    for pt in cloud_sel:
        try:
            nu, v0 = estimate_normal_speed(cloud, pt, nr, w=w)
        except BoundaryError:
            results.append(
                FreeBoundaryPoint(
                    location=tuple(pt), normal=(), speed=math.nan, beta=math.nan,
                    r2=0.0, classification=Classification(kind="unresolved"),
                )
            )
            continue
        try:
            fit = fit_growth_exponent(w, pt, r_lo, r_hi)
        except (BoundaryError, GridError):
            results.append(
                FreeBoundaryPoint(
                    location=tuple(pt), normal=tuple(nu), speed=v0, beta=math.nan,
                    r2=0.0, classification=Classification(kind="unresolved"),
                )
            )
            continue
        if fit.r2 < config.min_r2:
            cls = Classification(kind="unresolved")
        else:
            nsp = nu[:-1] if u.has_time else nu
            cls = classify_point(fit.beta, v0, kernel, normal_space=nsp, config=config)
        results.append(
            FreeBoundaryPoint(
                location=tuple(pt),
                normal=tuple(nu),
                speed=v0,
                beta=fit.beta,
                r2=fit.r2,
                classification=cls,
                gamma_pred=cls.gamma,
            )
        )
    return results
