"""Obstacle problems as linear complementarity problems, and linear solves.

The elliptic problem min{-L u, u - phi} = 0 discretizes to the LCP

    u >= phi,   A u >= b,   (u - phi) . (A u - b) = 0,

with A the dense matrix of -L on the box nodes (diagonal = total kernel mass
including the exterior share, off-diagonals = -w(x_j - x_i)) and b the
exterior contribution, so A is a strictly diagonally dominant M-matrix and
projected SOR converges.  The parabolic problem takes implicit Euler steps,
each a per-step LCP with A + I/dt (the explicit CFL dt ~ h^{2s} would be
ruinous near s = 1).  Slow elliptic modes are warm-started by a primal-dual
active-set iteration (direct solves on the free set) before the projected
sweeps certify the complementarity residual.

The discrete LCP solution is unique for these matrices; its coincidence with
the least-supersolution construction under refinement is assumed, not
proved here.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grids import GridFunction, uniform_grid
from .kernels import KernelSpec
from .operator import (
    ExteriorRule,
    build_far_quad,
    build_stencil,
    callable_extension,
    _far_ratio,
)


class SolverError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class ObstacleProblem:
    """Obstacle, operator, box, optional horizon, exterior rule."""

    kernel: KernelSpec
    obstacle: object            # phi(points, t=None), vectorized over (..., n)
    extent: float
    nodes: int
    horizon: float | None = None
    steps: int | None = None
    extension: ExteriorRule | None = None
    obstacle_growth: float = 0.0
    obstacle_scale: float = 1.0

    @property
    def is_parabolic(self) -> bool:
        return self.horizon is not None

    def exterior(self) -> ExteriorRule:
        if self.extension is not None:
            return self.extension
        return callable_extension(
            self.obstacle, self.obstacle_growth, self.obstacle_scale, label="obstacle"
        )

    def grid(self) -> GridFunction:
        return uniform_grid(
            self.extent, self.nodes, self.kernel.dim, self.kernel.s,
            horizon=self.horizon, steps=self.steps,
        )


@dataclass
class SolveReport:
    iterations: int
    residual: float
    active_sizes: tuple
    wall_time: float
    complementarity_scale: float
    obstacle_smoothness: float = 0.0
    upwind: bool = False
    warm_start_cycles: int = 0
    active_growth_events: tuple = ()

    def csv_fields(self):
        """Deterministic fields only: wall time stays out of file outputs."""
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "final_active": self.active_sizes[-1] if self.active_sizes else 0,
            "scale": self.complementarity_scale,
            "upwind": int(self.upwind),
        }


# ---------------------------------------------------------------------------
# dense assembly


def _spatial_coords(grid: GridFunction):
    axes = [grid.axis_coords(a) for a in range(grid.space_dim)]
    if grid.space_dim == 1:
        return axes[0][:, None]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, grid.space_dim)


def assemble_operator(
    kernel: KernelSpec,
    grid: GridFunction,
    extension: ExteriorRule,
    t=None,
    tol: float = 1e-8,
    upwind: bool = False,
):
    """Dense matrix A of -L on the grid nodes plus exterior vector b.

    (-L u)(x_i) corresponds to (A u - b)_i.  Centered drift by default;
    ``upwind`` switches to the monotone first-order stencil (used when the
    centered matrix loses the M-matrix sign pattern).
    """
    if not kernel.symmetric and abs(kernel.s - 0.5) > 1e-12:
        raise NotImplementedError("grid assembly for non-symmetric densities needs s = 1/2")
    if grid.has_time:
        raise ValueError("assemble_operator expects a spatial grid")
    shape = grid.values.shape
    n = int(np.prod(shape))
    h = grid.h
    box_width = h * (max(shape) - 1)
    stencil = build_stencil(kernel, h, max(box_width, 2 * h))
    pad = stencil.pad

    a_mat = np.zeros((n, n))
    diag = stencil.center_weight + stencil.far_mass
    idx = np.arange(n)
    a_mat[idx, idx] = diag

    if len(shape) == 1:
        for m, (off,) in enumerate(stencil.offsets):
            k = int(off)
            if k >= shape[0]:
                continue
            we, wo = stencil.w_even[m], stencil.w_odd[m]
            rows = np.arange(0, shape[0] - k)
            a_mat[rows, rows + k] -= we + wo
            a_mat[rows + k, rows] -= we - wo
    else:
        n0, n1 = shape
        flat = np.arange(n).reshape(shape)
        for m in range(len(stencil.offsets)):
            o0, o1 = int(stencil.offsets[m, 0]), int(stencil.offsets[m, 1])
            if abs(o0) >= n0 or abs(o1) >= n1:
                continue
            we, wo = stencil.w_even[m], stencil.w_odd[m]
            src0 = slice(max(0, -o0), min(n0, n0 - o0))
            src1 = slice(max(0, -o1), min(n1, n1 - o1))
            dst0 = slice(max(0, o0), min(n0, n0 + o0))
            dst1 = slice(max(0, o1), min(n1, n1 + o1))
            rows = flat[src0, src1].ravel()
            cols = flat[dst0, dst1].ravel()
            a_mat[rows, cols] -= we + wo
            a_mat[cols, rows] -= we - wo

    # exterior contribution: stencil applied to the extension values with the
    # core zeroed, plus the graded far field
    ext_pad = _padded_extension_only(grid, pad, extension, t)
    if len(shape) == 1:
        b = _kernels.stencil_apply_1d(ext_pad, stencil.w_even, stencil.w_odd, shape[0], pad)
    else:
        b = _kernels.stencil_apply_2d(
            ext_pad, stencil.offsets, stencil.w_even, stencil.w_odd,
            shape[0], shape[1], pad, pad,
        ).reshape(-1)

    far = build_far_quad(
        kernel, stencil.radius, extension.growth, extension.scale, tol,
        _far_ratio(h), angular=64 if kernel.dim == 2 else 1,
    )
    if len(far.points):
        coords = _spatial_coords(grid)
        step = max(1, 4_000_000 // max(n, 1))
        for lo in range(0, len(far.points), step):
            sl = slice(lo, lo + step)
            fp = extension(coords[:, None, :] + far.points[None, sl, :], t)
            fm = extension(coords[:, None, :] - far.points[None, sl, :], t)
            b += fp @ far.w_even[sl] + fm @ far.w_even[sl]
            if np.any(far.w_odd[sl] != 0.0):
                b += (fp - fm) @ far.w_odd[sl]

    drift = kernel.drift_vector + stencil.drift_extra
    used_upwind = False
    if np.any(drift != 0.0):
        used_upwind = upwind
        a_mat, b = _add_drift(a_mat, b, drift, grid, ext_pad, pad, upwind)

    # b holds +L-contributions of the exterior; -L u >= 0 reads A u >= b
    return a_mat, b.reshape(-1), stencil, used_upwind


def _padded_extension_only(grid: GridFunction, pad: int, extension: ExteriorRule, t):
    shape = grid.values.shape
    axes = [
        grid.origin[a] + grid.h * np.arange(-pad, shape[a] + pad)
        for a in range(len(shape))
    ]
    if len(shape) == 1:
        coords = axes[0][:, None]
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = np.stack(mesh, axis=-1)
    vals = extension(coords, t).reshape(tuple(n + 2 * pad for n in shape))
    core = tuple(slice(pad, pad + n) for n in shape)
    vals[core] = 0.0
    return vals


def _add_drift(a_mat, b, drift, grid, ext_pad, pad, upwind):
    """Drift contributes -(b . grad u) to A u - b; neighbors may be exterior."""
    shape = grid.values.shape
    n = int(np.prod(shape))
    h = grid.h
    flat = np.arange(n).reshape(shape)
    for axis in range(len(shape)):
        d = float(drift[axis])
        if d == 0.0:
            continue
        if not upwind:
            coef_plus, coef_minus, coef_diag = -d / (2 * h), d / (2 * h), 0.0
        elif d > 0.0:
            coef_plus, coef_minus, coef_diag = -d / h, 0.0, d / h
        else:
            coef_plus, coef_minus, coef_diag = 0.0, d / h, -d / h
        idx = np.arange(n)
        a_mat[idx, idx] += coef_diag
        for coef, shift in ((coef_plus, 1), (coef_minus, -1)):
            if coef == 0.0:
                continue
            src = [slice(None)] * len(shape)
            dst = [slice(None)] * len(shape)
            if shift > 0:
                src[axis] = slice(0, shape[axis] - 1)
                dst[axis] = slice(1, shape[axis])
            else:
                src[axis] = slice(1, shape[axis])
                dst[axis] = slice(0, shape[axis] - 1)
            rows = flat[tuple(src)].ravel()
            cols = flat[tuple(dst)].ravel()
            a_mat[rows, cols] += coef
            # boundary rows pick the neighbor from the extension
            edge = [slice(None)] * len(shape)
            edge[axis] = slice(shape[axis] - 1, shape[axis]) if shift > 0 else slice(0, 1)
            edge_rows = flat[tuple(edge)].ravel()
            pad_idx = [slice(pad, pad + m) for m in shape]
            pad_idx[axis] = (
                slice(pad + shape[axis], pad + shape[axis] + 1)
                if shift > 0
                else slice(pad - 1, pad)
            )
            b[edge_rows] -= coef * ext_pad[tuple(pad_idx)].ravel()
    return a_mat, b


def matrix_is_monotone(a_mat) -> bool:
    off = a_mat - np.diag(np.diag(a_mat))
    return bool(np.all(np.diag(a_mat) > 0) and np.all(off <= 1e-14))


# ---------------------------------------------------------------------------
# LCP kernel


def lcp_residual(a_mat, b, lower, u):
    return float(np.max(np.abs(np.minimum(u - lower, a_mat @ u - b))))


def solve_lcp(
    a_mat,
    b,
    lower,
    tol: float,
    max_iter: int = 20_000,
    omega: float = 1.5,
    warm_start=None,
    stagnation_window: int = 50,
):
    """Projected SOR for u >= lower, A u >= b, complementarity = 0.

    Sweeps alternate lexicographic forward and backward to remove directional
    bias.  Aborts with diagnostics if the residual decays by less than 1e-3
    relative over ``stagnation_window`` sweep pairs.
    """
    a_mat = np.ascontiguousarray(a_mat, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    lower = np.ascontiguousarray(lower, dtype=float)
    u = np.array(warm_start if warm_start is not None else lower, dtype=float)
    u = np.maximum(u, lower)

    resid = lcp_residual(a_mat, b, lower, u)
    history = [resid]
    sweeps = 0
    while resid > tol and sweeps < max_iter:
        _kernels.psor_sweep(a_mat, b, lower, u, omega, False)
        _kernels.psor_sweep(a_mat, b, lower, u, omega, True)
        sweeps += 2
        resid = lcp_residual(a_mat, b, lower, u)
        history.append(resid)
        if len(history) > stagnation_window:
            prev = history[-stagnation_window - 1]
            if prev > 0 and (prev - resid) / prev < 1e-3 and resid > tol:
                raise SolverError(
                    "projected SOR stagnated",
                    diagnostics={
                        "residual": resid,
                        "sweeps": sweeps,
                        "window_start_residual": prev,
                    },
                )
    if resid > tol:
        raise SolverError(
            "projected SOR did not converge within the iteration cap",
            diagnostics={"residual": resid, "sweeps": sweeps},
        )
    return u, sweeps, resid


def active_set_warm_start(a_mat, b, lower, max_cycles: int = 60):
    """Primal-dual active-set iteration (direct solves on the free set)."""
    n = len(b)
    scale = float(np.mean(np.diag(a_mat)))
    active = np.ones(n, dtype=bool)
    u = lower.copy()
    cycles = 0
    seen = set()
    for cycles in range(1, max_cycles + 1):
        free = ~active
        u = lower.copy()
        if free.any():
            sub = a_mat[np.ix_(free, free)]
            rhs = b[free] - a_mat[np.ix_(free, active)] @ lower[active]
            try:
                u[free] = np.linalg.solve(sub, rhs)
            except np.linalg.LinAlgError:
                return lower.copy(), cycles
        lam = a_mat @ u - b
        new_active = (lam - scale * (u - lower)) > 0.0
        key = new_active.tobytes()
        if np.array_equal(new_active, active) or key in seen:
            break
        seen.add(key)
        active = new_active
    return np.maximum(u, lower), cycles


# ---------------------------------------------------------------------------
# obstacle solves


def _obstacle_on_grid(problem: ObstacleProblem, grid: GridFunction, t=None):
    coords = _spatial_coords(grid)
    return np.asarray(problem.obstacle(coords, t), dtype=float).reshape(-1)


def _smoothness_proxy(phi_vec, shape, h):
    arr = phi_vec.reshape(shape)
    worst = 0.0
    for axis in range(arr.ndim):
        second = np.diff(arr, n=2, axis=axis) / (h * h)
        if second.size:
            worst = max(worst, float(np.max(np.abs(second))))
    return worst


def solve_elliptic_obstacle(problem: ObstacleProblem, tol: float = 1e-8):
    """Smallest supersolution above the obstacle, via PDAS + projected SOR."""
    if problem.is_parabolic:
        raise ValueError("elliptic solve got a problem with a horizon")
    t0 = time.perf_counter()
    grid = problem.grid()
    ext = problem.exterior()
    a_mat, b, stencil, upwind = assemble_operator(problem.kernel, grid, ext, tol=tol)
    if not matrix_is_monotone(a_mat) and problem.kernel.has_drift:
        a_mat, b, stencil, upwind = assemble_operator(
            problem.kernel, grid, ext, tol=tol, upwind=True
        )
    phi = _obstacle_on_grid(problem, grid)
    scale = tol * (float(np.max(np.abs(a_mat @ phi - b))) + 1.0)

    warm, cycles = active_set_warm_start(a_mat, b, phi)
    u, sweeps, resid = solve_lcp(a_mat, b, phi, tol=scale, warm_start=warm)
    u = np.maximum(u, phi)

    report = SolveReport(
        iterations=sweeps,
        residual=resid,
        active_sizes=(int(np.sum(u - phi <= scale)),),
        wall_time=time.perf_counter() - t0,
        complementarity_scale=scale,
        obstacle_smoothness=_smoothness_proxy(phi, grid.values.shape, grid.h),
        upwind=upwind,
        warm_start_cycles=cycles,
    )
    out = grid.map_like(u.reshape(grid.values.shape))
    return out, report


def solve_parabolic_obstacle(problem: ObstacleProblem, tol: float = 1e-8):
    """Implicit Euler steps, each a projected-SOR LCP; u(., 0) = obstacle."""
    if not problem.is_parabolic:
        raise ValueError("parabolic solve needs a horizon")
    t0 = time.perf_counter()
    st_grid = problem.grid()
    spatial = st_grid.time_slice(0)
    ext = problem.exterior()
    dt = st_grid.dt
    steps = st_grid.values.shape[-1] - 1

    a_mat, b_ext, stencil, upwind = assemble_operator(problem.kernel, spatial, ext, tol=tol)
    if not matrix_is_monotone(a_mat) and problem.kernel.has_drift:
        a_mat, b_ext, stencil, upwind = assemble_operator(
            problem.kernel, spatial, ext, tol=tol, upwind=True
        )
    phi = _obstacle_on_grid(problem, spatial)
    scale = tol * (float(np.max(np.abs(a_mat @ phi - b_ext))) + 1.0)

    n = len(phi)
    a_step = a_mat + np.eye(n) / dt
    values = np.empty(st_grid.values.shape)
    flat_shape = spatial.values.shape
    values[..., 0] = phi.reshape(flat_shape)
    u = phi.copy()
    total_sweeps = 0
    worst = 0.0
    active_sizes = [n]
    growth_events = []
    for k in range(1, steps + 1):
        b_k = b_ext + u / dt
        u_new, sweeps, resid = solve_lcp(a_step, b_k, phi, tol=scale, warm_start=u)
        u_new = np.maximum(u_new, phi)
        total_sweeps += sweeps
        worst = max(worst, resid)
        size = int(np.sum(u_new - phi <= scale))
        if size > active_sizes[-1]:
            growth_events.append(k)
        active_sizes.append(size)
        values[..., k] = u_new.reshape(flat_shape)
        u = u_new

    report = SolveReport(
        iterations=total_sweeps,
        residual=worst,
        active_sizes=tuple(active_sizes),
        wall_time=time.perf_counter() - t0,
        complementarity_scale=scale,
        obstacle_smoothness=_smoothness_proxy(phi, flat_shape, spatial.h),
        upwind=upwind,
        active_growth_events=tuple(growth_events),
    )
    return st_grid.map_like(values), report


def solve_linear_parabolic(
    kernel: KernelSpec,
    grid_template: GridFunction,
    mask_fn,
    rhs_fn,
    initial,
    tol: float = 1e-9,
):
    """Implicit steps of dt v - L v = f with v = 0 enforced on a closed set.

    ``mask_fn(t)`` returns the boolean vanishing-set mask over the spatial
    grid at time t (True = forced to zero); ``rhs_fn(points, t)`` the forcing.
    The exterior is zero.  Returns the space-time grid of v.
    """
    if not grid_template.has_time:
        raise ValueError("needs a space-time grid template")
    spatial = grid_template.time_slice(0)
    shape = spatial.values.shape
    n = int(np.prod(shape))
    dt = grid_template.dt
    steps = grid_template.values.shape[-1] - 1

    from .operator import zero_extension

    a_mat, b_ext, stencil, _ = assemble_operator(kernel, spatial, zero_extension(), tol=tol)
    a_step = a_mat + np.eye(n) / dt
    coords = _spatial_coords(spatial)

    neg_inf = np.full(n, -1e300)
    values = np.empty(grid_template.values.shape)
    v = np.asarray(initial, dtype=float).reshape(-1).copy()
    t = grid_template.origin[-1]
    mask0 = np.asarray(mask_fn(t), dtype=bool).reshape(-1)
    v[mask0] = 0.0
    values[..., 0] = v.reshape(shape)
    for k in range(1, steps + 1):
        t = grid_template.origin[-1] + k * dt
        mask = np.asarray(mask_fn(t), dtype=bool).reshape(-1)
        free = ~mask
        if not free.any():
            raise SolverError("vanishing set covers the whole box at a step")
        f_k = np.asarray(rhs_fn(coords, t), dtype=float).reshape(-1)
        rhs = v / dt + f_k
        sub = a_step[np.ix_(free, free)]
        sub_rhs = rhs[free]
        v_new = np.zeros(n)
        start = v[free]
        sol, _, _ = solve_lcp(
            sub, sub_rhs, neg_inf[: int(free.sum())], tol=tol * (1.0 + np.max(np.abs(sub_rhs))),
            warm_start=start,
        )
        v_new[free] = sol
        values[..., k] = v_new.reshape(shape)
        v = v_new
    return grid_template.map_like(values)
