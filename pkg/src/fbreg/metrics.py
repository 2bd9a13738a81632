"""Holder-type seminorm estimators and exponent fits.

The parabolic seminorm sup |w(x,t) - w(y,tau)| / (|x-y|^beta +
|t-tau|^{beta/2s}) is evaluated exactly by an all-pairs scan on small
regions and by seeded random sampling with local hill-climbing above the
budget; the sampled value never exceeds the exact one.  Time-regularity
measurements are one-sided by design: a finite grid can certify a lower
bound on smoothness but cannot falsify upper regularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grids import GridFunction


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class HolderReport:
    beta: float
    value: float
    pair: tuple          # ((coords), (coords)) attaining the sup
    mode: str            # "spatial" | "parabolic"
    exact: bool
    node_count: int


def _region_nodes(w: GridFunction, region):
    if region is None:
        mask = np.ones(w.values.shape, dtype=bool)
    elif isinstance(region, np.ndarray) and region.dtype == bool:
        mask = region
    else:
        mask = np.zeros(w.values.shape, dtype=bool)
        mask[region] = True
    idx = np.argwhere(mask)
    steps = [w.h] * w.space_dim + ([w.dt] if w.has_time else [])
    coords = np.empty((len(idx), w.values.ndim))
    for a in range(w.values.ndim):
        coords[:, a] = w.origin[a] + idx[:, a] * steps[a]
    vals = w.values[mask]
    return coords, vals


EXACT_PAIR_LIMIT = 10_000


def parabolic_holder_seminorm(
    w: GridFunction,
    beta: float,
    region=None,
    pair_budget: int = 2_000_000,
    seed: int = 0,
    mode: str | None = None,
) -> HolderReport:
    """Seminorm over the region; exact when the node count allows it."""
    if not 0.0 < beta < 1.0:
        raise MetricsError("exponent must lie in (0, 1)")
    coords, vals = _region_nodes(w, region)
    m = len(vals)
    if m == 0:
        raise MetricsError("empty region")
    if mode is None:
        mode = "parabolic" if w.has_time else "spatial"
    if mode == "parabolic" and not w.has_time:
        raise MetricsError("parabolic mode needs a time axis")
    tpow = beta / (2.0 * w.s)
    if mode == "parabolic":
        space = coords[:, :-1]
        tvals = coords[:, -1]
    else:
        space = coords
        tvals = None

    if m <= EXACT_PAIR_LIMIT:
        val, i, j = _kernels.allpairs_max_ratio(vals, space, tvals, beta, tpow)
        return HolderReport(
            beta=beta, value=float(val),
            pair=(tuple(coords[i]), tuple(coords[j])),
            mode=mode, exact=True, node_count=m,
        )

    rng = np.random.default_rng(seed)
    n_pairs = max(pair_budget, 1)
    best = 0.0
    bi = bj = 0
    # extremal pairs concentrate on short distances: scan a few node strides
    # along every axis exactly before sampling long-range pairs
    shape = w.values.shape
    axis_strides = {int(np.prod(shape[a + 1 :], dtype=int)) for a in range(len(shape))}
    strides = sorted(({1, 2, 4} | axis_strides | {2 * s for s in axis_strides}))
    for stride in strides:
        if stride < 1 or stride >= m:
            continue
        ii = np.arange(m - stride)
        jj = ii + stride
        denom = np.linalg.norm(space[ii] - space[jj], axis=1) ** beta
        if tvals is not None:
            denom = denom + np.abs(tvals[ii] - tvals[jj]) ** tpow
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(vals[ii] - vals[jj]) / np.where(denom > 0, denom, np.inf)
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best, bi, bj = float(ratio[k]), int(ii[k]), int(jj[k])
    chunk = 200_000
    drawn = 0
    while drawn < n_pairs:
        take = min(chunk, n_pairs - drawn)
        ii = rng.integers(0, m, size=take)
        jj = rng.integers(0, m, size=take)
        keep = ii != jj
        ii, jj = ii[keep], jj[keep]
        denom = np.linalg.norm(space[ii] - space[jj], axis=1) ** beta
        if tvals is not None:
            denom = denom + np.abs(tvals[ii] - tvals[jj]) ** tpow
        ratio = np.abs(vals[ii] - vals[jj]) / np.where(denom > 0, denom, np.inf)
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best, bi, bj = float(ratio[k]), int(ii[k]), int(jj[k])
        drawn += take
    # local refinement: greedy swaps of either endpoint among all nodes
    for _ in range(6):
        improved = False
        for side in (0, 1):
            anchor = bj if side == 0 else bi
            denom = np.linalg.norm(space - space[anchor], axis=1) ** beta
            if tvals is not None:
                denom = denom + np.abs(tvals - tvals[anchor]) ** tpow
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.abs(vals - vals[anchor]) / np.where(denom > 0, denom, np.inf)
            k = int(np.argmax(ratio))
            if ratio[k] > best + 1e-15:
                best = float(ratio[k])
                if side == 0:
                    bi = k
                else:
                    bj = k
                improved = True
        if not improved:
            break
    return HolderReport(
        beta=beta, value=best,
        pair=(tuple(coords[bi]), tuple(coords[bj])),
        mode=mode, exact=False, node_count=m,
    )


def global_gradient_holder(u: GridFunction, s: float, region=None) -> HolderReport:
    """Spatial C^s seminorm of the centered-difference gradient.

    One-sided differences at the box faces.  For space-time grids the
    seminorm runs in parabolic mode over all slices.
    """
    steps = [u.h] * u.space_dim
    grads = np.gradient(u.values, *(steps + ([u.dt] if u.has_time else [])))
    if u.values.ndim == 1:
        grads = [grads]
    worst = None
    for axis in range(u.space_dim):
        g = u.map_like(np.asarray(grads[axis]))
        rep = parabolic_holder_seminorm(
            g, s, region=region, mode="parabolic" if u.has_time else "spatial"
        )
        if worst is None or rep.value > worst.value:
            worst = rep
    return worst


@dataclass(frozen=True)
class TimeRegularityReport:
    measured: float
    predicted: float
    lags: tuple
    moduli: tuple


def golden_ratio_threshold() -> float:
    return (math.sqrt(5.0) - 1.0) / 2.0


def predicted_time_exponent(s: float, eps: float = 0.01) -> float:
    """min(s, 1/s - 1 - eps): the regularity-in-time switch for dt u."""
    return min(s, 1.0 / s - 1.0 - eps)


def fit_time_regularity(
    u: GridFunction,
    eps: float = 0.01,
    window: tuple | None = None,
    n_lags: int = 8,
) -> TimeRegularityReport:
    """Measured Holder-in-time exponent of dt u on a window away from t = 0."""
    if not u.has_time:
        raise MetricsError("needs a space-time grid")
    nt = u.values.shape[-1]
    t = u.axis_coords(u.values.ndim - 1)
    if window is None:
        k0, k1 = nt // 4, nt - 1
    else:
        k0 = int(np.searchsorted(t, window[0]))
        k1 = int(np.searchsorted(t, window[1], side="right")) - 1
    if k1 - k0 < 32:
        raise MetricsError("need at least 32 time steps in the window")
    win = u.values[..., k0 : k1 + 1]
    max_lag = (k1 - k0) // 3
    lags = np.unique(np.geomspace(1, max_lag, n_lags).astype(int))
    moduli = []
    for lag in lags:
        # difference quotient of u at the lag's own scale, then its modulus
        # at the same shift: scale-consistent, so pure powers fit exactly
        dq = (win[..., lag:] - win[..., :-lag]) / (lag * u.dt)
        diff = np.abs(dq[..., lag:] - dq[..., :-lag])
        moduli.append(float(diff.max()))
    lags_t = lags * u.dt
    good = np.asarray(moduli) > 0
    if good.sum() < 2:
        measured = math.inf
    else:
        measured = float(
            np.polyfit(np.log(lags_t[good]), np.log(np.asarray(moduli)[good]), 1)[0]
        )
    return TimeRegularityReport(
        measured=measured,
        predicted=predicted_time_exponent(u.s, eps),
        lags=tuple(lags_t),
        moduli=tuple(moduli),
    )


@dataclass(frozen=True)
class OrderFit:
    order: float
    residual: float
    monotone: bool


def convergence_order(values, spacings) -> OrderFit:
    """Least-squares slope of log(values) against log(spacings)."""
    values = np.asarray(values, dtype=float)
    spacings = np.asarray(spacings, dtype=float)
    if len(values) < 3:
        raise MetricsError("need at least 3 levels")
    if np.any(values <= 0):
        raise MetricsError("values must be positive for a log-log fit")
    slope, intercept = np.polyfit(np.log(spacings), np.log(values), 1)
    pred = slope * np.log(spacings) + intercept
    resid = float(np.max(np.abs(np.log(values) - pred)))
    order = np.argsort(spacings)
    monotone = bool(np.all(np.diff(values[order]) >= 0))
    return OrderFit(order=float(slope), residual=resid, monotone=monotone)
