"""Pure-numpy implementations of the hot kernels (fallback backend)."""

import numpy as np


def psor_sweep(a, b, lower, u, omega, reverse):
    """One projected SOR sweep over the dense system a u = b, u >= lower.

    Updates ``u`` in place; returns the largest absolute update.  Rows are
    visited sequentially (Gauss-Seidel ordering), forward or backward.
    """
    n = a.shape[0]
    order = range(n - 1, -1, -1) if reverse else range(n)
    biggest = 0.0
    for i in order:
        row = a[i]
        r = b[i] - row @ u
        new = u[i] + omega * r / row[i]
        if new < lower[i]:
            new = lower[i]
        change = abs(new - u[i])
        if change > biggest:
            biggest = change
        u[i] = new
    return biggest


def stencil_apply_1d(padded, w_even, w_odd, n, pad):
    """Apply the symmetrized-pair stencil at every interior node.

    ``padded`` holds the grid values extended by ``pad`` nodes on each side;
    ``w_even[k-1]``/``w_odd[k-1]`` weight the pair of shifts (+-k).  Returns
    sum_k w_even[k] (u(x+kh) + u(x-kh) - 2 u(x)) + w_odd[k] (u(x+kh) - u(x-kh)).
    """
    u0 = padded[pad : pad + n]
    out = np.zeros(n)
    m = len(w_even)
    use_odd = np.any(w_odd != 0.0)
    for k in range(1, m + 1):
        up = padded[pad + k : pad + k + n]
        um = padded[pad - k : pad - k + n]
        out += w_even[k - 1] * (up + um - 2.0 * u0)
        if use_odd:
            out += w_odd[k - 1] * (up - um)
    return out


def stencil_apply_2d(padded, offsets, w_even, w_odd, n0, n1, pad0, pad1):
    """2D analogue of :func:`stencil_apply_1d` over a half-lattice of offsets."""
    u0 = padded[pad0 : pad0 + n0, pad1 : pad1 + n1]
    out = np.zeros((n0, n1))
    use_odd = np.any(w_odd != 0.0)
    for k in range(offsets.shape[0]):
        o0, o1 = int(offsets[k, 0]), int(offsets[k, 1])
        up = padded[pad0 + o0 : pad0 + o0 + n0, pad1 + o1 : pad1 + o1 + n1]
        um = padded[pad0 - o0 : pad0 - o0 + n0, pad1 - o1 : pad1 - o1 + n1]
        out += w_even[k] * (up + um - 2.0 * u0)
        if use_odd:
            out += w_odd[k] * (up - um)
    return out


def allpairs_max_ratio(w, space, time, beta, tpow, chunk=256):
    """Exact maximum over node pairs of |w_i - w_j| / (|x_i-x_j|^beta + |t_i-t_j|^tpow).

    ``space`` is (m, d); ``time`` is (m,) or None for purely spatial data.
    Returns (value, i, j) with (i, j) the attaining pair.
    """
    m = w.shape[0]
    best = 0.0
    bi = bj = 0
    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        dw = np.abs(w[lo:hi, None] - w[None, :])
        d2 = np.zeros((hi - lo, m))
        for a in range(space.shape[1]):
            d2 += (space[lo:hi, a, None] - space[None, :, a]) ** 2
        denom = d2 ** (beta / 2.0)
        if time is not None:
            denom = denom + np.abs(time[lo:hi, None] - time[None, :]) ** tpow
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(denom > 0.0, dw / denom, 0.0)
        flat = int(np.argmax(ratio))
        val = float(ratio.flat[flat])
        if val > best:
            best = val
            bi = lo + flat // m
            bj = flat % m
    return best, bi, bj
