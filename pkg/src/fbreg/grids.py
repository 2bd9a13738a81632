"""Uniform space and space-time grids, and the FBRG1 binary format.

Axes are ordered (x[, y][, t]); the time axis, when present, is last.  The
parabolic cylinder Q_r(x0, t0) = B_r(x0) x (t0 - r^{2s}, t0 + r^{2s}] maps to
index ranges exactly through :meth:`GridFunction.cylinder_slices`.

FBRG1 layout (little endian): magic ``FBRG1``, u8 axis count D, D x u64
extents, spacings as f64 (h, then dt only for space-time grids), D x f64
origins, f64 s, then the values row-major as f64.  Whether dt is present is
recovered from the file length (the two layouts differ by exactly 8 bytes).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

MAGIC = b"FBRG1"


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridFunction:
    """Scalar samples on a uniform grid; immutable and thread-shareable."""

    values: np.ndarray
    h: float
    origin: tuple
    s: float
    dt: float | None = None

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        if values.ndim != len(self.origin):
            raise GridError(
                f"values have {values.ndim} axes but origin has {len(self.origin)}"
            )
        if not np.all(np.isfinite(values)):
            raise GridError("grid values must be finite at every node")
        if self.h <= 0.0:
            raise GridError("spatial spacing must be positive")
        if self.dt is not None and self.dt <= 0.0:
            raise GridError("time spacing must be positive")

    @property
    def has_time(self) -> bool:
        return self.dt is not None

    @property
    def space_dim(self) -> int:
        return self.values.ndim - (1 if self.has_time else 0)

    @property
    def dims(self) -> tuple:
        return self.values.shape

    def axis_coords(self, axis: int) -> np.ndarray:
        step = self.dt if (self.has_time and axis == self.values.ndim - 1) else self.h
        return self.origin[axis] + step * np.arange(self.values.shape[axis])

    def space_coords(self):
        return [self.axis_coords(a) for a in range(self.space_dim)]

    def meshgrid(self):
        axes = [self.axis_coords(a) for a in range(self.values.ndim)]
        return np.meshgrid(*axes, indexing="ij")

    def nearest_index(self, point) -> tuple:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        idx = []
        for a, c in enumerate(point):
            step = self.dt if (self.has_time and a == self.values.ndim - 1) else self.h
            i = int(round((c - self.origin[a]) / step))
            if not 0 <= i < self.values.shape[a]:
                raise GridError(f"point {point} falls outside the grid on axis {a}")
            idx.append(i)
        return tuple(idx)

    def cylinder_slices(self, center, r: float, closed_right: bool = True):
        """Index slices covering Q_r(center): B_r in space, r^{2s} in time.

        Spatial axes keep nodes with |x_a - c_a| <= r (the bounding box of
        B_r; callers needing the Euclidean ball mask the corners).  The time
        axis keeps t in (t0 - r^{2s}, t0 + r^{2s}], mapped exactly.
        """
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if center.shape[0] != self.values.ndim:
            raise GridError("center must supply one coordinate per axis")
        slices = []
        for a in range(self.space_dim):
            lo = int(np.ceil((center[a] - r - self.origin[a]) / self.h - 1e-12))
            hi = int(np.floor((center[a] + r - self.origin[a]) / self.h + 1e-12))
            lo = max(lo, 0)
            hi = min(hi, self.values.shape[a] - 1)
            if hi < lo:
                raise GridError("cylinder does not intersect the grid")
            slices.append(slice(lo, hi + 1))
        if self.has_time:
            a = self.values.ndim - 1
            t0 = center[a]
            half = r ** (2.0 * self.s)
            lo_f = (t0 - half - self.origin[a]) / self.dt
            hi_f = (t0 + half - self.origin[a]) / self.dt
            lo = int(np.floor(lo_f + 1e-12)) + 1  # strictly greater than t0 - r^2s
            hi = int(np.floor(hi_f + 1e-12)) if closed_right else int(np.ceil(hi_f - 1e-12)) - 1
            lo = max(lo, 0)
            hi = min(hi, self.values.shape[a] - 1)
            if hi < lo:
                raise GridError("cylinder does not intersect the grid in time")
            slices.append(slice(lo, hi + 1))
        return tuple(slices)

    def ball_mask(self, slices, center, r: float) -> np.ndarray:
        """Euclidean-ball mask for the spatial block selected by ``slices``."""
        center = np.atleast_1d(np.asarray(center, dtype=float))
        axes = []
        for a in range(self.space_dim):
            coords = self.axis_coords(a)[slices[a]]
            axes.append(coords - center[a])
        if self.space_dim == 1:
            dist2 = axes[0] ** 2
        else:
            grids = np.meshgrid(*axes, indexing="ij")
            dist2 = sum(g ** 2 for g in grids)
        mask = dist2 <= r * r * (1.0 + 1e-12)
        if self.has_time:
            mask = mask[..., None]
            reps = [1] * mask.ndim
            reps[-1] = slices[-1].stop - slices[-1].start
            mask = np.tile(mask, reps)
        return mask

    def time_slice(self, k: int) -> "GridFunction":
        if not self.has_time:
            raise GridError("grid has no time axis")
        t0 = self.origin[-1] + k * self.dt
        return GridFunction(
            values=self.values[..., k],
            h=self.h,
            origin=self.origin[:-1],
            s=self.s,
            dt=None,
        )

    def map_like(self, values: np.ndarray) -> "GridFunction":
        return replace(self, values=values)


def uniform_grid(extent: float, nodes: int, dim: int, s: float,
                 horizon: float | None = None, steps: int | None = None,
                 values=None) -> GridFunction:
    """Grid on the centered box [-extent, extent]^dim, optional time axis."""
    h = 2.0 * extent / (nodes - 1)
    shape = (nodes,) * dim
    origin = (-extent,) * dim
    dt = None
    if horizon is not None:
        if steps is None or steps < 1:
            raise GridError("space-time grid needs a positive step count")
        dt = horizon / steps
        shape = shape + (steps + 1,)
        origin = origin + (0.0,)
    if values is None:
        values = np.zeros(shape)
    return GridFunction(values=values, h=h, origin=origin, s=s, dt=dt)


def write_grid(path, grid: GridFunction) -> None:
    d = grid.values.ndim
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", d))
        fh.write(struct.pack(f"<{d}Q", *grid.values.shape))
        if grid.has_time:
            fh.write(struct.pack("<2d", grid.h, grid.dt))
        else:
            fh.write(struct.pack("<d", grid.h))
        fh.write(struct.pack(f"<{d}d", *grid.origin))
        fh.write(struct.pack("<d", grid.s))
        fh.write(np.ascontiguousarray(grid.values, dtype="<f8").tobytes())


def read_grid(path) -> GridFunction:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:5] != MAGIC:
        raise GridError("not an FBRG1 grid file")
    d = blob[5]
    off = 6
    extents = struct.unpack_from(f"<{d}Q", blob, off)
    off += 8 * d
    count = int(np.prod(extents))
    fixed = off + 8 * d + 8  # origins + s
    remaining = len(blob) - fixed - 8 * count
    if remaining == 16:
        h, dt = struct.unpack_from("<2d", blob, off)
        off += 16
    elif remaining == 8:
        (h,) = struct.unpack_from("<d", blob, off)
        dt = None
        off += 8
    else:
        raise GridError("corrupt FBRG1 file: inconsistent length")
    origin = struct.unpack_from(f"<{d}d", blob, off)
    off += 8 * d
    (s,) = struct.unpack_from("<d", blob, off)
    off += 8
    values = np.frombuffer(blob, dtype="<f8", count=count, offset=off).reshape(extents)
    return GridFunction(values=values.copy(), h=h, origin=origin, s=s, dt=dt)
