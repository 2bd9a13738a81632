"""fbreg: a desk-scale laboratory for nonlocal obstacle problems.

Solves elliptic and parabolic obstacle problems for integro-differential
operators of fractional order, tracks free boundaries, fits growth exponents
and 1D blow-up profiles, certifies explicit barrier inequalities, and runs
the boundary-Harnack quotient experiment.
"""

from ._kernels import BACKEND
from .grids import GridFunction, read_grid, uniform_grid, write_grid
from .kernels import (
    Density,
    KernelError,
    KernelSpec,
    QuadratureError,
    Symbol,
    fractional_laplacian,
    make_kernel,
    symbol,
)
from .operator import (
    ExtensionError,
    ExteriorRule,
    apply_at_points,
    apply_operator,
    callable_extension,
    constant_extension,
    effective_1d_kernel,
    periodic_extension,
    zero_extension,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Density",
    "ExtensionError",
    "ExteriorRule",
    "GridFunction",
    "KernelError",
    "KernelSpec",
    "QuadratureError",
    "Symbol",
    "apply_at_points",
    "apply_operator",
    "callable_extension",
    "constant_extension",
    "effective_1d_kernel",
    "fractional_laplacian",
    "make_kernel",
    "periodic_extension",
    "read_grid",
    "symbol",
    "uniform_grid",
    "write_grid",
    "zero_extension",
]
