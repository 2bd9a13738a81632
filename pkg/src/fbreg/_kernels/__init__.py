"""Hot numerical kernels: compiled extension with a pure-numpy fallback.

The Cython module ``fbreg._kernels._core`` is built at install time when a
compiler is available.  Import falls back to ``_core_py`` transparently;
``FBREG_PURE_PYTHON=1`` forces the fallback (used by the parity tests and the
backend benchmark).
"""

import os

from . import _core_py

_REQUIRED = ("psor_sweep", "stencil_apply_1d", "stencil_apply_2d", "allpairs_max_ratio")

if os.environ.get("FBREG_PURE_PYTHON"):
    _impl = _core_py
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        if not all(hasattr(_impl, name) for name in _REQUIRED):
            raise ImportError("compiled core is incomplete")
        BACKEND = "compiled"
    except ImportError:
        _impl = _core_py
        BACKEND = "python"

psor_sweep = _impl.psor_sweep
stencil_apply_1d = _impl.stencil_apply_1d
stencil_apply_2d = _impl.stencil_apply_2d
allpairs_max_ratio = _impl.allpairs_max_ratio

__all__ = [
    "BACKEND",
    "psor_sweep",
    "stencil_apply_1d",
    "stencil_apply_2d",
    "allpairs_max_ratio",
]
