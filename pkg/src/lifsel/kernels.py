"""Kernel dispatch: the compiled extension when importable, else numpy.

Set ``LIFSEL_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("LIFSEL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

crit_select = _impl.crit_select
dwt_periodized = _impl.dwt_periodized
idwt_periodized = _impl.idwt_periodized

__all__ = ["BACKEND", "crit_select", "dwt_periodized", "idwt_periodized"]
