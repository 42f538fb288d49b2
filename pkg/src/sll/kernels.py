"""Backend selection for the sparse kernels.

The compiled module is preferred; set ``SLL_PURE_PYTHON=1`` to force the
pure-Python fallback.
"""
import os

from . import _kernels_py

if os.environ.get("SLL_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

amd_order = _impl.amd_order
ldl_symbolic = _impl.ldl_symbolic
ldl_numeric = _impl.ldl_numeric
ldl_solve_inplace = _impl.ldl_solve_inplace


def get_backend(name):
    """Return the kernel module for ``"compiled"`` or ``"python"``."""
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
