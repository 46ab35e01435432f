"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. Set ``UNIFLOC_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("UNIFLOC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

max_phase_errors = _impl.max_phase_errors
column_losses = _impl.column_losses
crb_objective = _impl.crb_objective
crb_gradient = _impl.crb_gradient
riemannian_descent = _impl.riemannian_descent
