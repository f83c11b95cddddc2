"""Kernel backend selection.

The compiled extension is used when it imports; set ``MLQUEUE_PURE=1`` to
force the numpy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("MLQUEUE_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernels_py

regulator_values = _impl.regulator_values
abs_walk = _impl.abs_walk
lindley_departures = _impl.lindley_departures
spectral_sum = _impl.spectral_sum

__all__ = ["BACKEND", "regulator_values", "abs_walk", "lindley_departures", "spectral_sum"]
