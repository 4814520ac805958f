"""Simulation kernels with a compiled core and a pure-Python fallback.

At import time the compiled Cython backend (``_speedups``) is preferred;
if it is missing the NumPy reference backend (``pyref``) is used instead.
Set the environment variable ``STABQUBIT_KERNELS`` to ``c`` or ``py`` to
force one (``c`` raises if the extension is unavailable).  Both backends
implement identical arithmetic and return bit-identical results; see
``pyref.py`` for the documented equations.
"""

import os

from . import pyref

_choice = os.environ.get("STABQUBIT_KERNELS", "auto").lower()
if _choice not in ("auto", "c", "py"):
    raise ValueError(
        f"STABQUBIT_KERNELS={_choice!r} not understood; use 'auto', 'c', or 'py'"
    )

if _choice == "py":
    _impl = pyref
    BACKEND = "py"
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]

        BACKEND = "c"
    except ImportError:
        if _choice == "c":
            raise ImportError(
                "STABQUBIT_KERNELS=c but the compiled kernels are not built; "
                "run 'python setup.py build_ext --inplace' or reinstall"
            ) from None
        _impl = pyref
        BACKEND = "py"

clamp_threshold = _impl.clamp_threshold
sim_block = _impl.sim_block
sim_block_tracking = _impl.sim_block_tracking
mean_path = _impl.mean_path
plan_axes = _impl.plan_axes
bank_block = _impl.bank_block


def backend() -> str:
    """Name of the active kernel backend: 'c' (compiled) or 'py' (NumPy)."""
    return BACKEND
