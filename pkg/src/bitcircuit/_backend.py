"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
bit-for-bit equivalent.  Override with BITCIRCUIT_KERNELS=python (force the
fallback) or =cython (fail loudly if the extension is missing).
"""

import os

from . import _kernels_py

_choice = os.environ.get("BITCIRCUIT_KERNELS", "auto").lower()

if _choice not in ("auto", "cython", "python"):
    raise ImportError(f"BITCIRCUIT_KERNELS must be auto, cython or python, not {_choice!r}")

if _choice == "python":
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        if _choice == "cython":
            raise
        kernels = _kernels_py

BACKEND = kernels.BACKEND


def get_kernels(name: str | None = None):
    """Return a kernel module by name ('cython'/'python'), default the active one."""
    if name is None or name == BACKEND:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
