"""Hot loops with a compiled backend and a NumPy fallback.

The Cython extension is used when it was built; set ``WAVESIM_PURE_PYTHON=1``
to force the fallback.  ``BACKEND`` names the active implementation.
"""

import os

from . import _fallback

fallback = _fallback

if os.environ.get("WAVESIM_PURE_PYTHON", "") not in ("", "0"):
    compiled = None
else:
    try:
        from . import _ext as compiled
    except ImportError:  # extension not built
        compiled = None

_active = compiled if compiled is not None else _fallback
BACKEND = "cython" if compiled is not None else "python"

sweep = _active.sweep
newmark = _active.newmark
KernelError = (_fallback.KernelError,) + ((compiled.KernelError,) if compiled else ())


def backend(name=None):
    """Kernel module by name (``"cython"``/``"python"``); default is the active one."""
    if name is None:
        return _active
    if name == "python":
        return _fallback
    if name == "cython":
        if compiled is None:
            raise ImportError("compiled kernels are not available")
        return compiled
    raise ValueError(f"unknown kernel backend {name!r}")
