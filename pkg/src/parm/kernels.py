"""Backend selection for the hot loops.

The compiled extension is used when it was built; set ``PARM_PURE_PYTHON=1``
to force the numpy fallback.
"""

from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("PARM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "compiled"


def backend(name: str | None = None):
    """Kernel module by name (``"compiled"``/``"python"``), default the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _fallback
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def simplex_pivots(T, basis, allowed, max_pivots, tol, piv_tol, bland_after):
    return _impl.simplex_pivots(T, basis, allowed, max_pivots, tol, piv_tol, bland_after)


def bellman_sweeps(R, P, delta, v, tol, max_iter):
    return _impl.bellman_sweeps(R, P, delta, v, tol, max_iter)
