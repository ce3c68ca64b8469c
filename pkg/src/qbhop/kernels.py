"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. Set ``QBHOP_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

_FAMILY_CODES = {"quadratic": 0, "doublewell": 1, "eggcrate": 2}

if os.environ.get("QBHOP_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"


def get_backend(name=None):
    """Return the kernel module for ``name`` ('compiled' or 'python'), default active."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels  # raises ImportError when not built
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def supports_fast_descent(spec) -> bool:
    return spec.kind in _FAMILY_CODES


def pack_params(spec):
    """Flatten an analytic family into (code, params) for descend_gd."""
    code = _FAMILY_CODES[spec.kind]
    if spec.kind == "quadratic":
        prm = np.zeros(1)
    elif spec.kind == "doublewell":
        prm = np.array([float(spec.params.get("tilt", 0.0))])
    else:
        from .objective import BUMP_RADIUS
        counts, margin, du_dx, strides = spec._eggcrate_map()
        graded = 1.0 if spec.params.get("depths", "single") == "graded" else 0.0
        head = [float(spec.params.get("gap", 0.04)), graded, BUMP_RADIUS]
        prm = np.concatenate([head, counts * margin, du_dx, strides])
    return code, np.ascontiguousarray(prm, dtype=np.float64)


def grover_iterate(amps, flip, n_iter, backend=None):
    """In-place: ``n_iter`` rounds of sign flip on ``flip`` then 2|s><s| - I."""
    mod = get_backend(backend)
    if mod is _kernels_py:
        mod.grover_iterate(amps, flip, n_iter)
    else:
        mod.grover_iterate(amps, np.ascontiguousarray(flip, dtype=np.uint8), int(n_iter))


def descend_gd(spec, X, errors, step, steps, backend=None):
    """Terminal points of clamped fixed-step descent for an analytic family."""
    mod = get_backend(backend)
    code, prm = pack_params(spec)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if errors is None:
        E = np.zeros((0, 0, X.shape[1]))
    else:
        E = np.ascontiguousarray(errors, dtype=np.float64)
    lo = np.ascontiguousarray(spec.domain.lo)
    hi = np.ascontiguousarray(spec.domain.hi)
    return mod.descend_gd(code, prm, X, E, float(step), int(steps), lo, hi)
