"""Kernel backend selection.

The compiled extension (``copymove._native``) is preferred when importable;
otherwise the numpy fallback is used. ``COPYMOVE_BACKEND`` overrides:
``native`` (fail if missing), ``python`` (force fallback), ``auto``.
"""

import os

from . import _kernels_py

_requested = os.environ.get("COPYMOVE_BACKEND", "auto").lower()
if _requested not in ("auto", "native", "python"):
    raise ImportError(f"COPYMOVE_BACKEND must be auto|native|python, got {_requested!r}")

_impl = None
BACKEND = "python"
if _requested in ("auto", "native"):
    try:
        from . import _native as _impl

        BACKEND = "native"
    except ImportError:
        if _requested == "native":
            raise
        _impl = None
if _impl is None:
    _impl = _kernels_py

score_candidates = _impl.score_candidates
dlf_fit_errors = _impl.dlf_fit_errors


def available_backends():
    """Names of importable backends, native first when built."""
    names = []
    try:
        from . import _native  # noqa: F401

        names.append("native")
    except ImportError:
        pass
    names.append("python")
    return tuple(names)


def backend_module(name: str):
    if name == "python":
        return _kernels_py
    if name == "native":
        from . import _native

        return _native
    raise ValueError(f"unknown backend {name!r}")
