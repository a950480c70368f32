"""Kernel selection: compiled extension when importable, pure Python otherwise.

Set ``POSCASCADE_BACKEND=python`` to force the fallback, or ``=cython`` to make
a missing extension an error.
"""

import os

from . import _pykernel

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

HAVE_CYTHON = _ckernel is not None


def available() -> list:
    return ["cython", "python"] if HAVE_CYTHON else ["python"]


def get_run_loop(name=None):
    name = name or os.environ.get("POSCASCADE_BACKEND", "auto")
    if name == "python":
        return _pykernel.run_loop
    if name == "cython":
        if not HAVE_CYTHON:
            raise ImportError("compiled kernel poscascade._ckernel is not built")
        return _ckernel.run_loop
    if name == "auto":
        return _ckernel.run_loop if HAVE_CYTHON else _pykernel.run_loop
    raise ValueError(f"unknown backend {name!r}")
