"""Backend selection for the hot loops.

The compiled extension is used when importable; set ``JACOBISPEC_KERNELS=python``
to force the pure-Python fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

RESCALE = 1e150


def _load():
    if os.environ.get("JACOBISPEC_KERNELS", "").lower() == "python":
        return _pykernels, "python"
    try:
        from . import _ckernels
    except ImportError:
        return _pykernels, "python"
    return _ckernels, "cython"


_impl, BACKEND = _load()


def get_backend(name: str | None = None):
    """Return a kernel module by name (``"cython"``/``"python"``), default active."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def propagate(c, d, E, u0, u1, rescale=RESCALE):
    c = np.ascontiguousarray(c, dtype=float)
    d = np.ascontiguousarray(d, dtype=float)
    return _impl.propagate(c, d, float(E), float(u0), float(u1), rescale)


def log_cumsumsq(values, counts, rescale=RESCALE):
    return _impl.log_cumsumsq(values, counts, rescale)


def cf_backward(a, b, z, seed):
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    return complex(_impl.cf_backward(a, b, complex(z), complex(seed)))


def tridiag_solve(off, diag, rhs):
    off = np.ascontiguousarray(off, dtype=float)
    rhs = np.asarray(rhs, dtype=complex)
    squeeze = rhs.ndim == 1
    if squeeze:
        rhs = rhs[:, None]
    out = _impl.tridiag_solve(off, np.asarray(diag, dtype=complex), rhs)
    return out[:, 0] if squeeze else out
