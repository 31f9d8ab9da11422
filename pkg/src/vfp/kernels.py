"""Backend selection for the hot loops.

The compiled extension is used when it imports; ``VFP_BACKEND=python`` forces
the NumPy fallback. ``VFP_THREADS`` caps the number of worker threads used to
split independent rows. Rows never share output, so results do not depend on
the worker count.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_requested = os.environ.get("VFP_BACKEND", "").strip().lower()
if _requested and _requested not in ("python", "compiled"):
    raise ImportError(f"unknown VFP_BACKEND {_requested!r}")
if _requested == "compiled" and _ckernels is None:
    raise ImportError("VFP_BACKEND=compiled but vfp._ckernels is not built")

BACKEND = _requested or ("compiled" if _ckernels is not None else "python")
_impl = _BACKENDS[BACKEND]

_MIN_ROWS_PER_THREAD = 64


def available_backends():
    return tuple(_BACKENDS)


def use_backend(name):
    """Switch the active backend; returns the previous name."""
    global BACKEND, _impl
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available")
    prev = BACKEND
    BACKEND, _impl = name, _BACKENDS[name]
    return prev


def thread_count():
    raw = os.environ.get("VFP_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"VFP_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def _chunked(fn, nrows, *args):
    nthreads = min(thread_count(), max(1, nrows // _MIN_ROWS_PER_THREAD))
    if nthreads <= 1:
        fn(*args, 0, nrows)
        return
    bounds = np.linspace(0, nrows, nthreads + 1).astype(int)
    with ThreadPoolExecutor(nthreads) as pool:
        futures = [pool.submit(fn, *args, int(a), int(b))
                   for a, b in zip(bounds[:-1], bounds[1:])]
        for fut in futures:
            fut.result()


def _c2(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def tridiag_solve(lower, diag, upper, rhs):
    """Solve a batch of tridiagonal systems, one per row of ``rhs``.

    All arguments are ``(batch, n)``; ``lower[:, j]`` multiplies ``x[j-1]``
    and ``upper[:, j]`` multiplies ``x[j+1]``. No pivoting: the caller must
    supply diagonally dominant (M-matrix) systems.
    """
    lower, diag, upper, rhs = map(_c2, (lower, diag, upper, rhs))
    out = np.empty_like(rhs)
    _chunked(_impl.tridiag_solve, rhs.shape[0], lower, diag, upper, rhs, out)
    return out


def shift_rows(f, shift):
    """Periodic cubic interpolation of every row of ``f`` at ``i - shift``."""
    f = _c2(f)
    shift = np.ascontiguousarray(shift, dtype=np.float64)
    out = np.empty_like(f)
    _chunked(_impl.shift_rows, f.shape[0], f, shift, out)
    return out


def periodic_convolve(g, offsets, weights):
    """Direct periodic convolution over the last one or two axes.

    ``g`` is ``(ncomp, n)`` or ``(ncomp, n1, n2)``; ``offsets`` is
    ``(nk, ndim)`` integer cell offsets, ``weights`` the matching values.
    """
    g = _c2(g)
    offsets = np.asarray(offsets, dtype=np.intp)
    w = np.ascontiguousarray(weights, dtype=np.float64)
    out = np.empty_like(g)
    if g.ndim == 2:
        _impl.periodic_convolve_1d(g, np.ascontiguousarray(offsets[:, 0]), w, out)
    elif g.ndim == 3:
        _impl.periodic_convolve_2d(g, np.ascontiguousarray(offsets[:, 0]),
                                   np.ascontiguousarray(offsets[:, 1]), w, out)
    else:
        raise ValueError("periodic_convolve supports one or two spatial axes")
    return out
