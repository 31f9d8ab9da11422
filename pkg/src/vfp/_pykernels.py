"""Pure NumPy versions of the inner loops in ``_ckernels.pyx``.

Each function has the same signature and output contract as its compiled
twin, so ``vfp.kernels`` can swap them freely.
"""
import numpy as np


def tridiag_solve(lower, diag, upper, rhs, out, start, stop):
    sl = slice(start, stop)
    a, b, c, d = lower[sl], diag[sl], upper[sl], rhs[sl]
    n = b.shape[1]
    cp = np.empty_like(b)
    dp = np.empty_like(b)
    cp[:, 0] = c[:, 0] / b[:, 0]
    dp[:, 0] = d[:, 0] / b[:, 0]
    for j in range(1, n):
        denom = b[:, j] - a[:, j] * cp[:, j - 1]
        cp[:, j] = c[:, j] / denom
        dp[:, j] = (d[:, j] - a[:, j] * dp[:, j - 1]) / denom
    x = out[sl]
    x[:, n - 1] = dp[:, n - 1]
    for j in range(n - 2, -1, -1):
        x[:, j] = dp[:, j] - cp[:, j] * x[:, j + 1]


def shift_rows(f, shift, out, start, stop):
    sl = slice(start, stop)
    rows = f[sl]
    n = rows.shape[1]
    pos = -np.asarray(shift[sl])
    m = np.floor(pos)
    s = (pos - m)[:, None]
    idx = (np.arange(n)[None, :] + m.astype(np.intp)[:, None]) % n
    take = np.take_along_axis
    f0 = take(rows, idx, axis=1)
    fm = take(rows, (idx - 1) % n, axis=1)
    f1 = take(rows, (idx + 1) % n, axis=1)
    f2 = take(rows, (idx + 2) % n, axis=1)
    d1 = f1 - f0
    d2 = d1 - (f0 - fm)
    d3 = (f2 - fm) - 3.0 * d1
    out[sl] = f0 + s * (d1 + (s - 1.0) * (0.5 * d2 + (s + 1.0) * d3 / 6.0))


def periodic_convolve_1d(g, off, w, out):
    acc = np.zeros_like(g)
    for k in range(len(w)):
        acc += w[k] * np.roll(g, off[k], axis=1)
    out[...] = acc


def periodic_convolve_2d(g, off1, off2, w, out):
    acc = np.zeros_like(g)
    for k in range(len(w)):
        acc += w[k] * np.roll(g, (off1[k], off2[k]), axis=(1, 2))
    out[...] = acc
