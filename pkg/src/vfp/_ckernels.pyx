# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Contracts are identical to ``vfp._pykernels``."""

from libc.math cimport floor


def tridiag_solve(const double[:, ::1] lower, const double[:, ::1] diag,
                  const double[:, ::1] upper, const double[:, ::1] rhs,
                  double[:, ::1] out, Py_ssize_t start, Py_ssize_t stop):
    """Thomas elimination for rows ``start:stop`` of a batch of systems.

    ``lower[b, j]`` multiplies ``x[j-1]`` and ``upper[b, j]`` multiplies
    ``x[j+1]`` in row ``j``; ``lower[:, 0]`` and ``upper[:, n-1]`` are ignored.
    """
    cdef Py_ssize_t n = diag.shape[1]
    cdef Py_ssize_t b, j
    cdef double denom
    cdef double[::1] cp
    cp_arr = bytearray(8 * n)
    cp = memoryview(cp_arr).cast("d")
    with nogil:
        for b in range(start, stop):
            denom = diag[b, 0]
            cp[0] = upper[b, 0] / denom
            out[b, 0] = rhs[b, 0] / denom
            for j in range(1, n):
                denom = diag[b, j] - lower[b, j] * cp[j - 1]
                if j < n - 1:
                    cp[j] = upper[b, j] / denom
                out[b, j] = (rhs[b, j] - lower[b, j] * out[b, j - 1]) / denom
            for j in range(n - 2, -1, -1):
                out[b, j] = out[b, j] - cp[j] * out[b, j + 1]


def shift_rows(const double[:, ::1] f, const double[::1] shift,
               double[:, ::1] out, Py_ssize_t start, Py_ssize_t stop):
    """Periodic cubic evaluation of each row at ``i - shift[row]`` (cells)."""
    cdef Py_ssize_t n = f.shape[1]
    cdef Py_ssize_t r, i, m, i0, im, i1, i2
    cdef double pos, s, f0, fm, f1, f2, d1, d2, d3
    with nogil:
        for r in range(start, stop):
            pos = -shift[r]
            m = <Py_ssize_t>floor(pos)
            s = pos - m
            m = m % n
            if m < 0:
                m = m + n
            for i in range(n):
                i0 = (i + m) % n
                im = i0 - 1 if i0 > 0 else n - 1
                i1 = i0 + 1 if i0 < n - 1 else 0
                i2 = i1 + 1 if i1 < n - 1 else 0
                f0 = f[r, i0]
                fm = f[r, im]
                f1 = f[r, i1]
                f2 = f[r, i2]
                d1 = f1 - f0
                d2 = d1 - (f0 - fm)
                d3 = (f2 - fm) - 3.0 * d1
                out[r, i] = f0 + s * (d1 + (s - 1.0) * (0.5 * d2 + (s + 1.0) * d3 / 6.0))


def periodic_convolve_1d(const double[:, ::1] g, const Py_ssize_t[::1] off,
                         const double[::1] w, double[:, ::1] out):
    """``out[c, i] = sum_k w[k] * g[c, (i - off[k]) mod n]``."""
    cdef Py_ssize_t nc = g.shape[0], n = g.shape[1], nk = w.shape[0]
    cdef Py_ssize_t c, i, k, src
    cdef double acc
    with nogil:
        for c in range(nc):
            for i in range(n):
                acc = 0.0
                for k in range(nk):
                    src = (i - off[k]) % n
                    if src < 0:
                        src = src + n
                    acc = acc + w[k] * g[c, src]
                out[c, i] = acc


def periodic_convolve_2d(const double[:, :, ::1] g, const Py_ssize_t[::1] off1,
                         const Py_ssize_t[::1] off2, const double[::1] w,
                         double[:, :, ::1] out):
    """Two-axis analogue of ``periodic_convolve_1d``."""
    cdef Py_ssize_t nc = g.shape[0], n1 = g.shape[1], n2 = g.shape[2]
    cdef Py_ssize_t nk = w.shape[0]
    cdef Py_ssize_t c, i, j, k, s1, s2
    cdef double acc
    with nogil:
        for c in range(nc):
            for i in range(n1):
                for j in range(n2):
                    acc = 0.0
                    for k in range(nk):
                        s1 = (i - off1[k]) % n1
                        if s1 < 0:
                            s1 = s1 + n1
                        s2 = (j - off2[k]) % n2
                        if s2 < 0:
                            s2 = s2 + n2
                        acc = acc + w[k] * g[c, s1, s2]
                    out[c, i, j] = acc
