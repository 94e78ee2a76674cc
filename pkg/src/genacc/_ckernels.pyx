# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled distance kernels.

Every function here has a numpy twin in ``_pykernels`` with the same
signature and the same output arrays; ``kernels`` picks one at import.
Metric codes: 0 = L1, 1 = L2, 2 = LINF.
"""

from cython.parallel import prange

from libc.math cimport fabs, sqrt, INFINITY

BACKEND = "cython"


cdef inline double _linf(const double* a, const double* b, Py_ssize_t d) noexcept nogil:
    cdef double m0 = 0.0, m1 = 0.0, m2 = 0.0, m3 = 0.0, t
    cdef Py_ssize_t k = 0
    while k + 4 <= d:
        t = fabs(a[k] - b[k])
        m0 = t if t > m0 else m0
        t = fabs(a[k + 1] - b[k + 1])
        m1 = t if t > m1 else m1
        t = fabs(a[k + 2] - b[k + 2])
        m2 = t if t > m2 else m2
        t = fabs(a[k + 3] - b[k + 3])
        m3 = t if t > m3 else m3
        k += 4
    while k < d:
        t = fabs(a[k] - b[k])
        m0 = t if t > m0 else m0
        k += 1
    m0 = m1 if m1 > m0 else m0
    m2 = m3 if m3 > m2 else m2
    return m2 if m2 > m0 else m0


cdef inline double _dist(const double[:, ::1] A, Py_ssize_t i,
                         const double[:, ::1] B, Py_ssize_t j,
                         Py_ssize_t d, int metric) noexcept nogil:
    cdef Py_ssize_t k
    cdef double acc = 0.0
    cdef double t
    cdef const double* a = &A[i, 0]
    cdef const double* b = &B[j, 0]
    if metric == 0:
        for k in range(d):
            acc = acc + fabs(a[k] - b[k])
        return acc
    elif metric == 1:
        for k in range(d):
            t = a[k] - b[k]
            acc = acc + t * t
        return sqrt(acc)
    else:
        # max is order-free, so four independent accumulators are exact
        return _linf(a, b, d)


def pairwise_tile(const double[:, ::1] A, const double[:, ::1] B, int metric,
                  double[:, ::1] out, int num_threads=1):
    """Fill ``out[i, j]`` with the distance between ``A[i]`` and ``B[j]``."""
    cdef Py_ssize_t na = A.shape[0], nb = B.shape[0], d = A.shape[1]
    cdef Py_ssize_t i, j
    if B.shape[1] != d:
        raise ValueError("dimension mismatch")
    if out.shape[0] != na or out.shape[1] != nb:
        raise ValueError("output shape mismatch")
    with nogil:
        for i in prange(na, num_threads=num_threads, schedule="static"):
            for j in range(nb):
                out[i, j] = _dist(A, i, B, j, d, metric)


def reduce_tile(const double[:, :] D, const long[::1] row_labels,
                const long[::1] col_labels, Py_ssize_t row0, Py_ssize_t col0,
                double[::1] d_diff, double[::1] d_same_min,
                double[::1] d_same_max, double[::1] d_far,
                int num_threads=1):
    """Fold one distance tile into the running per-row statistics.

    Row ``i`` of the tile is global sample ``row0 + i``; the statistic
    arrays are indexed by global sample.  The self pair is skipped.
    """
    cdef Py_ssize_t nr = D.shape[0], nc = D.shape[1]
    cdef Py_ssize_t i, j, g
    cdef long li
    cdef double v, dd, smin, smax, far
    with nogil:
        for i in prange(nr, num_threads=num_threads, schedule="static"):
            g = row0 + i
            li = row_labels[i]
            dd = d_diff[g]
            smin = d_same_min[g]
            smax = d_same_max[g]
            far = d_far[g]
            for j in range(nc):
                if col0 + j == g:
                    continue
                v = D[i, j]
                if v > far:
                    far = v
                if col_labels[j] == li:
                    if v < smin:
                        smin = v
                    if v > smax:
                        smax = v
                elif v < dd:
                    dd = v
            d_diff[g] = dd
            d_same_min[g] = smin
            d_same_max[g] = smax
            d_far[g] = far


def class_nearest(const double[:, ::1] Q, const double[:, ::1] P,
                  const long[::1] label_index, int n_classes, int metric,
                  double[:, ::1] out, int num_threads=1):
    """``out[q, c]`` = distance from ``Q[q]`` to the nearest point of class index ``c``."""
    cdef Py_ssize_t nq = Q.shape[0], n_p = P.shape[0], d = Q.shape[1]
    cdef Py_ssize_t q, j
    cdef int c
    cdef double v
    if P.shape[1] != d:
        raise ValueError("dimension mismatch")
    with nogil:
        for q in prange(nq, num_threads=num_threads, schedule="static"):
            for c in range(n_classes):
                out[q, c] = INFINITY
            for j in range(n_p):
                v = _dist(Q, q, P, j, d, metric)
                c = <int>label_index[j]
                if v < out[q, c]:
                    out[q, c] = v


def nearest_two(const double[:, ::1] Q, const double[:, ::1] P, int metric,
                double[::1] d1, long[::1] idx, double[::1] d2,
                int num_threads=1):
    """Nearest distance, its index, and the second smallest distance over points."""
    cdef Py_ssize_t nq = Q.shape[0], n_p = P.shape[0], d = Q.shape[1]
    cdef Py_ssize_t q, j
    cdef long best
    cdef double v, b1, b2
    if P.shape[1] != d:
        raise ValueError("dimension mismatch")
    with nogil:
        for q in prange(nq, num_threads=num_threads, schedule="static"):
            b1 = INFINITY
            b2 = INFINITY
            best = -1
            for j in range(n_p):
                v = _dist(Q, q, P, j, d, metric)
                if v < b1:
                    b2 = b1
                    b1 = v
                    best = j
                elif v < b2:
                    b2 = v
            d1[q] = b1
            idx[q] = best
            d2[q] = b2
