"""Backend selection for the distance kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation is used.  Set ``GENACC_PURE_PYTHON=1`` to force the
fallback, and ``GENACC_NUM_THREADS`` for the default OpenMP thread count.
"""

import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("GENACC_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend forced")
    from . import _ckernels as _backend
except ImportError:
    _backend = _pykernels

BACKEND = _backend.BACKEND


def available_backends():
    """Names of the importable backends, compiled first."""
    names = []
    try:
        from . import _ckernels  # noqa: F401
        names.append("cython")
    except ImportError:
        pass
    names.append("python")
    return names


def get_backend(name=None):
    if name is None:
        return _backend
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def default_threads():
    try:
        return max(1, int(os.environ.get("GENACC_NUM_THREADS", "1")))
    except ValueError:
        return 1


def as_points(X):
    """C-contiguous float64 2-D view of ``X`` (1-D input becomes one column)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return np.ascontiguousarray(X)


def pairwise(A, B, metric_code, backend=None, num_threads=None):
    A, B = as_points(A), as_points(B)
    out = np.empty((A.shape[0], B.shape[0]))
    get_backend(backend).pairwise_tile(A, B, int(metric_code), out,
                                       num_threads or default_threads())
    return out


def class_nearest(Q, P, label_index, n_classes, metric_code, backend=None, num_threads=None):
    """Per-class nearest distances, shape ``(len(Q), n_classes)``."""
    Q, P = as_points(Q), as_points(P)
    label_index = np.ascontiguousarray(label_index, dtype=np.int64)
    out = np.empty((Q.shape[0], n_classes))
    get_backend(backend).class_nearest(Q, P, label_index, int(n_classes), int(metric_code),
                                       out, num_threads or default_threads())
    return out


def nearest_two(Q, P, metric_code, backend=None, num_threads=None):
    """``(d1, idx, d2)``: nearest distance, nearest index, second-nearest distance."""
    Q, P = as_points(Q), as_points(P)
    m = Q.shape[0]
    d1 = np.empty(m)
    d2 = np.empty(m)
    idx = np.empty(m, dtype=np.int64)
    get_backend(backend).nearest_two(Q, P, int(metric_code), d1, idx, d2,
                                     num_threads or default_threads())
    return d1, idx, d2


def reduce_tile(D, row_labels, col_labels, row0, col0, d_diff, d_same_min, d_same_max,
                d_far, backend=None, num_threads=None):
    get_backend(backend).reduce_tile(
        D, np.ascontiguousarray(row_labels, dtype=np.int64),
        np.ascontiguousarray(col_labels, dtype=np.int64),
        int(row0), int(col0), d_diff, d_same_min, d_same_max, d_far,
        num_threads or default_threads())
