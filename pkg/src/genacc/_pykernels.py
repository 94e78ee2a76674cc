"""Pure numpy versions of the compiled kernels in ``_ckernels.pyx``.

Signatures and output conventions match the extension exactly so the two
backends are interchangeable (and cross-checked in the test suite).
"""

import numpy as np

BACKEND = "python"

# rows per chunk; bounds the (rows, cols, d) temporaries below
_CHUNK = 64


def _block_distances(A, B, metric):
    if metric == 2:
        out = np.zeros((A.shape[0], B.shape[0]))
        for k in range(A.shape[1]):
            np.maximum(out, np.abs(A[:, k, None] - B[None, :, k]), out=out)
        return out
    if metric == 0:
        out = np.zeros((A.shape[0], B.shape[0]))
        for k in range(A.shape[1]):
            out += np.abs(A[:, k, None] - B[None, :, k])
        return out
    acc = np.zeros((A.shape[0], B.shape[0]))
    for k in range(A.shape[1]):
        t = A[:, k, None] - B[None, :, k]
        acc += t * t
    return np.sqrt(acc)


def pairwise_tile(A, B, metric, out, num_threads=1):
    if A.shape[1] != B.shape[1]:
        raise ValueError("dimension mismatch")
    if out.shape != (A.shape[0], B.shape[0]):
        raise ValueError("output shape mismatch")
    for s in range(0, A.shape[0], _CHUNK):
        out[s:s + _CHUNK] = _block_distances(A[s:s + _CHUNK], B, metric)


def reduce_tile(D, row_labels, col_labels, row0, col0,
                d_diff, d_same_min, d_same_max, d_far, num_threads=1):
    nr, nc = D.shape
    rows = np.arange(row0, row0 + nr)
    same = row_labels[:, None] == col_labels[None, :]
    self_mask = rows[:, None] == np.arange(col0, col0 + nc)[None, :]
    same_ok = same & ~self_mask
    diff_ok = ~same

    sl = slice(row0, row0 + nr)
    with np.errstate(invalid="ignore"):
        d_diff[sl] = np.minimum(d_diff[sl], np.where(diff_ok, D, np.inf).min(axis=1, initial=np.inf))
        d_same_min[sl] = np.minimum(d_same_min[sl], np.where(same_ok, D, np.inf).min(axis=1, initial=np.inf))
        d_same_max[sl] = np.maximum(d_same_max[sl], np.where(same_ok, D, -np.inf).max(axis=1, initial=-np.inf))
        d_far[sl] = np.maximum(d_far[sl], np.where(self_mask, -np.inf, D).max(axis=1, initial=-np.inf))


def class_nearest(Q, P, label_index, n_classes, metric, out, num_threads=1):
    if Q.shape[1] != P.shape[1]:
        raise ValueError("dimension mismatch")
    out[:] = np.inf
    for s in range(0, Q.shape[0], _CHUNK):
        D = _block_distances(Q[s:s + _CHUNK], P, metric)
        for c in range(n_classes):
            cols = label_index == c
            if cols.any():
                out[s:s + _CHUNK, c] = D[:, cols].min(axis=1)


def nearest_two(Q, P, metric, d1, idx, d2, num_threads=1):
    if Q.shape[1] != P.shape[1]:
        raise ValueError("dimension mismatch")
    n_p = P.shape[0]
    for s in range(0, Q.shape[0], _CHUNK):
        D = _block_distances(Q[s:s + _CHUNK], P, metric)
        best = D.argmin(axis=1)
        rows = np.arange(D.shape[0])
        d1[s:s + _CHUNK] = D[rows, best]
        idx[s:s + _CHUNK] = best
        if n_p > 1:
            D[rows, best] = np.inf
            d2[s:s + _CHUNK] = D.min(axis=1)
        else:
            d2[s:s + _CHUNK] = np.inf
