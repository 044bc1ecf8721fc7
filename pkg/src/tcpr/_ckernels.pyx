# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Must stay result-compatible with _pykernels."""

import numpy as np

from libc.stdint cimport int64_t


cdef inline bint _worse(double sa, int64_t ia, double sb, int64_t ib) noexcept nogil:
    # Heap order: lower similarity is worse; on equal similarity the larger
    # row index is worse, so the final ranking breaks ties by ascending index.
    return sa < sb or (sa == sb and ia > ib)


cdef void _sift_down(double* hs, int64_t* hi, Py_ssize_t size, Py_ssize_t pos) noexcept nogil:
    cdef Py_ssize_t child, right
    cdef double s
    cdef int64_t i
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        right = child + 1
        if right < size and _worse(hs[right], hi[right], hs[child], hi[child]):
            child = right
        if _worse(hs[child], hi[child], hs[pos], hi[pos]):
            s = hs[pos]; hs[pos] = hs[child]; hs[child] = s
            i = hi[pos]; hi[pos] = hi[child]; hi[child] = i
            pos = child
        else:
            break


cdef void _sift_up(double* hs, int64_t* hi, Py_ssize_t pos) noexcept nogil:
    cdef Py_ssize_t parent
    cdef double s
    cdef int64_t i
    while pos > 0:
        parent = (pos - 1) // 2
        if _worse(hs[pos], hi[pos], hs[parent], hi[parent]):
            s = hs[pos]; hs[pos] = hs[parent]; hs[parent] = s
            i = hi[pos]; hi[pos] = hi[parent]; hi[parent] = i
            pos = parent
        else:
            break


def topk_cosine(const float[:, ::1] feats, const double[::1] inv_norms,
                const double[::1] probe, Py_ssize_t k):
    """Top-k rows of ``feats`` by cosine to a unit ``probe``.

    Returns ``(indices, sims)`` sorted by similarity descending, ties by
    ascending index.
    """
    cdef Py_ssize_t n = feats.shape[0], d = feats.shape[1]
    cdef Py_ssize_t i, j, size = 0
    cdef double acc, s
    if k > n:
        k = n
    heap_s = np.empty(k, dtype=np.float64)
    heap_i = np.empty(k, dtype=np.int64)
    cdef double[::1] hs = heap_s
    cdef int64_t[::1] hi = heap_i
    if k <= 0:
        return heap_i, heap_s
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(d):
                acc = acc + feats[i, j] * probe[j]
            s = acc * inv_norms[i]
            if s > 1.0:
                s = 1.0
            elif s < -1.0:
                s = -1.0
            if size < k:
                hs[size] = s
                hi[size] = i
                _sift_up(&hs[0], &hi[0], size)
                size += 1
            elif s > hs[0]:
                hs[0] = s
                hi[0] = i
                _sift_down(&hs[0], &hi[0], size, 0)
    order = np.lexsort((heap_i, -heap_s))
    return heap_i[order], heap_s[order]


def ncc_accuracy(const double[:, :, ::1] protos, const double[:, :, :, ::1] queries):
    """Per-task nearest-prototype accuracy under squared Euclidean distance.

    ``protos`` is (tasks, classes, dim); ``queries`` is
    (tasks, classes, per_class, dim) with the true class on axis 1.
    """
    cdef Py_ssize_t T = queries.shape[0], C = queries.shape[1]
    cdef Py_ssize_t Q = queries.shape[2], D = queries.shape[3]
    cdef Py_ssize_t t, c, q, p, j, best
    cdef double dist, best_dist, diff
    cdef long correct
    out = np.empty(T, dtype=np.float64)
    cdef double[::1] acc = out
    with nogil:
        for t in range(T):
            correct = 0
            for c in range(C):
                for q in range(Q):
                    best = 0
                    best_dist = 0.0
                    for p in range(C):
                        dist = 0.0
                        for j in range(D):
                            diff = queries[t, c, q, j] - protos[t, p, j]
                            dist = dist + diff * diff
                        if p == 0 or dist < best_dist:
                            best = p
                            best_dist = dist
                    if best == c:
                        correct += 1
            acc[t] = correct / <double>(C * Q)
    return out
