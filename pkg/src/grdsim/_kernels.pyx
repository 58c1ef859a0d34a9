# Fused per-member accumulators for scoring one sample against a family.
# Column layout must match grdsim.kernels.
import numpy as np

from libc.stdint cimport int64_t


def pair_counts(const int64_t[::1] t, const int64_t[:, ::1] members):
    cdef Py_ssize_t m = members.shape[0]
    cdef Py_ssize_t n = members.shape[1]
    cdef Py_ssize_t k, i
    cdef int64_t a, b, inter, union_, absdiff, total, signed, dot, sumsq
    if t.shape[0] != n:
        raise ValueError(f"sample has {t.shape[0]} cells, members have {n}")
    out = np.zeros((m, 7), dtype=np.int64)
    cdef int64_t[:, ::1] o = out
    with nogil:
        for k in range(m):
            inter = 0
            union_ = 0
            absdiff = 0
            total = 0
            signed = 0
            dot = 0
            sumsq = 0
            for i in range(n):
                a = t[i]
                b = members[k, i]
                if a > 0 or b > 0:
                    union_ += 1
                    if a > 0 and b > 0:
                        inter += 1
                absdiff += a - b if a >= b else b - a
                total += a + b
                signed += a - b
                dot += a * b
                sumsq += b * b
            o[k, 0] = inter
            o[k, 1] = union_
            o[k, 2] = absdiff
            o[k, 3] = total
            o[k, 4] = signed
            o[k, 5] = dot
            o[k, 6] = sumsq
    return out
