# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled bit-string kernels for fixed-number fermionic sectors.

Mirrors linres._kernels_py exactly; see that module for the contract.
"""

import numpy as np

cimport numpy as cnp

cdef extern from *:
    int __builtin_popcountll(unsigned long long x) nogil


cdef inline long long _rank(unsigned long long word, cnp.int64_t[:, ::1] binom) nogil:
    cdef long long rank = 0
    cdef int j = 0
    cdef int pos = 0
    while word:
        if word & 1ULL:
            j += 1
            rank += binom[pos, j]
        word >>= 1
        pos += 1
    return rank


def rank_word(word, binom_arr):
    cdef cnp.int64_t[:, ::1] binom = binom_arr
    return _rank(<unsigned long long> int(word), binom)


def bilinear_elements(states_arr, int p, int q, binom_arr):
    cdef cnp.uint64_t[::1] states = states_arr
    cdef cnp.int64_t[:, ::1] binom = binom_arr
    cdef Py_ssize_t dim = states.shape[0]

    rows_arr = np.empty(dim, dtype=np.int64)
    cols_arr = np.empty(dim, dtype=np.int64)
    signs_arr = np.empty(dim, dtype=np.int8)
    cdef cnp.int64_t[::1] rows = rows_arr
    cdef cnp.int64_t[::1] cols = cols_arr
    cdef cnp.int8_t[::1] signs = signs_arr

    cdef unsigned long long bit_p = 1ULL << p
    cdef unsigned long long bit_q = 1ULL << q
    cdef unsigned long long below_p = bit_p - 1ULL
    cdef unsigned long long below_q = bit_q - 1ULL
    cdef unsigned long long w, w1
    cdef Py_ssize_t c, n = 0
    cdef int sign

    with nogil:
        for c in range(dim):
            w = states[c]
            if not (w & bit_q):
                continue
            w1 = w ^ bit_q
            if w1 & bit_p:
                continue
            sign = 1
            if __builtin_popcountll(w & below_q) & 1:
                sign = -sign
            if __builtin_popcountll(w1 & below_p) & 1:
                sign = -sign
            rows[n] = _rank(w1 | bit_p, binom)
            cols[n] = c
            signs[n] = sign
            n += 1

    return rows_arr[:n], cols_arr[:n], signs_arr[:n]
