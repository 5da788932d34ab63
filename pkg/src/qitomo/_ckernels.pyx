# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled circuit-evaluation kernels.

A circuit table is a set of operation sequences (``ptr``/``seq`` in CSR
layout).  Every sequence starts from ``rho``, applies ``ops[seq[t]]`` in
order and is closed by each row of ``effects``.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def forward(const double[:, :, ::1] ops, const double[::1] rho,
            const double[:, ::1] effects, const cnp.intp_t[::1] ptr,
            const cnp.intp_t[::1] seq):
    cdef Py_ssize_t n_seq = ptr.shape[0] - 1
    cdef Py_ssize_t D = rho.shape[0]
    cdef Py_ssize_t ne = effects.shape[0]
    cdef Py_ssize_t s, t, a, b, e, k
    cdef double acc
    out_arr = np.empty((n_seq, ne), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    buf_arr = np.empty((2, D), dtype=np.float64)
    cdef double[:, ::1] buf = buf_arr
    cdef int cur
    for s in range(n_seq):
        cur = 0
        for a in range(D):
            buf[0, a] = rho[a]
        for t in range(ptr[s], ptr[s + 1]):
            k = seq[t]
            for a in range(D):
                acc = 0.0
                for b in range(D):
                    acc = acc + ops[k, a, b] * buf[cur, b]
                buf[1 - cur, a] = acc
            cur = 1 - cur
        for e in range(ne):
            acc = 0.0
            for a in range(D):
                acc = acc + effects[e, a] * buf[cur, a]
            out[s, e] = acc
    return out_arr


def backward(const double[:, :, ::1] ops, const double[::1] rho,
             const double[:, ::1] effects, const cnp.intp_t[::1] ptr,
             const cnp.intp_t[::1] seq, const double[:, ::1] w):
    """Probabilities plus gradients of ``sum(w * probs)``."""
    cdef Py_ssize_t n_seq = ptr.shape[0] - 1
    cdef Py_ssize_t D = rho.shape[0]
    cdef Py_ssize_t ne = effects.shape[0]
    cdef Py_ssize_t s, t, a, b, e, k, L, j, maxlen = 0
    cdef double acc, ws
    for s in range(n_seq):
        if ptr[s + 1] - ptr[s] > maxlen:
            maxlen = ptr[s + 1] - ptr[s]
    out_arr = np.empty((n_seq, ne), dtype=np.float64)
    g_ops_arr = np.zeros((ops.shape[0], D, D), dtype=np.float64)
    g_rho_arr = np.zeros(D, dtype=np.float64)
    g_eff_arr = np.zeros((ne, D), dtype=np.float64)
    vs_arr = np.empty((maxlen + 1, D), dtype=np.float64)
    u_arr = np.empty((2, D), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[:, :, ::1] g_ops = g_ops_arr
    cdef double[::1] g_rho = g_rho_arr
    cdef double[:, ::1] g_eff = g_eff_arr
    cdef double[:, ::1] vs = vs_arr
    cdef double[:, ::1] u = u_arr
    cdef int cur
    for s in range(n_seq):
        L = ptr[s + 1] - ptr[s]
        for a in range(D):
            vs[0, a] = rho[a]
        for j in range(L):
            k = seq[ptr[s] + j]
            for a in range(D):
                acc = 0.0
                for b in range(D):
                    acc = acc + ops[k, a, b] * vs[j, b]
                vs[j + 1, a] = acc
        for a in range(D):
            u[0, a] = 0.0
        for e in range(ne):
            acc = 0.0
            for a in range(D):
                acc = acc + effects[e, a] * vs[L, a]
            out[s, e] = acc
            ws = w[s, e]
            if ws != 0.0:
                for a in range(D):
                    g_eff[e, a] += ws * vs[L, a]
                    u[0, a] += ws * effects[e, a]
        cur = 0
        for j in range(L - 1, -1, -1):
            k = seq[ptr[s] + j]
            for a in range(D):
                for b in range(D):
                    g_ops[k, a, b] += u[cur, a] * vs[j, b]
            for b in range(D):
                acc = 0.0
                for a in range(D):
                    acc = acc + u[cur, a] * ops[k, a, b]
                u[1 - cur, b] = acc
            cur = 1 - cur
        for a in range(D):
            g_rho[a] += u[cur, a]
    return out_arr, g_ops_arr, g_rho_arr, g_eff_arr
