# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled recurrent and alignment kernels.

Same contracts as the pure-python reference module; hand-rolled loops keep
the extension self-contained (no BLAS linkage). All arrays are float64 and
C-contiguous.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, tanh, INFINITY

cnp.import_array()

BACKEND_NAME = "c"


cdef inline double _sigmoid(double z) noexcept nogil:
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    cdef double ez = exp(z)
    return ez / (1.0 + ez)


cdef inline double _logaddexp(double a, double b) noexcept nogil:
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    if a > b:
        return a + log(1.0 + exp(b - a))
    return b + log(1.0 + exp(a - b))


def lstm_forward(x_gates, w_h, h0, c0):
    """Run one LSTM layer over a sequence; see the reference module."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] xg = \
        np.ascontiguousarray(x_gates, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] wh = \
        np.ascontiguousarray(w_h, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] h_init = \
        np.ascontiguousarray(h0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] c_init = \
        np.ascontiguousarray(c0, dtype=np.float64)
    cdef Py_ssize_t T = xg.shape[0]
    cdef Py_ssize_t four_h = xg.shape[1]
    cdef Py_ssize_t H = four_h // 4
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] h = np.empty((T, H))
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] c = np.empty((T, H))
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] gates = np.empty((T, four_h))
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] a = np.empty(four_h)
    cdef double[:, ::1] xg_v = xg, wh_v = wh, h_v = h, c_v = c, g_v = gates
    cdef double[::1] a_v = a, h0_v = h_init, c0_v = c_init
    cdef Py_ssize_t t, j, k
    cdef double hk, i_g, f_g, g_g, o_g, c_t, c_p
    with nogil:
        for t in range(T):
            for j in range(four_h):
                a_v[j] = xg_v[t, j]
            for k in range(H):
                hk = h_v[t - 1, k] if t > 0 else h0_v[k]
                if hk != 0.0:
                    for j in range(four_h):
                        a_v[j] += hk * wh_v[k, j]
            for k in range(H):
                i_g = _sigmoid(a_v[k])
                f_g = _sigmoid(a_v[H + k])
                g_g = tanh(a_v[2 * H + k])
                o_g = _sigmoid(a_v[3 * H + k])
                c_p = c_v[t - 1, k] if t > 0 else c0_v[k]
                c_t = f_g * c_p + i_g * g_g
                g_v[t, k] = i_g
                g_v[t, H + k] = f_g
                g_v[t, 2 * H + k] = g_g
                g_v[t, 3 * H + k] = o_g
                c_v[t, k] = c_t
                h_v[t, k] = o_g * tanh(c_t)
    return h, c, gates


def lstm_backward_da(gates, c, c0, dh_out, w_h):
    """Backpropagate through the LSTM recurrence; see the reference module."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] g_arr = \
        np.ascontiguousarray(gates, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] c_arr = \
        np.ascontiguousarray(c, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] c_init = \
        np.ascontiguousarray(c0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] dho = \
        np.ascontiguousarray(dh_out, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] wh = \
        np.ascontiguousarray(w_h, dtype=np.float64)
    cdef Py_ssize_t T = c_arr.shape[0]
    cdef Py_ssize_t H = c_arr.shape[1]
    cdef Py_ssize_t four_h = 4 * H
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] da = np.empty((T, four_h))
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] dh_carry = np.zeros(H)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] dc_carry = np.zeros(H)
    cdef double[:, ::1] g_v = g_arr, c_v = c_arr, dho_v = dho, wh_v = wh, da_v = da
    cdef double[::1] c0_v = c_init, dhc = dh_carry, dcc = dc_carry
    cdef Py_ssize_t t, j, k
    cdef double i_g, f_g, g_g, o_g, c_p, tc, dh, dc, daj
    with nogil:
        for t in range(T - 1, -1, -1):
            for k in range(H):
                i_g = g_v[t, k]
                f_g = g_v[t, H + k]
                g_g = g_v[t, 2 * H + k]
                o_g = g_v[t, 3 * H + k]
                c_p = c_v[t - 1, k] if t > 0 else c0_v[k]
                tc = tanh(c_v[t, k])
                dh = dho_v[t, k] + dhc[k]
                dc = dcc[k] + dh * o_g * (1.0 - tc * tc)
                da_v[t, k] = dc * g_g * i_g * (1.0 - i_g)
                da_v[t, H + k] = dc * c_p * f_g * (1.0 - f_g)
                da_v[t, 2 * H + k] = dc * i_g * (1.0 - g_g * g_g)
                da_v[t, 3 * H + k] = dh * tc * o_g * (1.0 - o_g)
                dcc[k] = dc * f_g
            for k in range(H):
                dh = 0.0
                for j in range(four_h):
                    dh += da_v[t, j] * wh_v[k, j]
                dhc[k] = dh
    return da


def ctc_alpha_beta(logp_ext, skip_ok):
    """Forward-backward over the blank-augmented label lattice."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] lp = \
        np.ascontiguousarray(logp_ext, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1, mode="c"] sk = \
        np.ascontiguousarray(skip_ok, dtype=np.uint8)
    cdef Py_ssize_t T = lp.shape[0]
    cdef Py_ssize_t S = lp.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] la = \
        np.full((T, S), -np.inf)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] lb = \
        np.full((T, S), -np.inf)
    cdef double[:, ::1] lp_v = lp, la_v = la, lb_v = lb
    cdef cnp.uint8_t[::1] sk_v = sk
    cdef Py_ssize_t t, s
    cdef double acc, loglik
    with nogil:
        la_v[0, 0] = lp_v[0, 0]
        if S > 1:
            la_v[0, 1] = lp_v[0, 1]
        for t in range(1, T):
            for s in range(S):
                acc = la_v[t - 1, s]
                if s >= 1:
                    acc = _logaddexp(acc, la_v[t - 1, s - 1])
                if s >= 2 and sk_v[s]:
                    acc = _logaddexp(acc, la_v[t - 1, s - 2])
                la_v[t, s] = lp_v[t, s] + acc

        lb_v[T - 1, S - 1] = lp_v[T - 1, S - 1]
        if S > 1:
            lb_v[T - 1, S - 2] = lp_v[T - 1, S - 2]
        for t in range(T - 2, -1, -1):
            for s in range(S):
                acc = lb_v[t + 1, s]
                if s + 1 < S:
                    acc = _logaddexp(acc, lb_v[t + 1, s + 1])
                if s + 2 < S and sk_v[s + 2]:
                    acc = _logaddexp(acc, lb_v[t + 1, s + 2])
                lb_v[t, s] = lp_v[t, s] + acc

        loglik = la_v[T - 1, S - 1]
        if S > 1:
            loglik = _logaddexp(loglik, la_v[T - 1, S - 2])
    return la, lb, loglik
