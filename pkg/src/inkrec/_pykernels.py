"""Reference implementations of the recurrent and alignment kernels.

Pure numpy, float64, same call contracts as the compiled extension. The
compiled module is preferred at import time when present; this module is
always available and is the ground truth for parity tests.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_forward(x_gates, w_h, h0, c0):
    """Run one LSTM layer over a sequence.

    x_gates: (T, 4H) input projections with bias already added, gate order
    [input, forget, candidate, output]. w_h: (H, 4H) recurrent weights.
    h0, c0: (H,) initial states. Returns (h, c, gates) where gates holds the
    post-activation gate values needed by the backward pass.
    """
    x_gates = np.ascontiguousarray(x_gates, dtype=np.float64)
    w_h = np.ascontiguousarray(w_h, dtype=np.float64)
    T, four_h = x_gates.shape
    H = four_h // 4
    h = np.empty((T, H))
    c = np.empty((T, H))
    gates = np.empty((T, four_h))
    h_prev = np.asarray(h0, dtype=np.float64)
    c_prev = np.asarray(c0, dtype=np.float64)
    for t in range(T):
        a = x_gates[t] + h_prev @ w_h
        i = _sigmoid(a[:H])
        f = _sigmoid(a[H : 2 * H])
        g = np.tanh(a[2 * H : 3 * H])
        o = _sigmoid(a[3 * H :])
        c_t = f * c_prev + i * g
        h_t = o * np.tanh(c_t)
        gates[t, :H] = i
        gates[t, H : 2 * H] = f
        gates[t, 2 * H : 3 * H] = g
        gates[t, 3 * H :] = o
        c[t] = c_t
        h[t] = h_t
        h_prev = h_t
        c_prev = c_t
    return h, c, gates


def lstm_backward_da(gates, c, c0, dh_out, w_h):
    """Backpropagate through the LSTM recurrence.

    gates, c: forward outputs. c0: (H,) initial cell state. dh_out: (T, H)
    gradient arriving at each hidden state from above. w_h: (H, 4H).
    Returns da: (T, 4H) gradient with respect to the pre-activation gate
    inputs; weight and input gradients are plain matmuls on top of it.
    """
    gates = np.ascontiguousarray(gates, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    dh_out = np.ascontiguousarray(dh_out, dtype=np.float64)
    w_h = np.ascontiguousarray(w_h, dtype=np.float64)
    T, H = c.shape
    da = np.empty((T, 4 * H))
    dh_carry = np.zeros(H)
    dc_carry = np.zeros(H)
    for t in range(T - 1, -1, -1):
        i = gates[t, :H]
        f = gates[t, H : 2 * H]
        g = gates[t, 2 * H : 3 * H]
        o = gates[t, 3 * H :]
        c_prev = c[t - 1] if t > 0 else np.asarray(c0, dtype=np.float64)
        tc = np.tanh(c[t])
        dh = dh_out[t] + dh_carry
        dc = dc_carry + dh * o * (1.0 - tc * tc)
        da[t, :H] = dc * g * i * (1.0 - i)
        da[t, H : 2 * H] = dc * c_prev * f * (1.0 - f)
        da[t, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
        da[t, 3 * H :] = dh * tc * o * (1.0 - o)
        dh_carry = da[t] @ w_h.T
        dc_carry = dc * f
    return da


def ctc_alpha_beta(logp_ext, skip_ok):
    """Forward-backward over the blank-augmented label lattice.

    logp_ext: (T, S) per-frame log-probability of each lattice position's
    symbol. skip_ok: (S,) uint8, 1 where the diagonal skip transition from
    position s-2 is allowed. Both alpha and beta include the emission at
    their own frame. Returns (log_alpha, log_beta, loglik).
    """
    logp_ext = np.ascontiguousarray(logp_ext, dtype=np.float64)
    T, S = logp_ext.shape
    neg = -np.inf
    log_alpha = np.full((T, S), neg)
    log_beta = np.full((T, S), neg)

    log_alpha[0, 0] = logp_ext[0, 0]
    if S > 1:
        log_alpha[0, 1] = logp_ext[0, 1]
    for t in range(1, T):
        prev = log_alpha[t - 1]
        stay = prev
        step = np.concatenate(([neg], prev[:-1]))
        acc = np.logaddexp(stay, step)
        if S > 2:
            skip = np.concatenate(([neg, neg], prev[:-2]))
            skip = np.where(skip_ok.astype(bool), skip, neg)
            acc = np.logaddexp(acc, skip)
        log_alpha[t] = logp_ext[t] + acc

    log_beta[T - 1, S - 1] = logp_ext[T - 1, S - 1]
    if S > 1:
        log_beta[T - 1, S - 2] = logp_ext[T - 1, S - 2]
    for t in range(T - 2, -1, -1):
        nxt = log_beta[t + 1]
        stay = nxt
        step = np.concatenate((nxt[1:], [neg]))
        acc = np.logaddexp(stay, step)
        if S > 2:
            skip = np.concatenate((nxt[2:], [neg, neg]))
            allowed = np.concatenate((skip_ok[2:].astype(bool), [False, False]))
            skip = np.where(allowed, skip, neg)
            acc = np.logaddexp(acc, skip)
        log_beta[t] = logp_ext[t] + acc

    tail = log_alpha[T - 1, S - 1]
    if S > 1:
        tail = np.logaddexp(tail, log_alpha[T - 1, S - 2])
    return log_alpha, log_beta, tail
