"""Recurrent cell kernels with hand-derived backward passes.

Each kernel works on a single sequence.  Forward consumes a (T, D) input
block and returns the (T, H) hidden trajectory plus a cache; backward
consumes the cache and the loss gradient w.r.t. every hidden output and
returns (dWx, dWh, db, dx).

Weight layout per layer (H = hidden size, D = input size):

  vanilla: Wx (H, D),  Wh (H, H),  b (H,)
  gru:     Wx (3H, D), Wh (3H, H), b (3H,)   gate rows ordered [r, z, n]
  lstm:    Wx (4H, D), Wh (4H, H), b (4H,)   gate rows ordered [i, f, g, o]

The per-step loop only does one hidden-to-hidden matvec; input projections
and weight-gradient reductions are batched into whole-sequence GEMMs.
The reset gate multiplies the output of the hidden matmul (the fused
variant used by mainstream GRU implementations).
"""

from __future__ import annotations

import numpy as np

GATE_MULT = {"vanilla": 1, "gru": 3, "lstm": 4}


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# vanilla
# ---------------------------------------------------------------------------

def vanilla_forward(Wx, Wh, b, x):
    T = x.shape[0]
    H = Wh.shape[0]
    xp = x @ Wx.T + b
    h = np.zeros((T + 1, H))
    for t in range(T):
        h[t + 1] = np.tanh(xp[t] + Wh @ h[t])
    return h[1:], (x, h)


def vanilla_backward(Wx, Wh, cache, dh_out):
    x, h = cache
    T, H = dh_out.shape
    da = np.empty((T, H))
    carry = np.zeros(H)
    for t in range(T - 1, -1, -1):
        ht = h[t + 1]
        da[t] = (dh_out[t] + carry) * (1.0 - ht * ht)
        carry = Wh.T @ da[t]
    dWx = da.T @ x
    dWh = da.T @ h[:-1]
    db = da.sum(axis=0)
    dx = da @ Wx
    return dWx, dWh, db, dx


# ---------------------------------------------------------------------------
# gru
# ---------------------------------------------------------------------------

def gru_forward(Wx, Wh, b, x):
    T = x.shape[0]
    H = Wh.shape[0] // 3
    xp = x @ Wx.T + b
    h = np.zeros((T + 1, H))
    R = np.empty((T, H))
    Z = np.empty((T, H))
    N = np.empty((T, H))
    HPn = np.empty((T, H))  # hidden-matmul slice feeding the candidate gate
    for t in range(T):
        hp = Wh @ h[t]
        r = sigmoid(xp[t, :H] + hp[:H])
        z = sigmoid(xp[t, H:2 * H] + hp[H:2 * H])
        n = np.tanh(xp[t, 2 * H:] + r * hp[2 * H:])
        h[t + 1] = (1.0 - z) * n + z * h[t]
        R[t], Z[t], N[t], HPn[t] = r, z, n, hp[2 * H:]
    return h[1:], (x, h, R, Z, N, HPn)


def gru_backward(Wx, Wh, cache, dh_out):
    x, h, R, Z, N, HPn = cache
    T, H = dh_out.shape
    da_x = np.empty((T, 3 * H))  # grad w.r.t. the input projection rows
    da_h = np.empty((T, 3 * H))  # grad w.r.t. the hidden projection rows
    carry = np.zeros(H)
    for t in range(T - 1, -1, -1):
        dh = dh_out[t] + carry
        hprev = h[t]
        r, z, n = R[t], Z[t], N[t]
        dn = dh * (1.0 - z)
        dz = dh * (hprev - n)
        dan = dn * (1.0 - n * n)
        daz = dz * z * (1.0 - z)
        dar = (dan * HPn[t]) * r * (1.0 - r)
        da_x[t, :H], da_x[t, H:2 * H], da_x[t, 2 * H:] = dar, daz, dan
        da_h[t, :H], da_h[t, H:2 * H], da_h[t, 2 * H:] = dar, daz, dan * r
        carry = Wh.T @ da_h[t] + dh * z
    dWx = da_x.T @ x
    dWh = da_h.T @ h[:-1]
    db = da_x.sum(axis=0)
    dx = da_x @ Wx
    return dWx, dWh, db, dx


# ---------------------------------------------------------------------------
# lstm
# ---------------------------------------------------------------------------

def lstm_forward(Wx, Wh, b, x):
    T = x.shape[0]
    H = Wh.shape[0] // 4
    xp = x @ Wx.T + b
    h = np.zeros((T + 1, H))
    c = np.zeros((T + 1, H))
    I = np.empty((T, H))
    F = np.empty((T, H))
    G = np.empty((T, H))
    O = np.empty((T, H))
    TC = np.empty((T, H))
    for t in range(T):
        a = xp[t] + Wh @ h[t]
        i = sigmoid(a[:H])
        f = sigmoid(a[H:2 * H])
        g = np.tanh(a[2 * H:3 * H])
        o = sigmoid(a[3 * H:])
        c[t + 1] = f * c[t] + i * g
        tc = np.tanh(c[t + 1])
        h[t + 1] = o * tc
        I[t], F[t], G[t], O[t], TC[t] = i, f, g, o, tc
    return h[1:], (x, h, c, I, F, G, O, TC)


def lstm_backward(Wx, Wh, cache, dh_out):
    x, h, c, I, F, G, O, TC = cache
    T, H = dh_out.shape
    da = np.empty((T, 4 * H))
    carry_h = np.zeros(H)
    carry_c = np.zeros(H)
    for t in range(T - 1, -1, -1):
        dh = dh_out[t] + carry_h
        i, f, g, o, tc = I[t], F[t], G[t], O[t], TC[t]
        do = dh * tc
        dc = carry_c + dh * o * (1.0 - tc * tc)
        di = dc * g
        df = dc * c[t]
        dg = dc * i
        carry_c = dc * f
        da[t, :H] = di * i * (1.0 - i)
        da[t, H:2 * H] = df * f * (1.0 - f)
        da[t, 2 * H:3 * H] = dg * (1.0 - g * g)
        da[t, 3 * H:] = do * o * (1.0 - o)
        carry_h = Wh.T @ da[t]
    dWx = da.T @ x
    dWh = da.T @ h[:-1]
    db = da.sum(axis=0)
    dx = da @ Wx
    return dWx, dWh, db, dx


FORWARD = {"vanilla": vanilla_forward, "gru": gru_forward, "lstm": lstm_forward}
BACKWARD = {"vanilla": vanilla_backward, "gru": gru_backward, "lstm": lstm_backward}
