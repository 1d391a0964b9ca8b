"""Pure-numpy implementations of the hot kernels.

Functionally identical to the compiled twins in ``_native.pyx``; the
parity is asserted by the test suite. These stay vectorized over the
widest axis so the fallback remains usable for real runs.
"""

import numpy as np

NEG_INF = -np.inf


def depthwise_conv1d_forward(x, k):
    """x: (T, C), k: (C, K) odd K. Returns (T, C), zero-padded 'same' output."""
    T, C = x.shape
    K = k.shape[1]
    pad = K // 2
    xp = np.zeros((T + K - 1, C), dtype=x.dtype)
    xp[pad:pad + T] = x
    y = np.zeros_like(x)
    for j in range(K):
        y += xp[j:j + T] * k[:, j]
    return y


def depthwise_conv1d_backward(x, k, gy):
    """Gradients wrt input and kernel for the forward above."""
    T, C = x.shape
    K = k.shape[1]
    pad = K // 2
    xp = np.zeros((T + K - 1, C), dtype=x.dtype)
    xp[pad:pad + T] = x
    gyp = np.zeros((T + K - 1, C), dtype=gy.dtype)
    gyp[pad:pad + T] = gy
    gx = np.zeros_like(x)
    gk = np.zeros_like(k)
    for j in range(K):
        gx += gyp[K - 1 - j:K - 1 - j + T] * k[:, j]
        gk[:, j] = (gy * xp[j:j + T]).sum(axis=0)
    return gx, gk


def ctc_forward_backward(log_probs, ext_labels, blank):
    """Total-probability loss over blank-interleaved alignments, plus gradient.

    log_probs: (T, V) float64 log-softmax rows.
    ext_labels: int array of 2*L+1 states (blank at even positions).
    Returns (loss, grad) where grad is d loss / d log_probs; for an
    infeasible target (T too short) returns (inf, zeros).
    """
    lp = np.asarray(log_probs, dtype=np.float64)
    T, V = lp.shape
    lab = np.asarray(ext_labels, dtype=np.int64)
    S = lab.shape[0]

    skip_ok = np.zeros(S, dtype=bool)
    if S > 2:
        skip_ok[2:] = (lab[2:] != blank) & (lab[2:] != lab[:-2])

    em = lp[:, lab]  # (T, S)
    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = em[0, 0]
    if S > 1:
        alpha[0, 1] = em[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        if S > 2:
            skipped = np.where(skip_ok[2:], prev[:-2], NEG_INF)
            acc[2:] = np.logaddexp(acc[2:], skipped)
        alpha[t] = acc + em[t]

    log_z = alpha[T - 1, S - 1]
    if S > 1:
        log_z = np.logaddexp(log_z, alpha[T - 1, S - 2])
    if not np.isfinite(log_z):
        return np.inf, np.zeros((T, V))

    # beta excludes the emission at t so alpha + beta sums paths through (t, s)
    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = 0.0
    if S > 1:
        beta[T - 1, S - 2] = 0.0
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1] + em[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        if S > 2:
            skipped = np.where(skip_ok[2:], nxt[2:], NEG_INF)
            acc[:-2] = np.logaddexp(acc[:-2], skipped)
        beta[t] = acc

    post = np.exp(alpha + beta - log_z)  # (T, S) posterior state occupancy
    grad = np.zeros((T, V))
    np.add.at(grad, (np.arange(T)[:, None], np.broadcast_to(lab, (T, S))), post)
    return float(-log_z), -grad
