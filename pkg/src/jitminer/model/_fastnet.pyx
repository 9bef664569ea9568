# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the training hot loop.

Mirrors the contract of _purenet exactly: forward_batch, loss_and_grads,
adam_update and train_loop. The fused train_loop keeps the whole
epochs x (forward + backward + Adam) iteration in C with buffers
allocated once.
"""

import numpy as np

from libc.math cimport exp, fabs, sqrt

NAME = "compiled"


cdef inline double _sig(double z) noexcept nogil:
    cdef double ez
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    ez = exp(z)
    return ez / (1.0 + ez)


cdef void _forward(list weights, list biases, list acts) noexcept:
    # acts[0] holds the input; acts[i+1] receives layer i's output.
    # Inner loops run unit-stride over the output row; the accumulation
    # order over k matches the naive definition, so results are exact.
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t i, r, c, k, n, fin, fout
    cdef double[:, ::1] a, w, out
    cdef double[::1] b
    cdef double aval
    for i in range(n_layers):
        a = acts[i]
        w = weights[i]
        b = biases[i]
        out = acts[i + 1]
        n = a.shape[0]
        fin = w.shape[0]
        fout = w.shape[1]
        for r in range(n):
            for c in range(fout):
                out[r, c] = b[c]
            for k in range(fin):
                aval = a[r, k]
                for c in range(fout):
                    out[r, c] += aval * w[k, c]
            if i == n_layers - 1:
                for c in range(fout):
                    out[r, c] = _sig(out[r, c])
            else:
                for c in range(fout):
                    if out[r, c] < 0.0:
                        out[r, c] = 0.0


cdef double _backward(list weights, list acts, double[::1] y, double beta,
                      list grad_w, list grad_b, list deltas,
                      list w_transposed) noexcept:
    cdef Py_ssize_t n_layers = len(weights)
    cdef double[:, ::1] pred = acts[n_layers]
    cdef Py_ssize_t n = pred.shape[0]
    cdef double[:, ::1] dlast = deltas[n_layers - 1]
    cdef double loss = 0.0
    cdef double d, ad, g, p, s
    cdef Py_ssize_t r, i, c, k, fin, fout
    cdef double[:, ::1] delta, a, w, gw, dprev, wt
    cdef double[::1] gb

    for r in range(n):
        p = pred[r, 0]
        d = p - y[r]
        ad = fabs(d)
        if ad < beta:
            loss += 0.5 * d * d / beta
            g = d / beta
        else:
            loss += ad - 0.5 * beta
            g = 1.0 if d > 0.0 else (-1.0 if d < 0.0 else 0.0)
        dlast[r, 0] = (g / n) * p * (1.0 - p)
    loss /= n

    for i in range(n_layers - 1, -1, -1):
        delta = deltas[i]
        a = acts[i]
        gw = grad_w[i]
        gb = grad_b[i]
        fin = gw.shape[0]
        fout = gw.shape[1]
        for k in range(fin):
            for c in range(fout):
                gw[k, c] = 0.0
        for c in range(fout):
            gb[c] = 0.0
        for r in range(n):
            for k in range(fin):
                s = a[r, k]
                if s != 0.0:
                    for c in range(fout):
                        gw[k, c] += s * delta[r, c]
            for c in range(fout):
                gb[c] += delta[r, c]
        if i > 0:
            w = weights[i]
            wt = w_transposed[i]
            for k in range(fin):
                for c in range(fout):
                    wt[c, k] = w[k, c]
            dprev = deltas[i - 1]
            for r in range(n):
                for k in range(fin):
                    dprev[r, k] = 0.0
                for c in range(fout):
                    s = delta[r, c]
                    if s != 0.0:
                        for k in range(fin):
                            dprev[r, k] += s * wt[c, k]
                # ReLU derivative: the stored activation is max(z, 0).
                for k in range(fin):
                    if a[r, k] <= 0.0:
                        dprev[r, k] = 0.0
    return loss


cdef void _adam(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
                double c1, double c2, double lr, double b1, double b2,
                double eps) noexcept nogil:
    cdef Py_ssize_t j, n = p.shape[0]
    cdef double mh, vh
    for j in range(n):
        m[j] = b1 * m[j] + (1.0 - b1) * g[j]
        v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j]
        mh = m[j] / c1
        vh = v[j] / c2
        p[j] -= lr * mh / (sqrt(vh) + eps)


def _buffers(list weights, object X):
    n = X.shape[0]
    acts = [np.ascontiguousarray(X, dtype=np.float64)]
    deltas = []
    for w in weights:
        acts.append(np.empty((n, w.shape[1])))
        deltas.append(np.empty((n, w.shape[1])))
    grad_w = [np.empty_like(w) for w in weights]
    grad_b = [np.empty(w.shape[1]) for w in weights]
    w_t = [np.empty((w.shape[1], w.shape[0])) for w in weights]
    return acts, deltas, grad_w, grad_b, w_t


def forward_batch(list weights, list biases, object X):
    acts, _, _, _, _ = _buffers(weights, X)
    _forward(weights, biases, acts)
    return np.asarray(acts[len(weights)])[:, 0].copy()


def loss_and_grads(list weights, list biases, object X, object y, double beta):
    acts, deltas, grad_w, grad_b, w_t = _buffers(weights, X)
    y_arr = np.ascontiguousarray(y, dtype=np.float64)
    _forward(weights, biases, acts)
    loss = _backward(weights, acts, y_arr, beta, grad_w, grad_b, deltas, w_t)
    return loss, grad_w, grad_b


def adam_update(object param, object grad, object m, object v, long t,
                double lr, double b1, double b2, double eps):
    cdef double c1 = 1.0 - b1 ** t
    cdef double c2 = 1.0 - b2 ** t
    _adam(param.ravel(), np.ascontiguousarray(grad).ravel(), m.ravel(),
          v.ravel(), c1, c2, lr, b1, b2, eps)


def train_loop(list weights, list biases, object X, object y,
               list m_w, list v_w, list m_b, list v_b,
               long start_step, long epochs, double lr, double b1, double b2,
               double eps, double beta):
    acts, deltas, grad_w, grad_b, w_t = _buffers(weights, X)
    y_arr = np.ascontiguousarray(y, dtype=np.float64)
    losses = np.empty(epochs)
    cdef double[::1] losses_view = losses
    w_flat = [w.ravel() for w in weights]
    b_flat = [b.ravel() for b in biases]
    gw_flat = [g.ravel() for g in grad_w]
    gb_flat = [g.ravel() for g in grad_b]
    mw_flat = [m.ravel() for m in m_w]
    vw_flat = [v.ravel() for v in v_w]
    mb_flat = [m.ravel() for m in m_b]
    vb_flat = [v.ravel() for v in v_b]
    cdef Py_ssize_t n_layers = len(weights)
    cdef long epoch, t
    cdef Py_ssize_t i
    cdef double c1, c2
    for epoch in range(epochs):
        _forward(weights, biases, acts)
        losses_view[epoch] = _backward(
            weights, acts, y_arr, beta, grad_w, grad_b, deltas, w_t
        )
        t = start_step + epoch + 1
        c1 = 1.0 - b1 ** t
        c2 = 1.0 - b2 ** t
        for i in range(n_layers):
            _adam(w_flat[i], gw_flat[i], mw_flat[i], vw_flat[i],
                  c1, c2, lr, b1, b2, eps)
            _adam(b_flat[i], gb_flat[i], mb_flat[i], vb_flat[i],
                  c1, c2, lr, b1, b2, eps)
    return losses
