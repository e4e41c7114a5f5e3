"""Hot dense-layer and optimizer kernels.

Each kernel has a pure-numpy implementation and a numba ``@njit`` twin with the same
signature.  The numba path is used when numba imports and ``AUTOBAYES_NUMBA`` is not set
to ``0``/``off``; ``numpy_kernels`` and ``numba_kernels`` expose both for benchmarking.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional accelerator
    numba = None


def _flag_enabled() -> bool:
    return os.environ.get("AUTOBAYES_NUMBA", "1").strip().lower() not in ("0", "off", "false", "no")


# ---------------------------------------------------------------- numpy path


def np_dense_forward(x, W, b, gamma, beta, run_mean, run_var, use_bn, relu, train, eps, momentum):
    """Returns (y, xhat, inv_std). Running statistics are updated in place when training."""
    h = x @ W + b
    if use_bn:
        if train:
            mean = h.mean(axis=0)
            var = h.var(axis=0)
            n = h.shape[0]
            run_mean *= 1.0 - momentum
            run_mean += momentum * mean
            run_var *= 1.0 - momentum
            run_var += momentum * var * (n / (n - 1) if n > 1 else 1.0)
        else:
            mean, var = run_mean, run_var
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (h - mean) * inv_std
        y = xhat * gamma + beta
    else:
        xhat = h
        inv_std = np.empty(0)
        y = h.copy()
    if relu:
        np.maximum(y, 0.0, out=y)
    return y, xhat, inv_std


def np_dense_backward(gy, x, W, y, xhat, inv_std, gamma, use_bn, relu, train, gW, gb, ggamma, gbeta):
    """Accumulates parameter gradients in place and returns the input gradient."""
    g = gy * (y > 0.0) if relu else gy
    if use_bn:
        ggamma += (g * xhat).sum(axis=0)
        gbeta += g.sum(axis=0)
        gx_hat = g * gamma
        if train:
            n = g.shape[0]
            gh = inv_std / n * (n * gx_hat - gx_hat.sum(axis=0) - xhat * (gx_hat * xhat).sum(axis=0))
        else:
            gh = gx_hat * inv_std
    else:
        gh = g
    gW += x.T @ gh
    gb += gh.sum(axis=0)
    return gh @ W.T


def np_adam_update(p, g, m, v, lr, b1, b2, eps, t):
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * g * g
    mhat = m / (1.0 - b1 ** t)
    vhat = v / (1.0 - b2 ** t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)


# ---------------------------------------------------------------- numba path


def _nb_dense_forward(x, W, b, gamma, beta, run_mean, run_var, use_bn, relu, train, eps, momentum):
    n = x.shape[0]
    k = W.shape[1]
    h = np.dot(x, W)
    for i in range(n):
        for j in range(k):
            h[i, j] += b[j]
    if use_bn:
        inv_std = np.empty(k)
        xhat = np.empty_like(h)
        y = np.empty_like(h)
        for j in range(k):
            if train:
                mu = 0.0
                for i in range(n):
                    mu += h[i, j]
                mu /= n
                var = 0.0
                for i in range(n):
                    d = h[i, j] - mu
                    var += d * d
                var /= n
                corr = n / (n - 1.0) if n > 1 else 1.0
                run_mean[j] = run_mean[j] * (1.0 - momentum) + momentum * mu
                run_var[j] = run_var[j] * (1.0 - momentum) + momentum * var * corr
            else:
                mu = run_mean[j]
                var = run_var[j]
            s = 1.0 / np.sqrt(var + eps)
            inv_std[j] = s
            for i in range(n):
                xh = (h[i, j] - mu) * s
                xhat[i, j] = xh
                val = xh * gamma[j] + beta[j]
                if relu and val < 0.0:
                    val = 0.0
                y[i, j] = val
        return y, xhat, inv_std
    y = h.copy()
    if relu:
        for i in range(n):
            for j in range(k):
                if y[i, j] < 0.0:
                    y[i, j] = 0.0
    return y, h, np.empty(0)


def _nb_dense_backward(gy, x, W, y, xhat, inv_std, gamma, use_bn, relu, train, gW, gb, ggamma, gbeta):
    n = gy.shape[0]
    k = gy.shape[1]
    g = np.empty_like(gy)
    for i in range(n):
        for j in range(k):
            g[i, j] = gy[i, j] if (not relu or y[i, j] > 0.0) else 0.0
    if use_bn:
        gh = np.empty_like(g)
        for j in range(k):
            sg = 0.0
            sgx = 0.0
            for i in range(n):
                sg += g[i, j]
                sgx += g[i, j] * xhat[i, j]
            ggamma[j] += sgx
            gbeta[j] += sg
            gam = gamma[j]
            s = inv_std[j]
            if train:
                for i in range(n):
                    gh[i, j] = s / n * (n * g[i, j] * gam - sg * gam - xhat[i, j] * sgx * gam)
            else:
                for i in range(n):
                    gh[i, j] = g[i, j] * gam * s
    else:
        gh = g
    gW += np.dot(x.T.copy(), gh)
    for j in range(k):
        acc = 0.0
        for i in range(n):
            acc += gh[i, j]
        gb[j] += acc
    return np.dot(gh, W.T.copy())


def _nb_adam_update(p, g, m, v, lr, b1, b2, eps, t):
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for i in range(p.shape[0]):
        m[i] = b1 * m[i] + (1.0 - b1) * g[i]
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i]
        p[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)


numpy_kernels = SimpleNamespace(
    name="numpy",
    dense_forward=np_dense_forward,
    dense_backward=np_dense_backward,
    adam_update=np_adam_update,
)

if numba is not None:
    _jit = numba.njit(cache=True)
    numba_kernels = SimpleNamespace(
        name="numba",
        dense_forward=_jit(_nb_dense_forward),
        dense_backward=_jit(_nb_dense_backward),
        adam_update=_jit(_nb_adam_update),
    )
else:  # pragma: no cover
    numba_kernels = None

USE_NUMBA = numba_kernels is not None and _flag_enabled()
kernels = numba_kernels if USE_NUMBA else numpy_kernels
BACKEND = kernels.name
