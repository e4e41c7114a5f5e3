from __future__ import annotations

import numpy as np

from . import _kernels

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class ShapeError(ValueError):
    pass


class DenseBlock:
    """Stack of fully connected layers.

    Hidden layers are ``Linear -> BatchNorm -> ReLU`` (either of the last two can be
    switched off); the final layer is a plain affine map. All parameters live in one flat
    vector ``params`` with matching ``grads`` so the optimizer touches a single array.
    """

    def __init__(self, widths, activation="relu", normalization="batchnorm", rng=None, name=""):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or any(w < 0 for w in widths) or any(w <= 0 for w in widths[1:]):
            raise ShapeError(f"bad layer widths {widths}")
        if activation not in ("relu", None, "none"):
            raise ValueError(f"unknown activation {activation!r}")
        if normalization not in ("batchnorm", None, "none"):
            raise ValueError(f"unknown normalization {normalization!r}")
        self.widths = widths
        self.name = name
        self.relu = activation == "relu"
        self.use_bn = normalization == "batchnorm"
        rng = rng if rng is not None else np.random.default_rng(0)

        layout = []
        for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
            hidden = i < len(widths) - 2
            layout.append((f"W{i}", (a, b)))
            layout.append((f"b{i}", (b,)))
            if hidden and self.use_bn:
                layout.append((f"gamma{i}", (b,)))
                layout.append((f"beta{i}", (b,)))
        total = sum(int(np.prod(s)) for _, s in layout)
        self.params = np.zeros(total)
        self.grads = np.zeros(total)
        self._views: dict[str, np.ndarray] = {}
        self._gviews: dict[str, np.ndarray] = {}
        off = 0
        for key, shape in layout:
            size = int(np.prod(shape))
            self._views[key] = self.params[off:off + size].reshape(shape)
            self._gviews[key] = self.grads[off:off + size].reshape(shape)
            off += size
        self.buffers: dict[str, np.ndarray] = {}
        for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
            hidden = i < len(widths) - 2
            W = self._views[f"W{i}"]
            gain = 2.0 if (hidden and self.relu) else 1.0
            if a > 0:
                W[...] = rng.normal(0.0, np.sqrt(gain / a), size=(a, b))
            if hidden and self.use_bn:
                self._views[f"gamma{i}"][...] = 1.0
                self.buffers[f"mean{i}"] = np.zeros(b)
                self.buffers[f"var{i}"] = np.ones(b)
        self._cache = None
        self._layers = [self._layer(i) for i in range(self.n_layers)]

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def in_width(self) -> int:
        return self.widths[0]

    @property
    def out_width(self) -> int:
        return self.widths[-1]

    def param(self, key: str) -> np.ndarray:
        return self._views[key]

    def grad(self, key: str) -> np.ndarray:
        return self._gviews[key]

    def parameter_count(self) -> int:
        return int(self.params.size)

    def zero_grad(self):
        self.grads[...] = 0.0

    def _layer(self, i):
        hidden = i < self.n_layers - 1
        bn = hidden and self.use_bn
        v, g = self._views, self._gviews
        empty = np.empty(0)
        return (
            v[f"W{i}"], v[f"b{i}"],
            v[f"gamma{i}"] if bn else empty, v[f"beta{i}"] if bn else empty,
            self.buffers[f"mean{i}"] if bn else empty, self.buffers[f"var{i}"] if bn else empty,
            bn, hidden and self.relu,
            g[f"W{i}"], g[f"b{i}"],
            g[f"gamma{i}"] if bn else empty, g[f"beta{i}"] if bn else empty,
        )

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_width:
            raise ShapeError(f"{self.name or 'block'} expects width {self.in_width}, got shape {x.shape}")
        k = _kernels.kernels
        cache = []
        h = x
        for i in range(self.n_layers):
            W, b, gamma, beta, rm, rv, bn, relu, *_ = self._layers[i]
            y, xhat, inv_std = k.dense_forward(h, W, b, gamma, beta, rm, rv, bn, relu, train, BN_EPS, BN_MOMENTUM)
            cache.append((h, y, xhat, inv_std))
            h = y
        self._cache = (cache, train)
        return h

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        """Accumulate parameter gradients into ``grads`` and return d(loss)/d(input)."""
        if self._cache is None:
            raise RuntimeError(f"{self.name or 'block'}: backward called before forward")
        cache, train = self._cache
        k = _kernels.kernels
        g = np.ascontiguousarray(grad_out, dtype=np.float64)
        if g.shape != cache[-1][1].shape:
            raise ShapeError(f"upstream gradient shape {g.shape} != output shape {cache[-1][1].shape}")
        for i in reversed(range(self.n_layers)):
            W, b, gamma, beta, rm, rv, bn, relu, gW, gb, ggamma, gbeta = self._layers[i]
            h, y, xhat, inv_std = cache[i]
            g = k.dense_backward(g, h, W, y, xhat, inv_std, gamma, bn, relu, train, gW, gb, ggamma, gbeta)
        return g

    # -- serialization helpers

    def __getstate__(self):
        return {"widths": self.widths, "relu": self.relu, "use_bn": self.use_bn, "name": self.name,
                "state": self.state()}

    def __setstate__(self, d):
        self.__init__(d["widths"], "relu" if d["relu"] else None, "batchnorm" if d["use_bn"] else None,
                      np.random.default_rng(0), d["name"])
        self.load_state(d["state"])

    def state(self) -> dict[str, np.ndarray]:
        out = {"params": self.params.copy()}
        out.update({k: v.copy() for k, v in self.buffers.items()})
        return out

    def load_state(self, state: dict[str, np.ndarray]):
        if state["params"].shape != self.params.shape:
            raise ShapeError(f"{self.name}: parameter vector size mismatch")
        self.params[...] = state["params"]
        for k in self.buffers:
            self.buffers[k][...] = state[k]
