"""Dense networks with hand-written backpropagation, Adam and norm clipping.

Everything runs in float64. A network is an :class:`Mlp`, an ordered list of
:class:`Dense`, :class:`LayerNorm` and :class:`ReLU` layers. Parameters are
exposed as a flat list of arrays in declaration order (``W, b`` for each
Dense, ``gain, bias`` for each LayerNorm); gradients use the same order.

Typical use::

    net = init_mlp((147, 256, 256, 7), seed=0)
    out, cache = forward(net, x)
    grads, d_x = backward(net, cache, d_out)
    clip_grad_norm(grads, 0.3)
    adam_step(net, grads, opt)
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import NumericError, ShapeError, UsageError

__all__ = [
    "Dense",
    "LayerNorm",
    "ReLU",
    "Mlp",
    "ForwardCache",
    "AdamState",
    "forward",
    "backward",
    "clip_grad_norm",
    "adam_step",
    "init_mlp",
    "save_mlp",
    "load_mlp",
]

DTYPE = np.float64


@dataclass(eq=False)
class Dense:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W.shape[0]

    def params(self) -> list[np.ndarray]:
        return [self.W, self.b]


@dataclass(eq=False)
class LayerNorm:
    gain: np.ndarray
    bias: np.ndarray
    eps: float = 1e-5

    @property
    def dim(self) -> int:
        return self.gain.shape[0]

    def params(self) -> list[np.ndarray]:
        return [self.gain, self.bias]


@dataclass(eq=False)
class ReLU:
    def params(self) -> list[np.ndarray]:
        return []


class Mlp:
    """Sequential stack of layers.

    ``version`` is bumped by every in-place parameter update made through this
    module, which lets :func:`backward` reject caches from before the update.
    """

    def __init__(self, layers):
        self.layers = list(layers)
        self.version = 0
        self._check()

    def _check(self):
        width = None
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Dense):
                if layer.W.ndim != 2 or layer.b.shape != (layer.W.shape[0],):
                    raise ShapeError(f"layer {i}: Dense W {layer.W.shape} / b {layer.b.shape}")
                if width is not None and layer.in_dim != width:
                    raise ShapeError(f"layer {i}: expects {layer.in_dim} inputs, got {width}")
                width = layer.out_dim
            elif isinstance(layer, LayerNorm):
                if layer.gain.shape != layer.bias.shape or layer.gain.ndim != 1:
                    raise ShapeError(f"layer {i}: LayerNorm gain/bias shapes differ")
                if not layer.eps > 0:
                    raise ShapeError(f"layer {i}: LayerNorm eps must be positive")
                if width is not None and layer.dim != width:
                    raise ShapeError(f"layer {i}: LayerNorm over {layer.dim}, input {width}")
                width = layer.dim
            elif not isinstance(layer, ReLU):
                raise TypeError(f"unsupported layer {layer!r}")
        if width is None:
            raise ShapeError("network needs at least one Dense or LayerNorm layer")

    @property
    def in_dim(self) -> int:
        for layer in self.layers:
            if isinstance(layer, Dense):
                return layer.in_dim
            if isinstance(layer, LayerNorm):
                return layer.dim
        raise AssertionError("unreachable")

    @property
    def out_dim(self) -> int:
        for layer in reversed(self.layers):
            if isinstance(layer, Dense):
                return layer.out_dim
            if isinstance(layer, LayerNorm):
                return layer.dim
        raise AssertionError("unreachable")

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def copy(self) -> "Mlp":
        layers = []
        for layer in self.layers:
            if isinstance(layer, Dense):
                layers.append(Dense(layer.W.copy(), layer.b.copy()))
            elif isinstance(layer, LayerNorm):
                layers.append(LayerNorm(layer.gain.copy(), layer.bias.copy(), layer.eps))
            else:
                layers.append(ReLU())
        return Mlp(layers)

    def __call__(self, x) -> np.ndarray:
        """Inference-only forward pass (no cache)."""
        return forward(self, x)[0]


@dataclass(eq=False)
class ForwardCache:
    net_id: int
    version: int
    squeeze: bool
    entries: list = field(default_factory=list)
    consumed: bool = False


def forward(net: Mlp, x) -> tuple[np.ndarray, ForwardCache]:
    """Run ``x`` (a vector or a row batch) through ``net``."""
    x = np.asarray(x, dtype=DTYPE)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise ShapeError(f"input shape {x.shape} does not match network input {net.in_dim}")
    cache = ForwardCache(id(net), net.version, squeeze)
    h = x
    for layer in net.layers:
        if isinstance(layer, Dense):
            cache.entries.append(h)
            h = h @ layer.W.T
            h += layer.b
        elif isinstance(layer, LayerNorm):
            n = h.shape[1]
            xhat = h - h.mean(axis=1, keepdims=True)
            var = np.einsum("ij,ij->i", xhat, xhat)[:, None] / n
            inv_std = 1.0 / np.sqrt(var + layer.eps)
            xhat *= inv_std
            cache.entries.append((xhat, inv_std))
            h = xhat * layer.gain
            h += layer.bias
        else:
            mask = h > 0
            cache.entries.append(mask)
            if h is x:
                h = h * mask
            else:
                # h is a fresh intermediate that nothing else references
                np.maximum(h, 0.0, out=h)
    return (h[0] if squeeze else h), cache


def backward(
    net: Mlp, cache: ForwardCache, d_out, need_input_grad: bool = True
) -> tuple[list[np.ndarray], np.ndarray | None]:
    """Gradients of a scalar loss given ``d_out`` = dLoss/dOutput.

    Returns ``(param_grads, d_in)``, with ``param_grads`` aligned to
    ``net.params()``. A cache can be consumed once and only by the network
    (at the same parameter version) that produced it. With
    ``need_input_grad=False`` the input gradient is skipped and ``d_in`` is None.
    """
    if cache.consumed:
        raise UsageError("forward cache already consumed by a previous backward")
    if cache.net_id != id(net) or cache.version != net.version:
        raise UsageError("forward cache is stale or belongs to a different network")
    if len(cache.entries) != len(net.layers):
        raise UsageError("forward cache does not match network depth")
    cache.consumed = True

    g = np.asarray(d_out, dtype=DTYPE)
    if cache.squeeze:
        g = g[None, :]
    if g.shape[1] != net.out_dim:
        raise ShapeError(f"d_out shape {g.shape} does not match network output {net.out_dim}")
    first = 0 if need_input_grad else _first_param_layer(net)
    grads: list[np.ndarray] = []
    for i in range(len(net.layers) - 1, -1, -1):
        layer, entry = net.layers[i], cache.entries[i]
        if isinstance(layer, Dense):
            grads.append(g.sum(axis=0))
            grads.append(g.T @ entry)
            if i == first and not need_input_grad:
                g = None
                break
            g = g @ layer.W
        elif isinstance(layer, LayerNorm):
            xhat, inv_std = entry
            grads.append(g.sum(axis=0))
            grads.append(np.einsum("ij,ij->j", g, xhat))
            dxhat = g * layer.gain
            n = xhat.shape[1]
            s1 = dxhat.sum(axis=1, keepdims=True)
            s2 = np.einsum("ij,ij->i", dxhat, xhat)[:, None]
            dxhat *= n
            dxhat -= s1
            dxhat -= xhat * s2
            dxhat *= inv_std / n
            g = dxhat
        else:
            g = g * entry
    grads.reverse()
    if g is None:
        return grads, None
    return grads, (g[0] if cache.squeeze else g)


def _first_param_layer(net: Mlp) -> int:
    for i, layer in enumerate(net.layers):
        if not isinstance(layer, ReLU):
            return i
    return 0


def global_norm(grads) -> float:
    return float(np.sqrt(sum(float(np.vdot(g, g)) for g in grads)))


def clip_grad_norm(grads: list[np.ndarray], max_norm: float) -> float:
    """Rescale ``grads`` in place so their joint L2 norm is at most ``max_norm``.

    Returns the scale that was applied (1.0 when no clipping happened).
    """
    if not max_norm > 0:
        raise ValueError("max_norm must be positive")
    norm = global_norm(grads)
    if not np.isfinite(norm):
        raise NumericError(f"non-finite gradient norm ({norm})")
    if norm <= max_norm:
        return 1.0
    scale = max_norm / norm
    for g in grads:
        g *= scale
    return scale


@dataclass(eq=False)
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    lr: float
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    _scratch: list[np.ndarray] | None = field(default=None, repr=False)

    @classmethod
    def for_params(cls, params, lr: float, **kwargs) -> "AdamState":
        if isinstance(params, Mlp):
            params = params.params()
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            lr=lr,
            **kwargs,
        )


def adam_step(params, grads, state: AdamState) -> None:
    """One bias-corrected Adam update, applied in place.

    ``params`` may be an :class:`Mlp` (its version is bumped) or a list of arrays.
    """
    net = params if isinstance(params, Mlp) else None
    plist = params.params() if net is not None else list(params)
    if len(plist) != len(grads) or len(plist) != len(state.m):
        raise ShapeError("params, grads and optimizer state have different lengths")
    for p, g, m in zip(plist, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
    if state._scratch is None:
        state._scratch = [np.empty_like(m) for m in state.m]
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v, buf in zip(plist, grads, state.m, state.v, state._scratch):
        # m = b1 m + (1 - b1) g ; v = b2 v + (1 - b2) g^2
        m *= b1
        np.multiply(g, 1.0 - b1, out=buf)
        m += buf
        v *= b2
        np.multiply(g, g, out=buf)
        buf *= 1.0 - b2
        v += buf
        # p -= lr * (m / c1) / (sqrt(v / c2) + eps)
        np.divide(v, c2, out=buf)
        np.sqrt(buf, out=buf)
        buf += state.eps
        np.divide(m, buf, out=buf)
        buf *= state.lr / c1
        p -= buf
    if net is not None:
        net.version += 1


def init_mlp(dims, seed, layer_norm: bool = True) -> Mlp:
    """Build ``dims[0] -> ... -> dims[-1]``; every hidden layer is Dense, LayerNorm, ReLU.

    Weights are drawn uniformly from ``±sqrt(6 / fan_in)``; biases start at 0,
    LayerNorm gains at 1. ``seed`` is an int or a ``numpy.random.Generator``.
    """
    dims = [int(d) for d in dims]
    if len(dims) < 2 or min(dims) < 1:
        raise ShapeError(f"need at least two positive dims, got {dims}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        bound = np.sqrt(6.0 / fan_in)
        layers.append(Dense(rng.uniform(-bound, bound, size=(fan_out, fan_in)), np.zeros(fan_out)))
        if i < len(dims) - 2:
            if layer_norm:
                layers.append(LayerNorm(np.ones(fan_out), np.zeros(fan_out)))
            layers.append(ReLU())
    return Mlp(layers)


# Checkpoint layout (all little-endian):
#   8 bytes   magic b"DISRCNN1"
#   u32       number of layers
#   per layer u8 kind (0 Dense, 1 LayerNorm, 2 ReLU)
#             Dense: u32 out, u32 in | LayerNorm: u32 dim, f64 eps | ReLU: nothing
#   then every parameter of net.params(), row-major f64, in declaration order.
_MAGIC = b"DISRCNN1"


def save_mlp(net: Mlp, path) -> None:
    header = [_MAGIC, struct.pack("<I", len(net.layers))]
    for layer in net.layers:
        if isinstance(layer, Dense):
            header.append(struct.pack("<BII", 0, layer.out_dim, layer.in_dim))
        elif isinstance(layer, LayerNorm):
            header.append(struct.pack("<BId", 1, layer.dim, layer.eps))
        else:
            header.append(struct.pack("<B", 2))
    body = [np.ascontiguousarray(p, dtype="<f8").tobytes() for p in net.params()]
    Path(path).write_bytes(b"".join(header + body))


def load_mlp(path) -> Mlp:
    data = Path(path).read_bytes()
    if data[:8] != _MAGIC:
        raise ValueError(f"{path}: not a network checkpoint")
    (n_layers,) = struct.unpack_from("<I", data, 8)
    off = 12
    specs = []
    for _ in range(n_layers):
        kind = data[off]
        if kind == 0:
            _, out_dim, in_dim = struct.unpack_from("<BII", data, off)
            off += 9
            specs.append(("dense", out_dim, in_dim))
        elif kind == 1:
            _, dim, eps = struct.unpack_from("<BId", data, off)
            off += 13
            specs.append(("ln", dim, eps))
        elif kind == 2:
            off += 1
            specs.append(("relu",))
        else:
            raise ValueError(f"{path}: unknown layer kind {kind}")

    def take(*shape):
        nonlocal off
        n = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(shape)
        off += 8 * n
        return arr.astype(DTYPE)

    layers = []
    for spec in specs:
        if spec[0] == "dense":
            layers.append(Dense(take(spec[1], spec[2]), take(spec[1])))
        elif spec[0] == "ln":
            layers.append(LayerNorm(take(spec[1]), take(spec[1]), spec[2]))
        else:
            layers.append(ReLU())
    if off != len(data):
        raise ValueError(f"{path}: {len(data) - off} trailing bytes")
    return Mlp(layers)
