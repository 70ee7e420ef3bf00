"""Six-channel convolutional classifier over feature grids, in plain numpy.

Each feature family gets its own channel::

    conv -> BN -> ReLU, conv -> BN -> ReLU, maxpool,
    conv -> BN -> ReLU, maxpool,
    conv -> BN -> ReLU, conv -> BN -> ReLU, maxpool

Convolutions use zero "same" padding and pools are 2x2 / stride 2 with
ceiling output size, so a 6 x 7 grid shrinks 6x7 -> 3x4 -> 2x2 -> 1x1 and each
channel emits ``conv_widths[-1]`` values. Channel outputs are concatenated
and fed to a ReLU dense stack ending in a 2-way softmax.

Tensors are (batch, height, width, channels) float64 arrays. Every layer has
a forward function returning its output plus a cache, and a backward function
consuming that cache.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .errors import BatchTooSmallError, LabelError, MissingTraceError, NumericError, ShapeError
from .features import DEPTHS

LAYOUT = ("conv", "conv", "pool", "conv", "pool", "conv", "conv", "pool")
BN_EPS = 1e-5
BN_MOMENTUM = 0.9
PROB_CLAMP = 1e-12
DEFAULT_ALPHA = 1e-4


# -- layers -------------------------------------------------------------------------


def _same_pad(k):
    top = (k - 1) // 2
    return top, k - 1 - top


def _conv_offsets(H, W, k):
    """Yield (ky, kx, output slice, input slice) for kernel taps that touch real input."""
    top, _ = _same_pad(k)
    for ky in range(k):
        dy = ky - top
        r0, r1 = max(0, -dy), min(H, H - dy)
        if r0 >= r1:
            continue
        for kx in range(k):
            dx = kx - top
            c0, c1 = max(0, -dx), min(W, W - dx)
            if c0 >= c1:
                continue
            yield ky, kx, (slice(r0, r1), slice(c0, c1)), (slice(r0 + dy, r1 + dy), slice(c0 + dx, c1 + dx))


def conv2d(x, w, b):
    """Same-padded 2-D cross-correlation: x (B,H,W,C), w (k,k,C,F), b (F,)."""
    if x.ndim != 4 or w.ndim != 4 or w.shape[0] != w.shape[1] or x.shape[3] != w.shape[2]:
        raise ShapeError(f"conv2d: input {x.shape} incompatible with weights {w.shape}")
    if b.shape != (w.shape[3],):
        raise ShapeError(f"conv2d: bias {b.shape} does not match weights {w.shape}")
    B, H, W, C = x.shape
    k, F = w.shape[0], w.shape[3]
    y = np.empty((B, H, W, F))
    y[...] = b
    for ky, kx, (oy, ox), (iy, ix) in _conv_offsets(H, W, k):
        y[:, oy, ox, :] += x[:, iy, ix, :] @ w[ky, kx]
    return y


def conv2d_backward(dy, x, w):
    """Gradients (dx, dw, db) of :func:`conv2d`."""
    B, H, W, C = x.shape
    k, F = w.shape[0], w.shape[3]
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    for ky, kx, (oy, ox), (iy, ix) in _conv_offsets(H, W, k):
        g = dy[:, oy, ox, :]
        dx[:, iy, ix, :] += g @ w[ky, kx].T
        dw[ky, kx] = x[:, iy, ix, :].reshape(-1, C).T @ g.reshape(-1, F)
    return dx, dw, dy.sum(axis=(0, 1, 2))


def pooled_size(n):
    return -(-n // 2)


def maxpool2x2(x):
    """2x2 / stride 2 max pooling with ceiling output size; returns (y, cache)."""
    B, H, W, C = x.shape
    H2, W2 = pooled_size(H), pooled_size(W)
    xp = np.full((B, 2 * H2, 2 * W2, C), -np.inf)
    xp[:, :H, :W] = x
    win = xp.reshape(B, H2, 2, W2, 2, C).transpose(0, 1, 3, 5, 2, 4).reshape(B, H2, W2, C, 4)
    idx = win.argmax(axis=-1)
    y = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return y, (x.shape, idx)


def maxpool2x2_backward(dy, cache):
    (B, H, W, C), idx = cache
    H2, W2 = idx.shape[1:3]
    dwin = np.zeros((B, H2, W2, C, 4))
    np.put_along_axis(dwin, idx[..., None], dy[..., None], axis=-1)
    dx = dwin.reshape(B, H2, W2, C, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(B, 2 * H2, 2 * W2, C)
    return dx[:, :H, :W]


def batchnorm(x, gamma, beta, running_mean, running_var, mode="train", momentum=BN_MOMENTUM, eps=BN_EPS):
    """Per-channel batch normalization over all but the last axis.

    In train mode the running statistics are updated in place.
    """
    axes = tuple(range(x.ndim - 1))
    if mode == "train":
        if x.shape[0] < 2:
            raise BatchTooSmallError("batch normalization in train mode needs a batch of at least 2")
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mean
        running_var *= momentum
        running_var += (1.0 - momentum) * var
    elif mode == "infer":
        mean, var = running_mean, running_var
    else:
        raise ValueError(f"unknown mode {mode!r}")
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    return gamma * xhat + beta, (xhat, inv_std, gamma)


def batchnorm_backward(dy, cache):
    xhat, inv_std, gamma = cache
    axes = tuple(range(dy.ndim - 1))
    m = dy.size // dy.shape[-1]
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    dxhat = dy * gamma
    dx = inv_std / m * (m * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes))
    return dx, dgamma, dbeta


def relu(x):
    return np.maximum(x, 0.0)


def dense(x, w, b, activation="none"):
    if x.shape[-1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ShapeError(f"dense: input {x.shape} incompatible with weights {w.shape} / bias {b.shape}")
    z = x @ w + b
    if activation == "relu":
        return relu(z)
    if activation == "none":
        return z
    raise ValueError(f"unknown activation {activation!r}")


def softmax2(logits):
    """Row-wise softmax with max subtraction."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NumericError("softmax received non-finite logits")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


# -- architecture -------------------------------------------------------------------


@dataclass(frozen=True)
class Architecture:
    input_depths: tuple = DEPTHS
    channel_mask: tuple = (True,) * 6
    conv_widths: tuple = (256, 128, 64, 32, 16)
    dense_widths: tuple = (96, 32, 2)
    filter_size: int = 5
    grid_shape: tuple = (6, 7)

    def __post_init__(self):
        for name in ("input_depths", "channel_mask", "conv_widths", "dense_widths", "grid_shape"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "channel_mask", tuple(bool(c) for c in self.channel_mask))
        if len(self.channel_mask) != len(self.input_depths):
            raise ValueError("channel_mask needs one entry per input family")
        if not any(self.channel_mask):
            raise ValueError("channel_mask must enable at least one channel")
        if len(self.conv_widths) != LAYOUT.count("conv"):
            raise ValueError(f"need {LAYOUT.count('conv')} conv widths")
        if self.dense_widths[-1] != 2:
            raise ValueError("the last dense layer must have width 2")
        if self.filter_size < 1:
            raise ValueError("filter_size must be positive")
        path = self.spatial_path()
        if path[-1] != (1, 1):
            raise ShapeError(f"channel spatial path {path} does not end at 1x1")

    @property
    def active_channels(self):
        return [c for c, on in enumerate(self.channel_mask) if on]

    def spatial_path(self):
        h, w = self.grid_shape
        path = [(h, w)]
        for op in LAYOUT:
            if op == "pool":
                h, w = pooled_size(h), pooled_size(w)
                path.append((h, w))
        return path

    @property
    def channel_width(self):
        return self.conv_widths[-1]

    @property
    def concat_width(self):
        return self.channel_width * len(self.active_channels)

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def _he_uniform(rng, shape, fan_in):
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class GridNet:
    """Parameters and running statistics of the multi-channel network.

    ``params`` is an ordered name -> array mapping in declaration order; BN
    running statistics live in ``buffers``.
    """

    def __init__(self, arch=None, seed=0):
        self.arch = arch or Architecture()
        self.seed = seed
        rng = np.random.default_rng(seed)
        a = self.arch
        k = a.filter_size
        self.params = OrderedDict()
        self.buffers = OrderedDict()
        for c in a.active_channels:
            depth = a.input_depths[c]
            for l, width in enumerate(a.conv_widths):
                self.params[f"c{c}.conv{l}.w"] = _he_uniform(rng, (k, k, depth, width), k * k * depth)
                self.params[f"c{c}.conv{l}.b"] = np.zeros(width)
                self.params[f"c{c}.bn{l}.gamma"] = np.ones(width)
                self.params[f"c{c}.bn{l}.beta"] = np.zeros(width)
                self.buffers[f"c{c}.bn{l}.mean"] = np.zeros(width)
                self.buffers[f"c{c}.bn{l}.var"] = np.ones(width)
                depth = width
        fan_in = a.concat_width
        for l, width in enumerate(a.dense_widths):
            self.params[f"dense{l}.w"] = _he_uniform(rng, (fan_in, width), fan_in)
            self.params[f"dense{l}.b"] = np.zeros(width)
            fan_in = width
        self.check_shapes()

    @property
    def weight_names(self):
        """Parameters subject to L2 regularization (conv and dense kernels)."""
        return [n for n in self.params if n.endswith(".w")]

    def check_shapes(self):
        a = self.arch
        if LAYOUT.count("conv") != 5 or LAYOUT.count("pool") != 3:
            raise ShapeError("a channel needs 5 conv and 3 pooling layers")
        if a.spatial_path()[-1] != (1, 1):
            raise ShapeError(f"channel spatial path {a.spatial_path()} does not end at 1x1")
        if self.params["dense0.w"].shape[0] != a.concat_width:
            raise ShapeError("first dense layer does not match the concatenated channel width")

    def shape_report(self):
        a = self.arch
        return {
            "spatial_path": [f"{h}x{w}" for h, w in a.spatial_path()],
            "channel_flatten": a.channel_width,
            "concat_width": a.concat_width,
            "dense_widths": list(a.dense_widths),
            "n_params": int(sum(p.size for p in self.params.values())),
        }

    def copy(self):
        other = GridNet.__new__(GridNet)
        other.arch = self.arch
        other.seed = self.seed
        other.params = OrderedDict((n, p.copy()) for n, p in self.params.items())
        other.buffers = OrderedDict((n, b.copy()) for n, b in self.buffers.items())
        return other

    def forward(self, grids, mode="infer", debug=False):
        return model_forward(self, grids, mode, debug)


# -- model forward / loss / backward -----------------------------------------------


@dataclass
class Trace:
    mode: str
    model: GridNet
    channel_caches: dict = field(default_factory=dict)
    concat: np.ndarray = None
    dense_inputs: list = field(default_factory=list)
    dense_preact: list = field(default_factory=list)
    probs: np.ndarray = None


def _check_finite(name, x, debug):
    if debug and not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite values after {name}")


def _channel_forward(model, c, x, mode, debug, caches):
    p, bufs = model.params, model.buffers
    l = 0
    h = x
    for op in LAYOUT:
        if op == "conv":
            w, b = p[f"c{c}.conv{l}.w"], p[f"c{c}.conv{l}.b"]
            z = conv2d(h, w, b)
            zn, bn_cache = batchnorm(
                z, p[f"c{c}.bn{l}.gamma"], p[f"c{c}.bn{l}.beta"],
                bufs[f"c{c}.bn{l}.mean"], bufs[f"c{c}.bn{l}.var"], mode,
            )
            if caches is not None:
                caches.append(("conv", l, h, bn_cache, zn))
            h = relu(zn)
            _check_finite(f"channel {c} conv {l}", h, debug)
            l += 1
        else:
            h, pool_cache = maxpool2x2(h)
            if caches is not None:
                caches.append(("pool", pool_cache))
    return h.reshape(h.shape[0], -1)


def model_forward(model, grids, mode="infer", debug=False):
    """Forward pass; ``grids`` holds one (B, 6, 7, d) array per family.

    Entries for disabled channels are ignored (may be None). Returns the
    (B, 2) softmax output and a Trace usable by :func:`backward` when
    ``mode="train"``.
    """
    a = model.arch
    if len(grids) != len(a.channel_mask):
        raise ShapeError(f"expected {len(a.channel_mask)} grids, got {len(grids)}")
    trace = Trace(mode, model)
    outs = []
    batch = None
    for c in a.active_channels:
        x = np.asarray(grids[c], dtype=np.float64)
        want = (*a.grid_shape, a.input_depths[c])
        if x.ndim != 4 or x.shape[1:] != want:
            raise ShapeError(f"channel {c}: grid shape {x.shape[1:]} does not match {want}")
        if batch is None:
            batch = x.shape[0]
        elif x.shape[0] != batch:
            raise ShapeError("grids disagree on batch size")
        caches = [] if mode == "train" else None
        outs.append(_channel_forward(model, c, x, mode, debug, caches))
        if caches is not None:
            trace.channel_caches[c] = caches
    h = np.concatenate(outs, axis=1)
    trace.concat = h
    n_dense = len(a.dense_widths)
    for l in range(n_dense):
        trace.dense_inputs.append(h)
        z = dense(h, model.params[f"dense{l}.w"], model.params[f"dense{l}.b"])
        trace.dense_preact.append(z)
        h = relu(z) if l < n_dense - 1 else z
        _check_finite(f"dense {l}", h, debug)
    probs = softmax2(h)
    trace.probs = probs
    return probs, trace


@dataclass(frozen=True)
class LossTerms:
    ce: float
    se: float
    reg: float

    @property
    def total(self):
        return self.ce + self.se + self.reg


def _check_one_hot(labels, n):
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape != (n, 2) or not np.all((labels == 0) | (labels == 1)) or not np.all(labels.sum(axis=1) == 1):
        raise LabelError(f"labels must be a ({n}, 2) one-hot array")
    return labels


def compute_loss(probs, labels, model, alpha=DEFAULT_ALPHA):
    """Cross-entropy + squared error summed over the batch, plus alpha * ||W||^2."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise ShapeError("compute_loss needs a non-empty (B, 2) probability batch")
    y_true = _check_one_hot(labels, probs.shape[0])
    ce = float(-(y_true * np.log(np.clip(probs, PROB_CLAMP, 1.0))).sum())
    se = float(((probs - y_true) ** 2).sum())
    reg = alpha * float(sum((model.params[n] ** 2).sum() for n in model.weight_names))
    return LossTerms(ce, se, reg)


def logit_grad(probs, labels):
    """d(ce + se) / d(logits) through the softmax.

    The clamp makes ce flat where a probability is below PROB_CLAMP.
    """
    dce = np.where(probs > PROB_CLAMP, -labels / np.maximum(probs, PROB_CLAMP), 0.0)
    g_y = dce + 2.0 * (probs - labels)
    return probs * (g_y - (g_y * probs).sum(axis=1, keepdims=True))


def backward(trace, labels, alpha=DEFAULT_ALPHA):
    """Gradient of the total loss for every parameter, keyed like ``params``."""
    if trace is None or trace.mode != "train":
        raise MissingTraceError("backward needs the trace of a train-mode forward pass")
    model = trace.model
    a = model.arch
    p = model.params
    y = trace.probs
    y_true = _check_one_hot(labels, y.shape[0])
    grads = OrderedDict((n, np.zeros_like(v)) for n, v in p.items())

    g = logit_grad(y, y_true)

    for l in reversed(range(len(a.dense_widths))):
        if l < len(a.dense_widths) - 1:
            g = g * (trace.dense_preact[l] > 0)
        x = trace.dense_inputs[l]
        grads[f"dense{l}.w"] = x.T @ g
        grads[f"dense{l}.b"] = g.sum(axis=0)
        g = g @ p[f"dense{l}.w"].T

    width = a.channel_width
    for pos, c in enumerate(a.active_channels):
        gc = g[:, pos * width : (pos + 1) * width].reshape(-1, 1, 1, width)
        for entry in reversed(trace.channel_caches[c]):
            if entry[0] == "pool":
                gc = maxpool2x2_backward(gc, entry[1])
                continue
            _, l, x_in, bn_cache, zn = entry
            gc = gc * (zn > 0)
            gc, dgamma, dbeta = batchnorm_backward(gc, bn_cache)
            grads[f"c{c}.bn{l}.gamma"] = dgamma
            grads[f"c{c}.bn{l}.beta"] = dbeta
            gc, dw, db = conv2d_backward(gc, x_in, p[f"c{c}.conv{l}.w"])
            grads[f"c{c}.conv{l}.w"] = dw
            grads[f"c{c}.conv{l}.b"] = db

    for n in model.weight_names:
        grads[n] += 2.0 * alpha * p[n]
    return grads
