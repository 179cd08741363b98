"""Minimal reverse-mode autodiff over dense float64 numpy arrays.

Tape-based: every op returns a `Tensor` holding its value, its parents and
a closure that scatters the incoming gradient back to them.  `backward()`
runs the closures in reverse topological order.  Only the primitives needed
by the agents in this project are provided.
"""

from __future__ import annotations

import numpy as np

from .kernels import conv2d_backward, conv2d_forward


class ShapeError(ValueError):
    """Raised when an op receives operands of incompatible shapes."""


class NonFiniteError(FloatingPointError):
    """Raised when a forward value, loss or gradient is NaN/Inf."""


class Tensor:
    """A node in the computation tape.

    `requires_grad` marks trainable leaves; intermediate nodes track
    gradients whenever any parent does.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None,
                 name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.grad = None
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    # -- graph traversal ---------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise ShapeError(
                f"backward() needs a scalar loss, got shape {self.data.shape}")
        topo, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accumulate(self, g):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def check_finite(self, what="tensor"):
        if not np.all(np.isfinite(self.data)):
            name = self.name or what
            raise NonFiniteError(f"non-finite values in {name}")
        return self

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    """Sum `g` down to `shape` (reverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- arithmetic ------------------------------------------------------------

def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data + b.data, _parents=(a, b))

    def _bw(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))
    out._backward = _bw
    return out


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data * b.data, _parents=(a, b))

    def _bw(g):
        a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        b._accumulate(_unbroadcast(g * a.data, b.data.shape))
    out._backward = _bw
    return out


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape[-1] != b.data.shape[-2 if b.data.ndim > 1 else 0]:
        raise ShapeError(
            f"matmul: {a.data.shape} x {b.data.shape} (inner dims differ)")
    out = Tensor(a.data @ b.data, _parents=(a, b))

    def _bw(g):
        ga = g @ np.swapaxes(b.data, -1, -2) if b.data.ndim > 1 else np.outer(g, b.data)
        gb = np.swapaxes(a.data, -1, -2) @ g if a.data.ndim > 1 else np.outer(a.data, g)
        a._accumulate(_unbroadcast(np.asarray(ga), a.data.shape))
        b._accumulate(_unbroadcast(np.asarray(gb), b.data.shape))
    out._backward = _bw
    return out


def concat(tensors, axis=-1):
    tensors = [_as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis),
                 _parents=tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def _bw(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            t._accumulate(piece)
    out._backward = _bw
    return out


def sum_along(a, axis):
    """Summation over one axis (the set-pooling primitive)."""
    a = _as_tensor(a)
    out = Tensor(a.data.sum(axis=axis), _parents=(a,))

    def _bw(g):
        a._accumulate(np.expand_dims(g, axis) * np.ones_like(a.data))
    out._backward = _bw
    return out


def reshape(a, shape):
    a = _as_tensor(a)
    out = Tensor(a.data.reshape(shape), _parents=(a,))

    def _bw(g):
        a._accumulate(g.reshape(a.data.shape))
    out._backward = _bw
    return out


# -- activations -----------------------------------------------------------

def sigmoid(a):
    a = _as_tensor(a)
    v = np.empty_like(a.data)
    pos = a.data >= 0
    v[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ex = np.exp(a.data[~pos])
    v[~pos] = ex / (1.0 + ex)
    out = Tensor(v, _parents=(a,))

    def _bw(g):
        a._accumulate(g * v * (1.0 - v))
    out._backward = _bw
    return out


def tanh(a):
    a = _as_tensor(a)
    v = np.tanh(a.data)
    out = Tensor(v, _parents=(a,))

    def _bw(g):
        a._accumulate(g * (1.0 - v * v))
    out._backward = _bw
    return out


def relu(a):
    a = _as_tensor(a)
    out = Tensor(np.maximum(a.data, 0.0), _parents=(a,))

    def _bw(g):
        a._accumulate(g * (a.data > 0))
    out._backward = _bw
    return out


def softmax(a, axis=-1):
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    v = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(v, _parents=(a,))

    def _bw(g):
        dot = (g * v).sum(axis=axis, keepdims=True)
        a._accumulate(v * (g - dot))
    out._backward = _bw
    return out


def log_softmax(a, axis=-1):
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    v = shifted - lse
    out = Tensor(v, _parents=(a,))

    def _bw(g):
        p = np.exp(v)
        a._accumulate(g - p * g.sum(axis=axis, keepdims=True))
    out._backward = _bw
    return out


# -- structured ops --------------------------------------------------------

def embedding(table, indices):
    """Row lookup: `indices` is an int array, rows come from `table`."""
    table = _as_tensor(table)
    idx = np.asarray(indices, dtype=np.intp)
    out = Tensor(table.data[idx], _parents=(table,))

    def _bw(g):
        if not table.requires_grad:
            return
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        table._accumulate(gt)
    out._backward = _bw
    return out


def sigmoid_attention_pool(e, q):
    """Fused pooling round of the set encoder.

    e: (n, t, d) token embeddings, q: (n, d) query.  Computes per-token
    scores e.q, squashes them through a sigmoid and returns the weighted
    sum over tokens (n, d).  Fused so the (n, t, d) intermediates are built
    once per round.
    """
    e, q = _as_tensor(e), _as_tensor(q)
    s = np.einsum("ntd,nd->nt", e.data, q.data)
    a = np.empty_like(s)
    pos = s >= 0
    a[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    ex = np.exp(s[~pos])
    a[~pos] = ex / (1.0 + ex)
    pooled = np.einsum("nt,ntd->nd", a, e.data)
    out = Tensor(pooled, _parents=(e, q))

    def _bw(g):
        ga = np.einsum("nd,ntd->nt", g, e.data)
        gs = ga * a * (1.0 - a)
        ge = a[:, :, None] * g[:, None, :] + gs[:, :, None] * q.data[:, None, :]
        gq = np.einsum("nt,ntd->nd", gs, e.data)
        e._accumulate(ge)
        q._accumulate(gq)
    out._backward = _bw
    return out


def conv2d(x, w):
    """Valid 2-D convolution: x (N,C,H,W), w (F,C,kh,kw)."""
    x, w = _as_tensor(x), _as_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4 or x.data.shape[1] != w.data.shape[1]:
        raise ShapeError(
            f"conv2d: input {x.data.shape} vs kernel {w.data.shape}")
    out = Tensor(conv2d_forward(x.data, w.data), _parents=(x, w))

    def _bw(g):
        gx, gw = conv2d_backward(x.data, w.data, np.ascontiguousarray(g))
        x._accumulate(gx)
        w._accumulate(gw)
    out._backward = _bw
    return out


def avg_pool2(x):
    """2x2 average pooling with stride 2; H and W must be even."""
    x = _as_tensor(x)
    n, c, h, w = x.data.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avg_pool2: odd spatial dims {x.data.shape}")
    v = x.data.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
    out = Tensor(v, _parents=(x,))

    def _bw(g):
        gx = np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) / 4.0
        x._accumulate(gx)
    out._backward = _bw
    return out


def cross_entropy(probs, targets):
    """Mean negative log-probability of the target indices.

    `probs` is a (batch, k) probability tensor (rows sum to 1 within 1e-6);
    `targets` an int array of indices into the last axis.
    """
    probs = _as_tensor(probs)
    p = np.atleast_2d(probs.data)
    idx = np.atleast_1d(np.asarray(targets, dtype=np.intp))
    k = p.shape[-1]
    if np.any(idx < 0) or np.any(idx >= k):
        raise IndexError(f"cross_entropy: target out of range 0..{k - 1}")
    if not np.allclose(p.sum(axis=-1), 1.0, atol=1e-6):
        raise ValueError("cross_entropy: rows do not sum to 1")
    picked = p[np.arange(p.shape[0]), idx]
    out = Tensor(-np.log(picked).mean(), _parents=(probs,))

    def _bw(g):
        gp = np.zeros_like(p)
        gp[np.arange(p.shape[0]), idx] = -g / (picked * p.shape[0])
        probs._accumulate(gp.reshape(probs.data.shape))
    out._backward = _bw
    return out


def nll_from_logits(logits, targets):
    """Mean negative log-likelihood of target indices, fused with softmax
    for numerical stability (gradient: softmax - one-hot)."""
    logits = _as_tensor(logits)
    idx = np.atleast_1d(np.asarray(targets, dtype=np.intp))
    lp = log_softmax(logits, axis=-1)
    flat = np.atleast_2d(lp.data)
    picked = flat[np.arange(flat.shape[0]), idx]
    out = Tensor(-picked.mean(), _parents=(lp,))

    def _bw(g):
        gl = np.zeros_like(flat)
        gl[np.arange(flat.shape[0]), idx] = -g / flat.shape[0]
        lp._accumulate(gl.reshape(lp.data.shape))
    out._backward = _bw
    return out


def gumbel_softmax(logits, temperature, hard, rng=None, noise=None):
    """Gumbel-softmax relaxation over the last axis.

    Soft mode returns the relaxed sample.  Hard mode forwards an exact
    one-hot at the argmax while routing gradients through the soft sample
    (straight-through).  `noise` overrides the sampled Gumbel noise (test
    hook; pass 0 for the deterministic softmax limit).
    """
    logits = _as_tensor(logits)
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if noise is None:
        if rng is None:
            raise ValueError("gumbel_softmax needs an rng when noise is not given")
        u = rng.random(logits.data.shape)
        noise = -np.log(-np.log(u + 1e-20) + 1e-20)
    perturbed = mul(add(logits, Tensor(np.broadcast_to(noise, logits.data.shape))),
                    Tensor(1.0 / temperature))
    soft = softmax(perturbed, axis=-1)
    indices = np.argmax(soft.data, axis=-1)
    if not hard:
        return soft, indices
    onehot = np.zeros_like(soft.data)
    np.put_along_axis(onehot, indices[..., None], 1.0, axis=-1)
    out = Tensor(onehot, _parents=(soft,))

    def _bw(g):
        soft._accumulate(g)
    out._backward = _bw
    return out, indices


# -- optimizer -------------------------------------------------------------

class SGD:
    """Plain stochastic gradient descent over a list of parameter tensors.

    `clip_norm` rescales the global gradient norm when it exceeds the
    bound, which keeps the occasional huge Gumbel-channel gradient from
    blowing up a run.
    """

    def __init__(self, params, lr, clip_norm=None):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.clip_norm = clip_norm
        self.step_count = 0

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def _clip(self):
        if not self.clip_norm:
            return
        total = np.sqrt(sum(float(np.sum(p.grad * p.grad))
                            for p in self.params if p.grad is not None))
        if total > self.clip_norm:
            scale = self.clip_norm / total
            for p in self.params:
                if p.grad is not None:
                    p.grad *= scale

    def step(self):
        self._clip()
        for p in self.params:
            if p.grad is None:
                continue
            if p.grad.shape != p.data.shape:
                raise ShapeError(
                    f"gradient shape {p.grad.shape} != parameter shape "
                    f"{p.data.shape} for {p.name or 'parameter'}")
            if not np.all(np.isfinite(p.grad)):
                raise NonFiniteError(
                    f"non-finite gradient for {p.name or 'parameter'}")
            p.data -= self.lr * p.grad
        self.step_count += 1
