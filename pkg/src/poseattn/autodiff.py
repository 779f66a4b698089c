"""Reverse-mode automatic differentiation on numpy arrays.

Every differentiable operation returns a new :class:`Tensor` that remembers its
input tensors and a closure computing their gradient contributions.  The graph
doubles as the recording tape: tensors carry a monotonically increasing
creation id, and ``backward()`` visits the reachable nodes in decreasing id
order, which is exactly the reverse of forward execution order.  Gradients are
accumulated with ``+=`` so fan-out (a tensor consumed by several ops) is
handled naturally.

Plain tensors default to ``requires_grad=False`` and :class:`Parameter` to
``True``; op outputs inherit the flag from their inputs.  Backward skips the
gradient work for tensors that do not require it, which in particular avoids
the input-gradient scatter of the first convolution when training on constant
image batches.

Images follow the channel-first CHW convention.  All image ops accept an
optional leading batch axis, i.e. both ``(C, H, W)`` and ``(B, C, H, W)``
inputs work and the output keeps the same rank.

Float32 is the default dtype; pass float64 arrays (or ``dtype=np.float64``)
when doing finite-difference gradient verification.
"""

from __future__ import annotations

import itertools

import numpy as np

__all__ = [
    "Tensor",
    "Parameter",
    "relu",
    "sigmoid",
    "conv2d",
    "maxpool2",
    "global_avg_pool",
    "dense",
    "channel_reduce",
    "stack_channels",
    "broadcast_mul",
    "gather_rows",
]

_uid_counter = itertools.count()


def _as_float_array(data, dtype=None) -> np.ndarray:
    arr = np.asarray(data)
    if dtype is not None:
        return arr.astype(dtype, copy=False)
    if not np.issubdtype(arr.dtype, np.floating):
        return arr.astype(np.float32)
    return arr


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A numpy array plus the bookkeeping needed for reverse-mode autodiff."""

    __slots__ = ("data", "grad", "requires_grad", "_prev", "_backward", "_uid")

    # make `ndarray <op> Tensor` fall through to our reflected dunders
    __array_ufunc__ = None

    def __init__(self, data, dtype=None):
        arr = _as_float_array(data, dtype)
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor data must be finite (got NaN or Inf)")
        self._init(arr, ())

    def _init(self, arr: np.ndarray, prev: tuple) -> None:
        self.data = arr
        self.grad = None
        self.requires_grad = any(p.requires_grad for p in prev)
        self._prev = prev
        self._backward = None
        self._uid = next(_uid_counter)

    @classmethod
    def _from_op(cls, arr: np.ndarray, prev: tuple) -> "Tensor":
        out = cls.__new__(cls)
        out._init(arr, prev)
        return out

    # -- basic properties ----------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def __float__(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"

    # -- graph machinery -----------------------------------------------------

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            # copy: the incoming array may alias a consumer's grad buffer
            self.grad = np.array(grad, dtype=self.data.dtype)
        else:
            self.grad += grad

    def backward(self) -> None:
        """Backpropagate from this scalar through the recorded graph.

        Nodes are visited in decreasing creation order, i.e. the exact
        reverse of the order the forward ops executed in.
        """
        if self.data.size != 1:
            raise ValueError(
                f"backward() requires a scalar tensor, got shape {self.data.shape}"
            )
        nodes = []
        seen = set()
        stack = [self]
        while stack:
            t = stack.pop()
            if id(t) in seen:
                continue
            seen.add(id(t))
            nodes.append(t)
            stack.extend(t._prev)
        nodes.sort(key=lambda t: t._uid, reverse=True)
        self._accumulate(np.ones_like(self.data))
        for t in nodes:
            if t._backward is not None and t.requires_grad:
                t._backward(t.grad)

    # -- elementwise arithmetic ----------------------------------------------

    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor._from_op(np.asarray(other, dtype=self.data.dtype), ())

    def __add__(self, other) -> "Tensor":
        other = self._coerce(other)
        out = Tensor._from_op(self.data + other.data, (self, other))

        # closures take the output gradient as an argument rather than closing
        # over the output tensor: a captured output would form a reference
        # cycle (out -> closure -> out) and keep whole batch graphs alive
        # until a gen-2 gc pass
        def _bw(g, a=self, b=other):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g, b.data.shape))

        out._backward = _bw
        return out

    __radd__ = __add__

    def __mul__(self, other) -> "Tensor":
        other = self._coerce(other)
        out = Tensor._from_op(self.data * other.data, (self, other))

        def _bw(g, a=self, b=other):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.data, b.data.shape))

        out._backward = _bw
        return out

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return self * -1.0

    def __sub__(self, other) -> "Tensor":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Tensor":
        return self._coerce(other) + (-self)

    # -- elementwise functions -----------------------------------------------

    def log(self) -> "Tensor":
        out = Tensor._from_op(np.log(self.data), (self,))

        def _bw(g, x=self):
            x._accumulate(g / x.data)

        out._backward = _bw
        return out

    def clip(self, lo: float, hi: float) -> "Tensor":
        out = Tensor._from_op(np.clip(self.data, lo, hi), (self,))
        passthrough = (self.data >= lo) & (self.data <= hi)

        def _bw(g, x=self, mask=passthrough):
            x._accumulate(g * mask)

        out._backward = _bw
        return out

    def relu(self) -> "Tensor":
        out = Tensor._from_op(np.maximum(self.data, 0), (self,))
        positive = self.data > 0

        def _bw(g, x=self, mask=positive):
            x._accumulate(g * mask)

        out._backward = _bw
        return out

    def sigmoid(self) -> "Tensor":
        """Logistic function, numerically safe for |x| up to at least 1e4."""
        x = self.data
        val = np.empty_like(x)
        pos = x >= 0
        val[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        val[~pos] = ex / (1.0 + ex)
        out = Tensor._from_op(val, (self,))

        def _bw(g, x=self, v=val):
            x._accumulate(g * v * (1.0 - v))

        out._backward = _bw
        return out

    # -- reductions and reshapes ----------------------------------------------

    def sum(self) -> "Tensor":
        out = Tensor._from_op(self.data.sum(), (self,))

        def _bw(g, x=self):
            x._accumulate(np.broadcast_to(g, x.data.shape))

        out._backward = _bw
        return out

    def mean(self) -> "Tensor":
        out = Tensor._from_op(self.data.mean(), (self,))

        def _bw(g, x=self):
            x._accumulate(np.broadcast_to(g / x.data.size, x.data.shape))

        out._backward = _bw
        return out

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = Tensor._from_op(self.data.reshape(shape), (self,))

        def _bw(g, x=self):
            x._accumulate(g.reshape(x.data.shape))

        out._backward = _bw
        return out


class Parameter(Tensor):
    """A trainable tensor: named, always carrying a gradient and Adam state."""

    __slots__ = ("name", "adam_m", "adam_v", "step_count")

    def __init__(self, data, name: str, dtype=None):
        super().__init__(data, dtype)
        self.name = name
        self.requires_grad = True
        self.grad = np.zeros_like(self.data)
        self.adam_m = np.zeros_like(self.data)
        self.adam_v = np.zeros_like(self.data)
        self.step_count = 0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.data.shape})"


# -- free-function aliases for the elementwise activations --------------------


def relu(x: Tensor) -> Tensor:
    """max(x, 0), elementwise."""
    return x.relu()


def sigmoid(x: Tensor) -> Tensor:
    """1 / (1 + exp(-x)), elementwise, overflow-safe."""
    return x.sigmoid()


# -- image ops (CHW, optional leading batch axis) ------------------------------


def _promote_image(x: Tensor, ndim: int, op: str):
    """Return (4d-view array, had_batch) for an image op input."""
    if x.ndim == ndim:
        return x.data[None], False
    if x.ndim == ndim + 1:
        return x.data, True
    raise ValueError(
        f"{op} expects a {ndim}-d input or {ndim + 1}-d batch, got shape {x.shape}"
    )


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """2-d cross-correlation with zero padding.

    ``x`` is ``(C, H, W)`` or ``(B, C, H, W)``; ``weight`` is
    ``(C_out, C, K, K)`` with odd ``K``; ``bias`` is ``(C_out,)`` or None.
    Output spatial size is ``(H + 2*padding - K) // stride + 1``.
    """
    w = weight.data
    if w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise ValueError(f"conv2d weight must be (C_out, C_in, K, K), got {w.shape}")
    k = w.shape[2]
    if k % 2 == 0:
        raise ValueError(f"conv2d kernel size must be odd, got {k}")
    if stride < 1:
        raise ValueError(f"conv2d stride must be >= 1, got {stride}")
    if padding < 0:
        raise ValueError(f"conv2d padding must be >= 0, got {padding}")
    xd, batched = _promote_image(x, 3, "conv2d")
    b_, c, h, wd = xd.shape
    if c != w.shape[1]:
        raise ValueError(
            f"conv2d channel mismatch: input has {c}, weight expects {w.shape[1]}"
        )
    if h + 2 * padding < k or wd + 2 * padding < k:
        raise ValueError(
            f"conv2d kernel {k}x{k} larger than padded input {h + 2 * padding}x{wd + 2 * padding}"
        )
    if bias is not None and bias.data.shape != (w.shape[0],):
        raise ValueError(f"conv2d bias must have shape ({w.shape[0]},), got {bias.data.shape}")

    # im2col: materialize the patch matrix once and reuse it in backward, so
    # forward and both gradient contractions are plain GEMMs.
    xp = np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    win = win[:, :, ::stride, ::stride, :, :]
    b_, _, h_out, w_out = win.shape[:4]
    cols = np.ascontiguousarray(win.transpose(1, 4, 5, 0, 2, 3)).reshape(c * k * k, -1)
    o = w.shape[0]
    wmat = w.reshape(o, c * k * k)
    out_mat = wmat @ cols
    if bias is not None:
        out_mat = out_mat + bias.data[:, None]
    val = np.ascontiguousarray(out_mat.reshape(o, b_, h_out, w_out).transpose(1, 0, 2, 3))
    if not batched:
        val = val[0]

    prev = (x, weight) if bias is None else (x, weight, bias)
    out = Tensor._from_op(val, prev)

    def _bw(g, x=x, weight=weight, bias=bias, cols=cols, batched=batched,
            k=k, c=c, o=o, stride=stride, padding=padding, h=h, wd=wd,
            b_=b_, h_out=h_out, w_out=w_out, xp_shape=xp.shape):
        g = g if batched else g[None]
        if bias is not None and bias.requires_grad:
            bias._accumulate(g.sum(axis=(0, 2, 3)))
        gmat = np.ascontiguousarray(g.transpose(1, 0, 2, 3)).reshape(o, -1)
        if weight.requires_grad:
            weight._accumulate((gmat @ cols.T).reshape(weight.data.shape))
        if x.requires_grad:
            dcols = (weight.data.reshape(o, c * k * k).T @ gmat).reshape(
                c, k, k, b_, h_out, w_out)
            gxp = np.zeros(xp_shape, dtype=g.dtype)
            for u in range(k):
                for v in range(k):
                    gxp[:, :, u:u + stride * h_out:stride,
                        v:v + stride * w_out:stride] += dcols[:, u, v].transpose(1, 0, 2, 3)
            gx = gxp[:, :, padding:padding + h, padding:padding + wd]
            x._accumulate(gx if batched else gx[0])

    out._backward = _bw
    return out


def maxpool2(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; ties go to the first cell in scan order."""
    xd, batched = _promote_image(x, 3, "maxpool2")
    b_, c, h, w = xd.shape
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2 requires even spatial dims, got {h}x{w}")
    h2, w2 = h // 2, w // 2
    xf = xd.reshape(b_, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b_, c, h2, w2, 4)
    idx = xf.argmax(axis=4)
    val = np.take_along_axis(xf, idx[..., None], axis=4)[..., 0]
    out = Tensor._from_op(val if batched else val[0], (x,))

    def _bw(g, x=x, idx=idx, batched=batched, b_=b_, c=c, h2=h2, w2=w2):
        g = g if batched else g[None]
        gf = np.zeros((b_, c, h2, w2, 4), dtype=g.dtype)
        np.put_along_axis(gf, idx[..., None], g[..., None], axis=4)
        gx = gf.reshape(b_, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b_, c, 2 * h2, 2 * w2)
        x._accumulate(gx if batched else gx[0])

    out._backward = _bw
    return out


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the two spatial axes: (..., C, H, W) -> (..., C)."""
    if x.ndim not in (3, 4):
        raise ValueError(f"global_avg_pool expects 3-d or 4-d input, got shape {x.shape}")
    h, w = x.shape[-2], x.shape[-1]
    out = Tensor._from_op(x.data.mean(axis=(-2, -1)), (x,))

    def _bw(g, x=x, scale=1.0 / (h * w)):
        x._accumulate(np.broadcast_to((g * scale)[..., None, None], x.data.shape))

    out._backward = _bw
    return out


def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map: (D,) -> (O,) or (B, D) -> (B, O) with weight (O, D)."""
    w = weight.data
    if w.ndim != 2:
        raise ValueError(f"dense weight must be 2-d (O, D), got shape {w.shape}")
    if x.ndim not in (1, 2) or x.shape[-1] != w.shape[1]:
        raise ValueError(
            f"dense input must be (D,) or (B, D) with D={w.shape[1]}, got shape {x.shape}"
        )
    if bias is not None and bias.data.shape != (w.shape[0],):
        raise ValueError(f"dense bias must have shape ({w.shape[0]},), got {bias.data.shape}")
    val = x.data @ w.T
    if bias is not None:
        val = val + bias.data
    prev = (x, weight) if bias is None else (x, weight, bias)
    out = Tensor._from_op(val, prev)

    def _bw(g, x=x, weight=weight, bias=bias):
        if x.requires_grad:
            x._accumulate(g @ weight.data)
        if weight.requires_grad:
            weight._accumulate(np.outer(g, x.data) if x.ndim == 1 else g.T @ x.data)
        if bias is not None and bias.requires_grad:
            bias._accumulate(g if x.ndim == 1 else g.sum(axis=0))

    out._backward = _bw
    return out


def channel_reduce(x: Tensor, mode: str) -> Tensor:
    """Reduce the channel axis to 1: (..., C, H, W) -> (..., 1, H, W).

    ``mode`` is "max" (gradient routed to the first maximal channel) or "mean".
    """
    if mode not in ("max", "mean"):
        raise ValueError(f"channel_reduce mode must be 'max' or 'mean', got {mode!r}")
    if x.ndim not in (3, 4):
        raise ValueError(f"channel_reduce expects 3-d or 4-d input, got shape {x.shape}")
    axis = x.ndim - 3
    if mode == "max":
        idx = x.data.argmax(axis=axis)
        out = Tensor._from_op(x.data.max(axis=axis, keepdims=True), (x,))

        def _bw(g, x=x, idx=idx, axis=axis):
            gx = np.zeros_like(x.data)
            np.put_along_axis(gx, np.expand_dims(idx, axis), g, axis=axis)
            x._accumulate(gx)

    else:
        out = Tensor._from_op(x.data.mean(axis=axis, keepdims=True), (x,))

        def _bw(g, x=x, c=x.shape[axis]):
            x._accumulate(np.broadcast_to(g / c, x.data.shape))

    out._backward = _bw
    return out


def stack_channels(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two single-channel maps: (..., 1, H, W) x2 -> (..., 2, H, W)."""
    if a.shape != b.shape:
        raise ValueError(f"stack_channels shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim not in (3, 4) or a.shape[-3] != 1:
        raise ValueError(f"stack_channels expects single-channel maps, got shape {a.shape}")
    axis = a.ndim - 3
    out = Tensor._from_op(np.concatenate((a.data, b.data), axis=axis), (a, b))

    def _bw(g, a=a, b=b, axis=axis):
        ga, gb = np.split(g, 2, axis=axis)
        if a.requires_grad:
            a._accumulate(ga)
        if b.requires_grad:
            b._accumulate(gb)

    out._backward = _bw
    return out


def broadcast_mul(x: Tensor, mask: Tensor) -> Tensor:
    """Gate features by a single-channel map: (..., C, H, W) * (..., 1, H, W)."""
    if x.ndim != mask.ndim or mask.shape[-3] != 1 or x.shape[-2:] != mask.shape[-2:] \
            or x.shape[:-3] != mask.shape[:-3]:
        raise ValueError(
            f"broadcast_mul expects mask (..., 1, H, W) matching input {x.shape}, got {mask.shape}"
        )
    axis = x.ndim - 3
    out = Tensor._from_op(x.data * mask.data, (x, mask))

    def _bw(g, x=x, mask=mask, axis=axis):
        if x.requires_grad:
            x._accumulate(g * mask.data)
        if mask.requires_grad:
            mask._accumulate((g * x.data).sum(axis=axis, keepdims=True))

    out._backward = _bw
    return out


def gather_rows(x: Tensor, indices) -> Tensor:
    """Select rows along the first axis; gradient scatters back additively."""
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise ValueError("gather_rows needs a non-empty 1-d index list")
    if idx.min() < 0 or idx.max() >= x.shape[0]:
        raise ValueError(f"gather_rows index out of range for first axis of {x.shape}")
    out = Tensor._from_op(x.data[idx], (x,))

    def _bw(g, x=x, idx=idx):
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        x._accumulate(gx)

    out._backward = _bw
    return out
