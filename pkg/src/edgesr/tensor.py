"""Dense N,C,H,W tensors with reverse-mode differentiation.

Every op that touches a tensor with ``requires_grad`` records a
:class:`Node` carrying a monotonically increasing sequence number.  The
backward pass collects the nodes reachable from the loss into a
:class:`Tape` and replays them in exact reverse execution order.
"""

from __future__ import annotations

import contextlib
import itertools
import threading
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

_state = threading.local()
_seq = itertools.count()


def default_dtype() -> np.dtype:
    return getattr(_state, "dtype", np.dtype(np.float32))


def grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextlib.contextmanager
def precision(dtype) -> Iterator[None]:
    """Temporarily change the dtype new tensors are created with."""
    prev = default_dtype()
    _state.dtype = np.dtype(dtype)
    try:
        yield
    finally:
        _state.dtype = prev


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    prev = grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


class Node:
    """One recorded differentiable op."""

    __slots__ = ("name", "parents", "backward_fn", "seq", "released")

    def __init__(self, name: str, parents: Sequence["Tensor"], backward_fn: Callable):
        self.name = name
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.seq = next(_seq)
        self.released = False


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None, _node: Optional[Node] = None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=dtype or default_dtype(), order="C")
        if self.data.ndim > 4:
            raise ValueError(f"tensors have at most 4 axes, got shape {self.data.shape}")
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._node = _node

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def __len__(self) -> int:
        return len(self.data)

    # -- operators (implemented in functional) ------------------------------
    def __add__(self, other):
        from . import functional as F
        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import functional as F
        return F.sub(self, other)

    def __rsub__(self, other):
        from . import functional as F
        return F.sub(other, self)

    def __mul__(self, other):
        from . import functional as F
        return F.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import functional as F
        return F.div(self, other)

    def __neg__(self):
        from . import functional as F
        return F.mul(self, -1.0)

    def __pow__(self, exponent: float):
        from . import functional as F
        return F.power(self, exponent)

    def sum(self):
        from . import functional as F
        return F.sum(self)

    def mean(self):
        from . import functional as F
        return F.mean(self)

    def reshape(self, *shape):
        from . import functional as F
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def backward(self, retain_graph: bool = False) -> None:
        backward(self, retain_graph=retain_graph)


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def make_result(name: str, data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    """Wrap an op result; record a node if any parent needs a gradient."""
    if not np.isfinite(data).all():
        raise FloatingPointError(f"{name} produced non-finite values")
    needs = grad_enabled() and any(p.requires_grad for p in parents)
    out = Tensor(data, dtype=data.dtype)
    if needs:
        out.requires_grad = True
        out._node = Node(name, parents, backward_fn)
    return out


class Tape:
    """Ops reachable from one loss, ordered by execution."""

    def __init__(self, nodes: list[Node]):
        self.nodes = sorted(nodes, key=lambda n: n.seq)

    @classmethod
    def from_loss(cls, loss: Tensor) -> "Tape":
        seen: set[int] = set()
        nodes: list[Node] = []
        stack = [loss]
        while stack:
            t = stack.pop()
            node = t._node
            if node is None or id(node) in seen:
                continue
            seen.add(id(node))
            nodes.append(node)
            stack.extend(node.parents)
        return cls(nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def reverse(self) -> Iterator[Node]:
        return reversed(self.nodes)


def backward(loss: Tensor, retain_graph: bool = False, on_visit: Optional[Callable[[Node], None]] = None) -> None:
    """Populate ``.grad`` on every requires_grad leaf reachable from ``loss``.

    Gradients accumulate into existing ``.grad`` buffers.  Unless
    ``retain_graph`` is set the recorded graph is released afterwards and
    a second call raises ``RuntimeError``.
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise RuntimeError("loss does not depend on any tensor that requires grad")
    if loss._node is None:
        loss.grad = np.ones_like(loss.data) if loss.grad is None else loss.grad + 1.0
        return
    tape = Tape.from_loss(loss)
    if any(n.released for n in tape.nodes):
        raise RuntimeError("graph already released; call backward(retain_graph=True) to backprop twice")

    grads: dict[int, np.ndarray] = {id(loss._node): np.ones_like(loss.data)}
    for node in tape.reverse():
        if on_visit is not None:
            on_visit(node)
        g = grads.pop(id(node), None)
        if g is None:
            continue
        parent_grads = node.backward_fn(g)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            if parent._node is None:
                pg = np.asarray(pg, dtype=parent.data.dtype).reshape(parent.shape)
                parent.grad = pg.copy() if parent.grad is None else parent.grad + pg
            else:
                key = id(parent._node)
                grads[key] = grads[key] + pg if key in grads else pg
        if not retain_graph:
            node.released = True
            node.backward_fn = _released


def _released(_g):
    raise RuntimeError("graph already released")
