"""
Minimal reverse-mode automatic differentiation on an explicit tape.

A `Tape` is built first and evaluated afterwards. Building appends nodes
(with their shapes inferred from the parents) to an append-only list, so the
list is topologically sorted by construction. `Tape.forward` evaluates all
nodes for given leaf bindings and caches their values; `Tape.backward`
performs a single reverse sweep and returns the gradient of a scalar root
with respect to every named leaf.

    >>> tape = Tape()
    >>> w, a = tape.leaf("w"), tape.leaf("a")
    >>> loss = w * w - 2 * a * w + a * a
    >>> tape.forward({"w": -2., "a": 2.})
    16.0
    >>> tape.backward(loss)["w"]
    array(-8.)

Supported primitives: constants, leaves, `add`, `sub`, `neg`, `mul`
(same shapes or scalar times tensor), `matmul` (matrix/vector products),
`tanh`, `relu`, row-wise `softmax`, `mse`, `sum`, `sqnorm` and `index`.
All values are float64.

The function `grad_check` compares a gradient against central finite
differences.
"""
import numpy as np

from .core import ShapeError, NonFiniteError, TapeOrderError


class _Node:
    __slots__ = ("op", "parents", "shape", "attr")

    def __init__(self, op, parents, shape, attr=None):
        self.op = op
        self.parents = parents
        self.shape = shape
        self.attr = attr


class Var:
    """Handle to a node of a tape."""
    __slots__ = ("tape", "index")

    def __init__(self, tape, index):
        self.tape = tape
        self.index = index

    @property
    def shape(self):
        return self.tape.nodes[self.index].shape

    @property
    def value(self):
        return self.tape.value(self)

    def _lift(self, other):
        if isinstance(other, Var):
            if other.tape is not self.tape:
                raise ValueError("Cannot combine variables of different tapes.")
            return other
        return self.tape.const(other)

    def __add__(self, other):
        return add(self, self._lift(other))

    def __radd__(self, other):
        return add(self._lift(other), self)

    def __sub__(self, other):
        return sub(self, self._lift(other))

    def __rsub__(self, other):
        return sub(self._lift(other), self)

    def __mul__(self, other):
        return mul(self, self._lift(other))

    def __rmul__(self, other):
        return mul(self._lift(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, self._lift(other))

    def __rmatmul__(self, other):
        return matmul(self._lift(other), self)

    def __getitem__(self, i):
        return index(self, i)

    def __repr__(self):
        node = self.tape.nodes[self.index]
        return f"Var(#{self.index} {node.op}, shape={node.shape})"


class Tape:
    """
    Append-only list of primitive nodes.

    Values are cached by `forward`; adding a node afterwards invalidates
    the cache, so `backward` needs a new `forward` first.
    """

    def __init__(self):
        self.nodes = []
        self.leaves = {}
        self._values = None

    def _append(self, op, parents, shape, attr=None):
        self.nodes.append(_Node(op, tuple(p.index for p in parents), shape, attr))
        self._values = None
        return Var(self, len(self.nodes) - 1)

    def leaf(self, name, shape=()):
        """Declare an input named `name` of the given shape."""
        if name in self.leaves:
            raise ValueError(f"Leaf `{name}` is already declared on this tape.")
        var = self._append("leaf", (), tuple(shape), name)
        self.leaves[name] = var.index
        return var

    def const(self, value):
        value = np.array(value, dtype=np.float64)
        if not np.all(np.isfinite(value)):
            raise NonFiniteError(f"Constant node #{len(self.nodes)} is not finite.",
                                 node=len(self.nodes))
        value.setflags(write=False)
        return self._append("const", (), value.shape, value)

    def value(self, var):
        if self._values is None:
            raise TapeOrderError("The tape has not been evaluated; call forward() first.")
        return self._values[var.index]

    def forward(self, bindings, root=None):
        """
        Evaluate all nodes for the given leaf values.

        Parameters
        ==========
        bindings : dict name -> array-like
            values of all leaves declared on the tape
        root : Var, optional
            node whose value is returned (default: the last node)

        Returns the root value, as a float if the root is a scalar.
        """
        missing = sorted(set(self.leaves) - set(bindings))
        if missing:
            raise ValueError(f"Unbound leaves: {missing}")
        if not self.nodes:
            raise ValueError("The tape is empty.")

        values = []
        for i, node in enumerate(self.nodes):
            if node.op == "leaf":
                value = np.array(bindings[node.attr], dtype=np.float64)
                if value.shape != node.shape:
                    raise ShapeError(f"Leaf `{node.attr}` (node #{i}) declared with "
                                     f"shape {node.shape} but bound to shape "
                                     f"{value.shape}.", node=i, op="leaf")
            elif node.op == "const":
                value = node.attr
            else:
                args = [values[p] for p in node.parents]
                value = _FORWARD[node.op](node, *args)
            if not np.all(np.isfinite(value)):
                raise NonFiniteError(f"Node #{i} ({node.op}) produced a non-finite "
                                     f"value.", node=i)
            values.append(value)
        self._values = values

        root_index = len(self.nodes) - 1 if root is None else root.index
        result = values[root_index]
        return float(result) if result.ndim == 0 else result

    def backward(self, root):
        """
        Return `{leaf name: d root / d leaf}` for all leaves of the tape.

        `root` must be a scalar node and `forward` must have been called
        after the last node was added.
        """
        if self._values is None:
            raise TapeOrderError("backward() called before forward().")
        if self.nodes[root.index].shape != ():
            raise ShapeError(f"Root node #{root.index} is not scalar, it has "
                             f"shape {self.nodes[root.index].shape}.",
                             node=root.index, op=self.nodes[root.index].op)

        adjoints = [None] * len(self.nodes)
        adjoints[root.index] = np.ones(())
        for i in range(root.index, -1, -1):
            adj = adjoints[i]
            node = self.nodes[i]
            if adj is None or not node.parents:
                continue
            args = [self._values[p] for p in node.parents]
            grads = _BACKWARD[node.op](node, adj, self._values[i], *args)
            for p, g in zip(node.parents, grads):
                adjoints[p] = g if adjoints[p] is None else adjoints[p] + g

        result = {}
        for name, i in self.leaves.items():
            adj = adjoints[i]
            result[name] = np.zeros(self.nodes[i].shape) if adj is None else np.array(adj)
        return result


### Primitive constructors ###
def _check_same_or_scalar(op, a, b):
    sa, sb = a.shape, b.shape
    if sa == sb:
        return sa
    if sa == ():
        return sb
    if sb == ():
        return sa
    raise ShapeError(f"Node #{len(a.tape.nodes)} ({op}): shapes {sa} and {sb} "
                     f"are incompatible.", node=len(a.tape.nodes), op=op)


def add(a, b):
    return a.tape._append("add", (a, b), _check_same_or_scalar("add", a, b))


def sub(a, b):
    return a.tape._append("sub", (a, b), _check_same_or_scalar("sub", a, b))


def neg(a):
    return a.tape._append("neg", (a,), a.shape)


def mul(a, b):
    return a.tape._append("mul", (a, b), _check_same_or_scalar("mul", a, b))


def matmul(a, b):
    """Matrix-matrix, matrix-vector, vector-matrix or vector-vector product."""
    sa, sb = a.shape, b.shape
    if len(sa) not in (1, 2) or len(sb) not in (1, 2) \
            or sa[-1] != sb[0]:
        raise ShapeError(f"Node #{len(a.tape.nodes)} (matmul): cannot multiply "
                         f"shapes {sa} and {sb}.", node=len(a.tape.nodes), op="matmul")
    shape = sa[:-1] + sb[1:]
    return a.tape._append("matmul", (a, b), shape)


def tanh(a):
    return a.tape._append("tanh", (a,), a.shape)


def relu(a):
    return a.tape._append("relu", (a,), a.shape)


def softmax(a):
    """Softmax over the last axis (row-wise for matrices)."""
    if a.shape == ():
        raise ShapeError(f"Node #{len(a.tape.nodes)} (softmax): needs a vector "
                         f"or a matrix.", node=len(a.tape.nodes), op="softmax")
    return a.tape._append("softmax", (a,), a.shape)


def mse(pred, target):
    """Mean of squared differences of two same-shaped nodes."""
    if pred.shape != target.shape:
        raise ShapeError(f"Node #{len(pred.tape.nodes)} (mse): shapes "
                         f"{pred.shape} and {target.shape} differ.",
                         node=len(pred.tape.nodes), op="mse")
    return pred.tape._append("mse", (pred, target), ())


def sum(a):
    return a.tape._append("sum", (a,), ())


def sqnorm(a):
    """Sum of squares of all entries."""
    return a.tape._append("sqnorm", (a,), ())


def index(a, i):
    """Entry `i` of a vector or row `i` of a matrix."""
    if a.shape == () or not -a.shape[0] <= i < a.shape[0]:
        raise ShapeError(f"Node #{len(a.tape.nodes)} (index): index {i} out of "
                         f"range for shape {a.shape}.", node=len(a.tape.nodes),
                         op="index")
    return a.tape._append("index", (a,), a.shape[1:], int(i))


### Local rules ###
def _unbroadcast(g, shape):
    return np.sum(g) if shape == () and np.ndim(g) else g


def _softmax(x):
    z = np.exp(x - np.max(x, axis=-1, keepdims=True))
    return z / np.sum(z, axis=-1, keepdims=True)


def _as_matrices(a, b):
    a2 = a if a.ndim == 2 else a[None, :]
    b2 = b if b.ndim == 2 else b[:, None]
    return a2, b2


def _matmul_backward(node, g, out, a, b):
    a2, b2 = _as_matrices(a, b)
    g2 = np.reshape(g, (a2.shape[0], b2.shape[1]))
    return (g2 @ b2.T).reshape(a.shape), (a2.T @ g2).reshape(b.shape)


def _softmax_backward(node, g, out, a):
    return (out * (g - np.sum(g * out, axis=-1, keepdims=True)),)


def _index_backward(node, g, out, a):
    grad = np.zeros_like(a)
    grad[node.attr] = g
    return (grad,)


_FORWARD = {
    "add": lambda n, a, b: a + b,
    "sub": lambda n, a, b: a - b,
    "neg": lambda n, a: -a,
    "mul": lambda n, a, b: a * b,
    "matmul": lambda n, a, b: np.asarray(a @ b, dtype=np.float64),
    "tanh": lambda n, a: np.tanh(a),
    "relu": lambda n, a: np.where(a > 0, a, 0.),
    "softmax": lambda n, a: _softmax(a),
    "mse": lambda n, p, t: np.asarray(np.mean((p - t) ** 2)),
    "sum": lambda n, a: np.asarray(np.sum(a)),
    "sqnorm": lambda n, a: np.asarray(np.sum(a * a)),
    "index": lambda n, a: np.array(a[n.attr]),
}

_BACKWARD = {
    "add": lambda n, g, out, a, b: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    "sub": lambda n, g, out, a, b: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)),
    "neg": lambda n, g, out, a: (-g,),
    "mul": lambda n, g, out, a, b: (_unbroadcast(g * b, a.shape),
                                    _unbroadcast(g * a, b.shape)),
    "matmul": _matmul_backward,
    "tanh": lambda n, g, out, a: (g * (1 - out * out),),
    # subgradient 0 at 0
    "relu": lambda n, g, out, a: (g * (a > 0),),
    "softmax": _softmax_backward,
    "mse": lambda n, g, out, p, t: (g * 2 * (p - t) / p.size,
                                    -g * 2 * (p - t) / p.size),
    "sum": lambda n, g, out, a: (g * np.ones_like(a),),
    "sqnorm": lambda n, g, out, a: (2 * g * a,),
    "index": _index_backward,
}


def leaf_function(tape, root, leaf, bindings):
    """
    Wrap a tape as a closure `x -> (value, gradient)` of one leaf.

    The other leaves stay fixed at `bindings`; `x` is reshaped to the
    declared shape of `leaf`.
    """
    shape = tape.nodes[tape.leaves[leaf]].shape

    def f(x):
        values = dict(bindings)
        values[leaf] = np.reshape(np.asarray(x, dtype=np.float64), shape)
        value = tape.forward(values, root)
        return value, tape.backward(root)[leaf].ravel()

    return f


def grad_check(f, point, eps=1e-5):
    """
    Compare the gradient returned by `f` against central finite differences.

    Parameters
    ==========
    f : callable
        `f(x)` returns `(value, gradient)` for a flat float vector `x`
    point : array-like
        where to check
    eps : float > 0
        finite-difference step

    Returns the maximum over coordinates of
    `|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)`.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, {eps} was given.")
    x = np.array(point, dtype=np.float64).ravel()
    _, analytic = f(x)
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    if analytic.shape != x.shape:
        raise ShapeError(f"Gradient of shape {analytic.shape} returned for a "
                         f"point of shape {x.shape}.")

    worst = 0.
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = eps
        numeric = (f(x + step)[0] - f(x - step)[0]) / (2 * eps)
        denom = max(abs(analytic[i]), abs(numeric), 1e-12)
        worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst
