"""
Toy differentiable architecture search space.

A cell is a chain of `depth` edges acting on `feature_dim`-dimensional
activations, followed by a linear head that maps the last activation to a
scalar. Every edge of a *mixed* cell applies all candidate operations of the
menu and sums their outputs weighted by the softmax of the edge's row of
architecture logits α (an `E × K` matrix). A *discrete* cell (with a
`genotype`) applies exactly one operation per edge.

Candidate operations (`h` is the incoming activation, `W` a `d × d`
matrix owned by the operation on that edge):

 * **zero**        : 0
 * **identity**    : h
 * **linear**      : h·W
 * **linear_tanh** : tanh(h·W)
 * **linear_relu** : relu(h·W)

`supernet_objective` turns a `SyntheticTask` (data generated by a discrete
teacher cell) into a `BilevelObjective` whose training loss is the mean
squared error of the network `w` on the train split and whose validation
loss is the mean squared error of the network `y` on the val split. All
gradients come from `rarts.autodiff`.

`discretize` projects α to a discrete cell and `retrain` trains it from
scratch on the train and val splits together.
"""
import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .core import (ConfigError, DivergenceError, NonFiniteError, ParamVector,
                   SearchState, ShapeError, config_int)
from .distribution import softmax
from .objectives import BilevelObjective
from .utils import rng, spawn_rngs

logger = logging.getLogger(__name__)

OPS = ("zero", "identity", "linear", "linear_tanh", "linear_relu")
PARAMETRIC_OPS = ("linear", "linear_tanh", "linear_relu")
ZERO = "zero"


@dataclass
class CellSpec:
    """
    Description of a single-path cell.

    Parameters
    ==========
    depth : number of edges E (default 3)
    feature_dim : dimension d of the activations (default 8)
    op_menu : ordered candidate operations, shared by all edges
    genotype : `None` for a mixed cell, otherwise one operation (from the
               menu) per edge
    """
    depth: int = 3
    feature_dim: int = 8
    op_menu: tuple = OPS
    genotype: tuple = None

    def __post_init__(self):
        if isinstance(self.op_menu, str) or not isinstance(self.op_menu, (list, tuple)):
            raise ConfigError(f"`cell.op_menu` must be a list of operation names, "
                              f"{self.op_menu!r} was given.")
        self.op_menu = tuple(self.op_menu)
        self.depth = config_int(self.depth, "cell.depth", 1)
        self.feature_dim = config_int(self.feature_dim, "cell.feature_dim", 1)
        if not self.op_menu:
            raise ConfigError("The operation menu is empty.")
        unknown = [op for op in self.op_menu if op not in OPS]
        if unknown:
            raise ConfigError(f"Unknown operations {unknown}; use some of {OPS}.")
        if len(set(self.op_menu)) != len(self.op_menu):
            raise ConfigError(f"The operation menu {self.op_menu} has duplicates.")
        if self.genotype is not None:
            self.genotype = tuple(self.genotype)
            if len(self.genotype) != self.depth:
                raise ConfigError(f"The genotype has {len(self.genotype)} operations "
                                  f"for {self.depth} edges.")
            outside = [op for op in self.genotype if op not in self.op_menu]
            if outside:
                raise ConfigError(f"Genotype operations {outside} are not in the "
                                  f"menu {self.op_menu}.")

    @property
    def is_discrete(self):
        return self.genotype is not None

    def edge_ops(self, e):
        """Operations applied on edge `e`."""
        return (self.genotype[e],) if self.is_discrete else self.op_menu

    def weight_segments(self):
        """Segments of the weight vector: one `d × d` matrix per
        parametric operation and edge, then the head `(d,)`."""
        d = self.feature_dim
        segments, offset = [], 0
        for e in range(self.depth):
            for op in self.edge_ops(e):
                if op in PARAMETRIC_OPS:
                    segments.append((f"e{e}.{op}", offset, (d, d)))
                    offset += d * d
        segments.append(("head", offset, (d,)))
        return tuple(segments)

    def alpha_segments(self):
        return (("alpha", 0, (self.depth, len(self.op_menu))),)

    def with_genotype(self, genotype):
        return CellSpec(self.depth, self.feature_dim, self.op_menu, genotype)

    def to_dict(self):
        data = {"depth": self.depth, "feature_dim": self.feature_dim,
                "op_menu": list(self.op_menu)}
        if self.genotype is not None:
            data["genotype"] = list(self.genotype)
        return data

    @classmethod
    def from_dict(cls, data):
        known = {"depth", "feature_dim", "op_menu", "genotype"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown keys in `cell`: {unknown}")
        return cls(**data)


class ArchParams:
    """
    Architecture logits of a mixed cell: an `E × K` matrix stored as the
    segment `alpha` of a `ParamVector`.
    """

    def __init__(self, vector):
        if vector.names() != ["alpha"] or len(vector.segment("alpha").shape) != 2:
            raise ShapeError(f"Architecture parameters need a single 2-D segment "
                             f"`alpha`, got {vector.segments}.")
        self.vector = vector

    @classmethod
    def zeros(cls, cell):
        return cls(ParamVector.zeros(cell.alpha_segments()))

    @classmethod
    def from_logits(cls, logits):
        return cls(ParamVector.from_arrays([("alpha", np.asarray(logits, dtype=float))]))

    @property
    def logits(self):
        return self.vector.segment("alpha")

    def probabilities(self):
        """Row-wise softmax of the logits."""
        return softmax(self.logits)


def init_weights(cell, generator, scale=1.0):
    """
    Gaussian weights for `cell` with standard deviation `scale/sqrt(d)`.
    """
    segments = cell.weight_segments()
    size = sum(int(np.prod(shape)) for _, _, shape in segments)
    std = scale / np.sqrt(cell.feature_dim)
    return ParamVector(generator.normal(0., std, size), segments)


def _check_weights(cell, weights):
    if weights.segments != cell.weight_segments():
        raise ShapeError(f"The weights do not fit the cell: {weights.segments} "
                         f"vs {cell.weight_segments()}.")


def _apply_op(op, h, matrix):
    if op == "identity":
        return h
    pre = ad.matmul(h, matrix)
    if op == "linear":
        return pre
    if op == "linear_tanh":
        return ad.tanh(pre)
    return ad.relu(pre)


def _network(tape, cell, weights, probs, x):
    """
    Build the network on `tape`.

    `weights` maps segment names to tape variables, `probs` is an `E × K`
    variable of mixing weights (ignored for discrete cells) and `x` the
    input variable of shape `(d,)` or `(n, d)`.
    """
    h = x
    for e in range(cell.depth):
        terms = []
        for k, op in enumerate(cell.edge_ops(e)):
            if op == ZERO:
                continue
            out = _apply_op(op, h, weights.get(f"e{e}.{op}"))
            if not cell.is_discrete:
                out = ad.index(ad.index(probs, e), k) * out
            terms.append(out)
        if not terms:
            h = tape.const(np.zeros(h.shape))
            continue
        h = terms[0]
        for term in terms[1:]:
            h = h + term
    return ad.matmul(h, weights["head"])


def _build(tape, cell, weights, x, logits=None, mixing=None):
    """
    Declare the leaves of `weights` and of the architecture on `tape` and
    build the network on input `x`.

    A mixed cell mixes its operations with `softmax(logits)`, or with
    `mixing` taken as it is. Returns `(output, bindings)`.
    """
    _check_weights(cell, weights)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (cell.feature_dim,) or x.ndim > 2:
        raise ShapeError(f"Inputs of shape {x.shape} do not match feature_dim "
                         f"{cell.feature_dim}.")

    leaves = {name: tape.leaf(name, shape) for name, _, shape in weights.segments}
    bindings = {name: array for name, array in weights.arrays()}
    probs = None
    if not cell.is_discrete:
        source = logits if mixing is None else mixing
        source = np.asarray(source, dtype=np.float64)
        if source.shape != (cell.depth, len(cell.op_menu)):
            raise ShapeError(f"Architecture matrix of shape {source.shape} does not "
                             f"fit {cell.depth} edges with {len(cell.op_menu)} "
                             f"operations.")
        if mixing is None:
            probs = ad.softmax(tape.leaf("alpha", source.shape))
            bindings["alpha"] = source
        else:
            probs = tape.leaf("mixing", source.shape)
            bindings["mixing"] = source
    return _network(tape, cell, leaves, probs, tape.const(x)), bindings


def forward_with_weights(cell, weights, probs, x):
    """
    Output of the cell when edge `e` mixes its operations with the given
    weights `probs[e]` (no softmax applied). `probs` is ignored for
    discrete cells.
    """
    tape = ad.Tape()
    _, bindings = _build(tape, cell, weights, x, mixing=probs)
    return tape.forward(bindings)


def mixed_forward(cell, weights, arch, x):
    """
    Output of the mixed cell for input `x` (a `(d,)` vector gives a float,
    an `(n, d)` batch an array of `n` outputs).

    Edge `e` computes Σ_k softmax(α_e)_k · op_k(h). For a discrete cell
    `arch` may be `None`.
    """
    tape = ad.Tape()
    logits = None if cell.is_discrete else arch.logits
    _, bindings = _build(tape, cell, weights, x, logits=logits)
    return tape.forward(bindings)


def loss_and_grads(cell, weights, alpha, X, Y):
    """
    Mean squared error of the cell on `(X, Y)` and its gradients.

    `alpha` is the architecture `ParamVector` (ignored for discrete cells).
    Returns `(loss, weight_gradient, alpha_gradient)`; the gradients are
    `ParamVector`s and `alpha_gradient` is `None` for discrete cells.
    """
    tape = ad.Tape()
    logits = None if cell.is_discrete else alpha.segment("alpha")
    pred, bindings = _build(tape, cell, weights, X, logits=logits)
    loss = ad.mse(pred, tape.const(Y))
    value = tape.forward(bindings)
    grads = tape.backward(loss)

    grad_w = weights.like(np.concatenate([grads[name].ravel() for name in weights.names()]))
    grad_alpha = None if cell.is_discrete else alpha.like(grads["alpha"].ravel())
    return value, grad_w, grad_alpha


@dataclass
class SyntheticTask:
    """
    Regression data generated by a discrete teacher cell.

    `splits` maps `"train"`, `"val"` and `"test"` to `(X, Y)` pairs with
    `Y = teacher(X) + noise`.
    """
    teacher: CellSpec
    teacher_weights: ParamVector
    splits: dict
    noise_std: float = 0.
    seed: int = 0
    info: dict = field(default_factory=dict)

    def split(self, name):
        return self.splits[name]


def gen_task(seed, cell, n_train, n_val, n_test, noise_std=0., teacher_ops=None):
    """
    Generate a `SyntheticTask` for the search space `cell`.

    The teacher picks one non-zero operation of the menu per edge uniformly
    at random (or uses `teacher_ops` if given), its weights are drawn by
    `init_weights`, inputs are standard Gaussian. The teacher, the weights
    and each split use disjoint random streams derived from `seed`.
    """
    for name, n in (("n_train", n_train), ("n_val", n_val), ("n_test", n_test)):
        if int(n) < 1:
            raise ConfigError(f"`{name}` must be >= 1, {n} was given.")
    if noise_std < 0:
        raise ConfigError(f"noise_std must be non-negative, {noise_std} was given.")
    ops_rng, weight_rng, *split_rngs = spawn_rngs(seed, 5)

    candidates = [op for op in cell.op_menu if op != ZERO]
    if teacher_ops is None:
        if not candidates:
            raise ConfigError("The menu has no non-zero operation for the teacher.")
        teacher_ops = [candidates[i] for i in ops_rng.integers(len(candidates), size=cell.depth)]
    teacher = cell.with_genotype(teacher_ops)
    teacher_weights = init_weights(teacher, weight_rng)

    splits = {}
    for name, n, generator in zip(("train", "val", "test"), (n_train, n_val, n_test),
                                  split_rngs):
        X = generator.standard_normal((int(n), cell.feature_dim))
        Y = np.asarray(mixed_forward(teacher, teacher_weights, None, X))
        Y = Y + noise_std * generator.standard_normal(int(n))
        splits[name] = (X, Y)
    logger.info("task seed=%s teacher=%s noise_std=%g", seed, ",".join(teacher.genotype),
                noise_std)
    return SyntheticTask(teacher, teacher_weights, splits, noise_std, seed)


class SupernetObjective(BilevelObjective):
    """
    Bilevel objective of the mixed cell on a `SyntheticTask`.

    With `batch_size` set, every step uses a minibatch of each split drawn
    by a generator seeded with `(seed, t)`. The current minibatch is state
    of the object: `begin_step(t)` replaces it for all callers, so
    concurrent runs need one objective each. Full-batch evaluations may be
    shared between threads; the cache of recent evaluations is guarded by
    a lock.
    """

    def __init__(self, cell, task, batch_size=None, seed=0):
        if cell.is_discrete:
            raise ConfigError("The search needs a mixed cell, not a genotype.")
        super().__init__(cell.weight_segments(), cell.alpha_segments())
        for name in ("train", "val"):
            X, Y = task.split(name)
            if len(X) == 0 or len(Y) == 0:
                raise ValueError(f"The {name} split is empty.")
        self.cell = cell
        self.task = task
        self.batch_size = batch_size
        self.seed = seed
        self._batch = {name: task.split(name) for name in ("train", "val")}
        self._batch_key = None
        self._cache = OrderedDict()
        self._lock = threading.Lock()

    def begin_step(self, t):
        if self.batch_size is None or self._batch_key == t:
            return
        generator = np.random.default_rng([self.seed, t])
        batch = {}
        for name in ("train", "val"):
            X, Y = self.task.split(name)
            idx = np.sort(generator.choice(len(X), min(self.batch_size, len(X)),
                                           replace=False))
            batch[name] = (X[idx], Y[idx])
        with self._lock:
            self._batch, self._batch_key = batch, t

    def _evaluate(self, split, weights, alpha):
        with self._lock:
            batch_key, (X, Y) = self._batch_key, self._batch[split]
            key = (split, batch_key, weights.values.tobytes(), alpha.values.tobytes())
            cached = self._cache.get(key)
            if cached is not None:
                self._cache.move_to_end(key)
                return cached
        result = loss_and_grads(self.cell, weights, alpha, X, Y)
        with self._lock:
            self._cache[key] = result
            self._cache.move_to_end(key)
            while len(self._cache) > 8:
                self._cache.popitem(last=False)
        return result

    def eval_train(self, w, alpha):
        return self._evaluate("train", w, alpha)[0]

    def eval_val(self, y, alpha):
        return self._evaluate("val", y, alpha)[0]

    def grad_w_train(self, w, alpha):
        return self._evaluate("train", w, alpha)[1]

    def grad_alpha_train(self, w, alpha):
        return self._evaluate("train", w, alpha)[2]

    def grad_y_val(self, y, alpha):
        return self._evaluate("val", y, alpha)[1]

    def grad_alpha_val(self, y, alpha):
        return self._evaluate("val", y, alpha)[2]

    def test_mse(self, weights, alpha):
        X, Y = self.task.split("test")
        return loss_and_grads(self.cell, weights, alpha, X, Y)[0]

    def init_state(self, seed, scale=1.0):
        """Random weights `w`, `y = w` and uniform architecture logits."""
        w = init_weights(self.cell, rng(seed), scale)
        return SearchState(w, w.copy(), ArchParams.zeros(self.cell).vector, 0)


def teacher_point(cell, task, saturation=50.):
    """
    Weights and logits of the mixed `cell` that reproduce the teacher.

    Teacher matrices go to the segments of the teacher's operations, all
    other weights are 0, and each logit row is `+saturation` at the
    teacher's operation and `-saturation` elsewhere.
    """
    weights = ParamVector.zeros(cell.weight_segments())
    for name, array in task.teacher_weights.arrays():
        weights.segment(name)[...] = array
    logits = np.full((cell.depth, len(cell.op_menu)), -float(saturation))
    for e, op in enumerate(task.teacher.genotype):
        logits[e, cell.op_menu.index(op)] = saturation
    return weights, ArchParams.from_logits(logits)


def supernet_objective(cell, task, batch_size=None, seed=0):
    """Return the `SupernetObjective` of `cell` on `task`."""
    return SupernetObjective(cell, task, batch_size, seed)


def discretize(arch, cell, include_zero=False):
    """
    Project architecture logits to a discrete cell.

    Each edge keeps the operation with the largest softmax weight; the zero
    operation is skipped unless `include_zero` is set and ties go to the
    lower menu index.
    """
    probs = arch.probabilities()
    if probs.shape != (cell.depth, len(cell.op_menu)):
        raise ShapeError(f"Logits of shape {probs.shape} do not fit the cell.")
    allowed = [k for k, op in enumerate(cell.op_menu) if include_zero or op != ZERO]
    if not allowed:
        raise ValueError("The menu contains only the zero operation.")
    genotype = [cell.op_menu[allowed[int(np.argmax(row[allowed]))]] for row in probs]
    return cell.with_genotype(genotype)


def retrain(cell, task, epochs, lr, seed=0):
    """
    Train a discrete cell from scratch.

    Full-batch gradient descent on the train and val splits together,
    starting from `init_weights(cell, rng(seed))`.

    Returns
    =======
    `(weights, test_mse)`
    """
    if not cell.is_discrete:
        raise ConfigError("Only discrete cells (with a genotype) can be retrained.")
    if int(epochs) < 1:
        raise ConfigError(f"Retraining needs at least one epoch, {epochs} was given.")
    X = np.concatenate([task.split("train")[0], task.split("val")[0]])
    Y = np.concatenate([task.split("train")[1], task.split("val")[1]])
    weights = init_weights(cell, rng(seed))

    for epoch in range(int(epochs)):
        try:
            loss, grad, _ = loss_and_grads(cell, weights, None, X, Y)
        except NonFiniteError as e:
            raise DivergenceError(f"Retraining diverged at epoch {epoch}.",
                                  epoch=epoch) from e
        weights = weights - lr * grad
        if not weights.is_finite():
            raise DivergenceError(f"Retraining diverged at epoch {epoch}.", epoch=epoch)
        if epoch % 500 == 0:
            logger.debug("retrain epoch=%d loss=%.6g", epoch, loss)

    X_test, Y_test = task.split("test")
    test_mse = loss_and_grads(cell, weights, None, X_test, Y_test)[0]
    logger.info("retrain genotype=%s epochs=%d test_mse=%.6g",
                ",".join(cell.genotype), epochs, test_mse)
    return weights, test_mse
