#!/usr/bin/env python3
# -*- coding: utf-8 -*-
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from hypothesis import given, settings, strategies as st

from rarts.autodiff import grad_check
from rarts.core import ConfigError, DivergenceError, ParamVector
from rarts.distribution import is_distribution
from rarts.supernet import (ArchParams, CellSpec, discretize, forward_with_weights,
                            gen_task, init_weights, loss_and_grads, mixed_forward,
                            retrain, supernet_objective, teacher_point)
from rarts.utils import rng

from quadratic_examples import max_abs_diff, tiny_cell, tiny_task

# ## Cells

# +
for bad in ({"depth": 0}, {"op_menu": ("zero", "conv")}, {"op_menu": ()},
            {"op_menu": ("zero", "zero")}, {"depth": 2, "genotype": ("identity",)},
            {"op_menu": ("zero", "identity"), "depth": 1, "genotype": ("linear",)}):
    try:
        CellSpec(**bad)
        assert False, f"{bad} must raise ConfigError"
    except ConfigError:
        pass

cell = CellSpec(depth=2, feature_dim=3, op_menu=("zero", "identity", "linear_tanh"))
names = [name for name, _, _ in cell.weight_segments()]
# -

assert names == ["e0.linear_tanh", "e1.linear_tanh", "head"], names
assert cell.alpha_segments() == (("alpha", 0, (2, 3)),)
assert CellSpec.from_dict(cell.to_dict()) == cell
assert cell.with_genotype(["identity", "linear_tanh"]).is_discrete
print("Passed test 1 for CellSpec in file test_supernet.py")

arch = ArchParams.zeros(cell)
assert is_distribution(arch.probabilities()) and np.allclose(arch.probabilities(), 1 / 3)
print("Passed test 2 for ArchParams in file test_supernet.py")

# ## Mixing is linear in the weights of an edge
# The output of a cell depends linearly on the mixing weights of its last
# edge (the operations have no bias), for any fixed first edge.


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_linear_mixing(seed):
    generator = np.random.default_rng(seed)
    cell = tiny_cell(feature_dim=3)
    weights = init_weights(cell, generator)
    x = generator.normal(size=(5, 3))
    first = generator.dirichlet(np.ones(len(cell.op_menu)))
    p, q = generator.normal(size=(2, len(cell.op_menu)))

    def output(last):
        return forward_with_weights(cell, weights, np.stack([first, last]), x)

    zero = output(np.zeros(len(cell.op_menu)))
    assert max_abs_diff(zero, 0.) == 0.
    assert max_abs_diff(output(p + q), output(p) + output(q) - zero) < 1e-12


test_linear_mixing()
print("Passed test 3 for forward_with_weights in file test_supernet.py")

# ## Synthetic tasks

# +
task = tiny_task(seed=4)
again = tiny_task(seed=4)
X_test, Y_test = task.split("test")
# -

assert all(np.array_equal(task.split(s)[0], again.split(s)[0]) for s in ("train", "val", "test"))
assert task.teacher.genotype == again.teacher.genotype
assert "zero" not in task.teacher.genotype
assert np.array_equal(Y_test, mixed_forward(task.teacher, task.teacher_weights, None, X_test)), \
    "without noise the targets are the outputs of the teacher"
assert not np.array_equal(X_test, tiny_task(seed=5).split("test")[0])
print("Passed test 4 for gen_task in file test_supernet.py")

noisy = tiny_task(seed=4, noise_std=0.1)
assert np.array_equal(noisy.split("train")[0], task.split("train")[0])
assert 0 < max_abs_diff(noisy.split("train")[1], task.split("train")[1]) < 1.
try:
    tiny_task(noise_std=-1.)
    assert False, "negative noise must raise ConfigError"
except ConfigError:
    pass
print("Passed test 5 for noisy tasks in file test_supernet.py")

# ### A saturated mixed cell reproduces the teacher

cell = tiny_cell(feature_dim=3)
task = tiny_task(seed=1, cell=cell, teacher_ops=("linear_tanh", "linear"))
weights, arch = teacher_point(cell, task)
X, Y = task.split("val")
assert max_abs_diff(mixed_forward(cell, weights, arch, X), Y) < 1e-12
assert discretize(arch, cell).genotype == ("linear_tanh", "linear")
print("Passed test 6 for teacher_point in file test_supernet.py")


# ## Gradients of the supernet loss agree with finite differences
# 20 random points for the weights and 20 for the architecture logits.
def weight_function(cell, alpha, X, Y, segments):
    def f(x):
        loss, grad_w, _ = loss_and_grads(cell, ParamVector(x, segments), alpha, X, Y)
        return loss, grad_w.values
    return f


def alpha_function(cell, weights, X, Y):
    def f(x):
        alpha = ArchParams.from_logits(x.reshape(cell.depth, len(cell.op_menu))).vector
        loss, _, grad_alpha = loss_and_grads(cell, weights, alpha, X, Y)
        return loss, grad_alpha.values
    return f


cell = tiny_cell()
task = tiny_task(seed=2, cell=cell)
X, Y = task.split("train")
generator = np.random.default_rng(11)
errors = []
for _ in range(20):
    weights = init_weights(cell, generator)
    alpha = ArchParams.from_logits(generator.normal(size=(cell.depth, len(cell.op_menu)))).vector
    errors.append(grad_check(weight_function(cell, alpha, X, Y, weights.segments),
                             weights.values))
    errors.append(grad_check(alpha_function(cell, weights, X, Y), alpha.values))
assert max(errors) < 1e-5, f"max relative error {max(errors)}"
print("Passed test 7 for loss_and_grads in file test_supernet.py")

# ## Discretization

# +
cell = CellSpec(depth=3, feature_dim=2, op_menu=("zero", "identity", "linear", "linear_tanh"))
logits = np.array([[9., 1., 2., 3.],
                   [0., 5., 5., 1.],
                   [1., 1., 1., 7.]])
arch = ArchParams.from_logits(logits)
# -

assert discretize(arch, cell).genotype == ("linear_tanh", "identity", "linear_tanh")
assert discretize(arch, cell, include_zero=True).genotype == ("zero", "identity", "linear_tanh")
print("Passed test 8 for discretize in file test_supernet.py")

# ## Retraining

# +
linear = CellSpec(depth=1, feature_dim=8, op_menu=("zero", "identity", "linear_tanh"))
task = gen_task(0, linear, 256, 256, 256, teacher_ops=("identity",))
_, exact_mse = retrain(linear.with_genotype(["identity"]), task, 500, 0.1)

tanh_task = gen_task(0, linear, 256, 256, 256, teacher_ops=("linear_tanh",))
_, wrong_mse = retrain(linear.with_genotype(["identity"]), tanh_task, 500, 0.1)
# -

assert exact_mse < 1e-10, f"the teacher cell fits its own data, test MSE {exact_mse}"
assert wrong_mse > 1e-3, f"a linear cell cannot fit tanh, test MSE {wrong_mse}"
print("Passed test 9 for retrain in file test_supernet.py")

for bad_cell, epochs in ((linear, 10), (linear.with_genotype(["identity"]), 0)):
    try:
        retrain(bad_cell, task, epochs, 0.1)
        assert False, "retrain needs a discrete cell and at least one epoch"
    except ConfigError:
        pass

with np.errstate(over="ignore", invalid="ignore"):
    try:
        retrain(linear.with_genotype(["identity"]), task, 1000, 100.)
        assert False, "a huge rate must diverge"
    except DivergenceError as e:
        assert e.epoch is not None and 0 < e.epoch < 1000
print("Passed test 10 for retrain errors in file test_supernet.py")

# ## The search objective

# +
cell = tiny_cell(feature_dim=3)
task = tiny_task(seed=3, cell=cell, n=40)
obj = supernet_objective(cell, task, batch_size=8, seed=7)
state = obj.init_state(0)
# -

assert np.array_equal(state.w.values, state.y.values) and state.w is not state.y
assert np.array_equal(state.alpha.values, np.zeros(cell.depth * len(cell.op_menu)))
obj.begin_step(3)
first = obj.eval_train(state.w, state.alpha)
obj.begin_step(4)
obj.begin_step(3)
assert obj.eval_train(state.w, state.alpha) == first, "minibatches depend on (seed, t) only"
X, Y = obj._batch["train"]
assert len(X) == 8
assert obj.eval_train(state.w, state.alpha) == loss_and_grads(cell, state.w, state.alpha, X, Y)[0]
assert np.array_equal(obj.grad_alpha_val(state.y, state.alpha).values,
                      loss_and_grads(cell, state.y, state.alpha, *obj._batch["val"])[2].values)

try:
    supernet_objective(cell.with_genotype(["identity", "linear"]), task)
    assert False, "a discrete cell cannot be searched"
except ConfigError:
    pass
print("Passed test 11 for SupernetObjective in file test_supernet.py")

# ### init_weights scales with the feature dimension

weights = init_weights(CellSpec(depth=1, feature_dim=64, op_menu=("linear",)), rng(0))
assert 0.9 / 8 < np.std(weights.values) < 1.1 / 8
print("Passed test 12 for init_weights in file test_supernet.py")

# ### Threads share one full-batch objective

# +
shared = supernet_objective(cell, task)
points = [shared.init_state(seed, scale=0.5) for seed in range(24)]
expected = [loss_and_grads(cell, s.w, s.alpha, *task.split("train")) for s in points]


def evaluate(i):
    s = points[i % len(points)]
    return i % len(points), shared.eval_train(s.w, s.alpha), shared.grad_w_train(s.w, s.alpha)


with ThreadPoolExecutor(max_workers=8) as pool:
    outcomes = list(pool.map(evaluate, range(400)))
# -

for i, loss, grad in outcomes:
    assert loss == expected[i][0]
    assert np.array_equal(grad.values, expected[i][1].values)
assert len(shared._cache) <= 8
print("Passed test 13 for concurrent evaluations in file test_supernet.py")
