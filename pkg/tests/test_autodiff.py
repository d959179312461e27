#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import numpy as np
from hypothesis import given, settings, strategies as st

from rarts import autodiff as ad
from rarts.autodiff import Tape, grad_check, leaf_function
from rarts.core import NonFiniteError, ShapeError, TapeOrderError

# ## The training loss of the solvable model on a tape

# +
tape = Tape()
w, a = tape.leaf("w"), tape.leaf("a")
loss = w * w - 2 * a * w + a * a

value = tape.forward({"w": -2., "a": 2.})
grads = tape.backward(loss)
# -

assert value == 16., f"expected 16, got {value}"
assert grads["w"] == -8. and grads["a"] == 8., f"wrong gradients {grads}"
print("Passed test 1 for Tape.forward/backward in file test_autodiff.py")

# ### Order and shape errors

# +
tape = Tape()
x = tape.leaf("x", (3,))
s = ad.sum(ad.tanh(x))
try:
    tape.backward(s)
    assert False, "backward() before forward() must raise TapeOrderError"
except TapeOrderError:
    pass

tape.forward({"x": np.ones(3)})
extra = ad.sqnorm(x)
try:
    tape.backward(extra)
    assert False, "adding a node must invalidate the forward values"
except TapeOrderError:
    pass
# -

print("Passed test 2 for TapeOrderError in file test_autodiff.py")

# +
tape = Tape()
x = tape.leaf("x", (3,))
out = ad.sum(x)
try:
    tape.forward({"x": np.ones(4)})
    assert False, "binding of the wrong shape must raise ShapeError"
except ShapeError as e:
    assert e.node == x.index, f"ShapeError names node {e.node} instead of {x.index}"

try:
    ad.matmul(x, tape.const(np.ones((2, 2))))
    assert False, "matmul of (3,) and (2, 2) must raise ShapeError"
except ShapeError as e:
    assert e.op == "matmul"

tape.forward({"x": np.ones(3)})
try:
    tape.backward(x)
    assert False, "a non-scalar root must raise ShapeError"
except ShapeError:
    pass
# -

print("Passed test 3 for ShapeError in file test_autodiff.py")

# +
tape = Tape()
x = tape.leaf("x")
square = x * x
with np.errstate(over="ignore"):
    try:
        tape.forward({"x": 1e200})
        assert False, "an overflow must raise NonFiniteError"
    except NonFiniteError as e:
        assert e.node == square.index, f"NonFiniteError names node {e.node}"
# -

print("Passed test 4 for NonFiniteError in file test_autodiff.py")

# ### Leaves that do not influence the root get zero gradients

tape = Tape()
x, unused = tape.leaf("x", (2,)), tape.leaf("unused", (2, 2))
root = ad.sqnorm(x)
tape.forward({"x": np.array([1., -3.]), "unused": np.ones((2, 2))})
grads = tape.backward(root)
assert np.array_equal(grads["x"], [2., -6.])
assert np.array_equal(grads["unused"], np.zeros((2, 2)))
print("Passed test 5 for Tape.backward in file test_autodiff.py")

# ### Relu has gradient 0 at its kink

tape = Tape()
x = tape.leaf("x", (3,))
root = ad.sum(ad.relu(x))
tape.forward({"x": np.array([-1., 0., 2.])})
assert np.array_equal(tape.backward(root)["x"], [0., 0., 1.])
print("Passed test 6 for relu in file test_autodiff.py")

# ### Softmax rows are distributions and index picks rows

tape = Tape()
logits = tape.leaf("logits", (2, 3))
probs = ad.softmax(logits)
row = ad.index(probs, 1)
entry = ad.index(row, 2)
tape.forward({"logits": np.array([[0., 1., 2.], [5., 5., 5.]])})
assert np.allclose(probs.value.sum(axis=1), 1.)
assert abs(entry.value - 1 / 3) < 1e-15
grads = tape.backward(entry)
assert np.allclose(grads["logits"][0], 0.)
assert np.allclose(grads["logits"][1], [-1 / 9, -1 / 9, 2 / 9])
print("Passed test 7 for softmax and index in file test_autodiff.py")


# ## Random graphs
def random_graph(seed):
    """Scalar function of a leaf `x` of shape (4,) built from all primitives."""
    generator = np.random.default_rng(seed)
    tape = Tape()
    x = tape.leaf("x", (4,))
    A = tape.const(generator.normal(size=(3, 4)))
    B = tape.const(generator.normal(size=(4, 4)))
    target = tape.const(generator.normal(size=3))
    f = ad.mse(ad.tanh(ad.matmul(A, x)), target)
    g = ad.sqnorm(ad.softmax(ad.matmul(B, x))) + 0.5 * ad.sum(x * x)
    h = f + g
    return tape, f, g, h, generator.normal(size=4)


# ### Gradient of a sum is the sum of gradients
@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_linearity(seed):
    tape, f, g, h, point = random_graph(seed)
    tape.forward({"x": point})
    total = tape.backward(h)["x"]
    parts = tape.backward(f)["x"] + tape.backward(g)["x"]
    assert np.allclose(total, parts, rtol=1e-12, atol=1e-14), (total, parts)


test_linearity()
print("Passed test 8 for linearity of backward in file test_autodiff.py")


# ### Reverse mode agrees with finite differences
@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_grad_check(seed):
    tape, _, _, h, point = random_graph(seed)
    error = grad_check(leaf_function(tape, h, "x", {}), point)
    assert error < 1e-5, f"relative error {error} at seed {seed}"


test_grad_check()
print("Passed test 9 for grad_check in file test_autodiff.py")

# ### grad_check notices a wrong gradient

wrong = grad_check(lambda x: (float(np.sum(x ** 3)), 2 * x), np.array([1., 2.]))
assert wrong > 0.1, f"a wrong gradient passed with error {wrong}"
print("Passed test 10 for grad_check in file test_autodiff.py")
