#!/usr/bin/env python
from collections import Counter

import numpy as np

from rarts.core import HyperParams
from rarts.objectives import BilevelObjective, quadratic_objective
from rarts.supernet import CellSpec, gen_task


# ## Starting point of the phase plots
# All runs of the solvable model start at (α₀, w₀) = (2, −2) with learning
# rates 0.01.
def quadratic_start(y0=0.):
    obj = quadratic_objective()
    return obj, obj.point(2., -2., y0)


def quadratic_hp(lam=10., beta=10., xi=0., **kwargs):
    return HyperParams(lam=lam, beta=beta, eta_w=0.01, eta_y=0.01, eta_alpha=0.01,
                       xi=xi, **kwargs)


def random_state(obj, generator, scale=3.):
    """Quadratic-model state with all coordinates uniform in [-scale, scale]."""
    alpha, w, y = generator.uniform(-scale, scale, 3)
    return obj.point(alpha, w, y)


class RecordingObjective(BilevelObjective):
    """
    Wraps an objective, counts the calls of its methods and keeps the
    values of their arguments in call order.

    Used to check which derivatives a solver asks for, and where.
    """

    def __init__(self, obj):
        super().__init__(obj.weight_segments, obj.alpha_segments)
        self.obj = obj
        self.has_mixed_derivative = obj.has_mixed_derivative
        self.calls = Counter()
        self.arguments = []

    def _call(self, name, *args):
        self.calls[name] += 1
        self.arguments.append((name, [a.values.copy() for a in args]))
        return getattr(self.obj, name)(*args)

    def eval_train(self, w, alpha):
        return self._call("eval_train", w, alpha)

    def eval_val(self, y, alpha):
        return self._call("eval_val", y, alpha)

    def grad_w_train(self, w, alpha):
        return self._call("grad_w_train", w, alpha)

    def grad_alpha_train(self, w, alpha):
        return self._call("grad_alpha_train", w, alpha)

    def grad_y_val(self, y, alpha):
        return self._call("grad_y_val", y, alpha)

    def grad_alpha_val(self, y, alpha):
        return self._call("grad_alpha_val", y, alpha)

    def mixed_train_apply(self, w, alpha, v):
        return self._call("mixed_train_apply", w, alpha, v)


# ## Small search spaces
# Tiny cells keep the finite-difference checks fast. The smooth menu avoids
# the kink of relu.
SMOOTH_MENU = ("zero", "identity", "linear", "linear_tanh")


def tiny_cell(depth=2, feature_dim=2, op_menu=SMOOTH_MENU):
    return CellSpec(depth=depth, feature_dim=feature_dim, op_menu=op_menu)


def tiny_task(seed=0, cell=None, n=16, noise_std=0., teacher_ops=None):
    cell = tiny_cell() if cell is None else cell
    return gen_task(seed, cell, n, n, n, noise_std, teacher_ops)


def flat_point(generator, size, scale=1.):
    return generator.normal(0., scale, size)


def max_abs_diff(a, b):
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))
