"""
Bilevel objectives that the solvers of rarts can optimize.

An objective couples two losses over weights and architecture parameters:

 * **L_train(w, α)** the training loss of the network with weights `w`,
 * **L_val(y, α)** the validation loss of the (auxiliary) network with
   weights `y` of the same shapes as `w`.

A `BilevelObjective` exposes the two losses and their first order partial
gradients. Second order DARTS also wants the mixed derivative
∇²_{α,w} L_train; an objective that can apply it exactly sets
`has_mixed_derivative = True` and implements `mixed_train_apply`. The
solvers fall back to finite differences otherwise, and RARTS never calls it.

The module also contains the solvable one-dimensional model

    L_val(y, α)   = α·y − 2α + 1
    L_train(w, α) = w² − 2α·w + α²

whose bilevel minimizer is (α*, w*) = (1, 1), and the relaxed Lagrangian
`eval_lagrangian`.
"""
import numpy as np

from .core import ParamVector, SearchState


class BilevelObjective:
    """
    Interface of a two-loss problem.

    Subclasses fill `weight_segments` and `alpha_segments` (segment
    descriptors of `w`/`y` and of `α`) and implement the six first order
    methods. All methods must be pure functions of their arguments.
    """
    has_mixed_derivative = False

    def __init__(self, weight_segments, alpha_segments):
        self.weight_segments = tuple(weight_segments)
        self.alpha_segments = tuple(alpha_segments)

    def eval_train(self, w, alpha):
        raise NotImplementedError

    def eval_val(self, y, alpha):
        raise NotImplementedError

    def grad_w_train(self, w, alpha):
        raise NotImplementedError

    def grad_alpha_train(self, w, alpha):
        raise NotImplementedError

    def grad_y_val(self, y, alpha):
        raise NotImplementedError

    def grad_alpha_val(self, y, alpha):
        raise NotImplementedError

    def mixed_train_apply(self, w, alpha, v):
        """Return ∇²_{α,w} L_train(w, α) · v as an α-shaped vector."""
        raise NotImplementedError(f"{type(self).__name__} has no exact mixed "
                                  f"derivative.")

    def begin_step(self, t):
        """Called by the solvers before step `t` (used for minibatching)."""

    def zero_weights(self):
        return ParamVector.zeros(self.weight_segments)

    def zero_alpha(self):
        return ParamVector.zeros(self.alpha_segments)


class QuadraticObjective(BilevelObjective):
    """The solvable one-dimensional bilevel model."""
    has_mixed_derivative = True
    #: exact Lipschitz constants of ∇L_val and ∇L_train
    lipschitz = (1.0, 4.0)

    def __init__(self):
        super().__init__([("weight", 0, (1,))], [("alpha", 0, (1,))])

    @staticmethod
    def _scalars(u, alpha):
        return u.values[0], alpha.values[0]

    def _weight(self, value):
        return ParamVector([value], self.weight_segments)

    def _alpha(self, value):
        return ParamVector([value], self.alpha_segments)

    def eval_train(self, w, alpha):
        w, a = self._scalars(w, alpha)
        return float(w * w - 2 * a * w + a * a)

    def eval_val(self, y, alpha):
        y, a = self._scalars(y, alpha)
        return float(a * y - 2 * a + 1)

    def grad_w_train(self, w, alpha):
        w, a = self._scalars(w, alpha)
        return self._weight(2 * w - 2 * a)

    def grad_alpha_train(self, w, alpha):
        w, a = self._scalars(w, alpha)
        return self._alpha(-2 * w + 2 * a)

    def grad_y_val(self, y, alpha):
        y, a = self._scalars(y, alpha)
        return self._weight(a)

    def grad_alpha_val(self, y, alpha):
        y, a = self._scalars(y, alpha)
        return self._alpha(y - 2)

    def mixed_train_apply(self, w, alpha, v):
        return self._alpha(-2 * v.values[0])

    def point(self, alpha, w, y=None, t=0):
        """
        Return the `SearchState` at the given scalars.

        `y` defaults to `w`.
        """
        y = w if y is None else y
        return SearchState(self._weight(w), self._weight(y), self._alpha(alpha), t)


def quadratic_objective():
    """Return the solvable one-dimensional model as a `BilevelObjective`."""
    return QuadraticObjective()


def inner_argmin_quadratic(alpha):
    """argmin_w L_train(w, α) of the solvable model, which is α itself."""
    return alpha


def eval_lagrangian(obj, y, w, alpha, hp):
    """
    Relaxed Lagrangian `L_val(y,α) + λ·L_train(w,α) + β/2·‖y − w‖²`.

    Parameters
    ==========
    obj : BilevelObjective
    y, w : shape-compatible `ParamVector`s
    alpha : `ParamVector`
    hp : `HyperParams` (`lam` and `beta` are used)
    """
    y.check_compatible(w, "weights y and w")
    diff = y.values - w.values
    penalty = 0.5 * hp.beta * float(np.dot(diff, diff))
    return obj.eval_val(y, alpha) + hp.lam * obj.eval_train(w, alpha) + penalty
