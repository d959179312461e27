"""Module with the iteration rules of architecture search.

Every solver updates a `SearchState` (w, y, α) of a `BilevelObjective`:

 * **rarts**  : Gauss-Seidel descent on the relaxed Lagrangian
                L_val(y,α) + λ·L_train(w,α) + β/2·‖y − w‖². The weights w
                and y are updated first and the α step already uses the
                fresh w⁺ and y⁺. Only first order partial derivatives are
                needed.
 * **darts1** : first order DARTS; a training step of w followed by a
                validation step of α at w⁺.
 * **darts2** : second order DARTS; the α step follows the gradient of
                L_val at the virtual weights w' = w⁺ − ξ∇_w L_train(w⁺,α),
                which involves the mixed derivative ∇²_{α,w} L_train.
 * **milenas**: the single-network rule obtained from rarts by setting
                y = w (no y update, no penalty).

The step rules are available as functions (`rarts_step`, ...) and as solver
classes with a `run` method that iterates the rule, logs a `Trajectory` and
applies a `StopRule`. The function `run` selects the class by name.
"""
import logging

from .core import (ConfigError, DivergenceError, NonFiniteError, SearchState,
                   StopRule, Trajectory, TrajectoryRecord)
from .diagnostics import equilibrium_residual
from .objectives import eval_lagrangian
from .utils import check_finite

logger = logging.getLogger(__name__)


### Directions of the α updates ###
def rarts_alpha_direction(obj, w, y, alpha, lam):
    """λ·∇_α L_train(w, α) + ∇_α L_val(y, α)"""
    return lam * obj.grad_alpha_train(w, alpha) + obj.grad_alpha_val(y, alpha)


def milenas_alpha_direction(obj, w, alpha, lam):
    """λ·∇_α L_train(w, α) + ∇_α L_val(w, α)"""
    return lam * obj.grad_alpha_train(w, alpha) + obj.grad_alpha_val(w, alpha)


def mixed_product(obj, w, alpha, v, hp, mode="auto"):
    """
    Return ∇²_{α,w} L_train(w, α) · v.

    With `mode="auto"` the exact product of the objective is used if it
    has one, `"exact"` requires it and `"fd"` forces the central difference

        (∇_α L_train(w + εv, α) − ∇_α L_train(w − εv, α)) / (2ε)

    with ε = fd_epsilon_scale / max(‖v‖, 1e−12).
    """
    if mode not in ("auto", "exact", "fd"):
        raise ConfigError(f"Unknown mixed-derivative mode `{mode}`.")
    if mode == "exact" or (mode == "auto" and obj.has_mixed_derivative):
        return obj.mixed_train_apply(w, alpha, v)
    eps = hp.fd_epsilon_scale / max(v.norm(), 1e-12)
    plus = obj.grad_alpha_train(w + eps * v, alpha)
    minus = obj.grad_alpha_train(w - eps * v, alpha)
    return (1 / (2 * eps)) * (plus - minus)


def darts2_alpha_direction(obj, base, alpha, hp, mode="auto"):
    """
    ∇_α L_val(w', α) − ξ·∇²_{α,w}L_train(base, α)·∇_{w'} L_val(w', α)
    with the virtual weights w' = base − ξ·∇_w L_train(base, α).
    """
    virtual = base - hp.xi * obj.grad_w_train(base, alpha)
    g_virtual = obj.grad_y_val(virtual, alpha)
    correction = mixed_product(obj, base, alpha, g_virtual, hp, mode)
    return obj.grad_alpha_val(virtual, alpha) - hp.xi * correction


class Solver:
    """
    Base class of the iteration rules.

    Subclasses implement `_update(state)` which returns the next state and
    the norms of the three update directions.

    Parameters
    ==========
     * obj: `BilevelObjective`
     * hp: `HyperParams`
     * stop: `StopRule`, default `StopRule()`
     * log_every: `int`; a record is logged every `log_every` steps (and
       for the initial and the final state).

    Solvers that train a single network (`single_network = True`) carry y
    unchanged and log the losses and residuals with y = w.
    """
    name = None
    single_network = False

    def __init__(self, obj, hp, stop=None, log_every=1):
        if int(log_every) < 1:
            raise ConfigError(f"log_every must be >= 1, {log_every} was given.")
        self.obj = obj
        self.hp = hp
        self.stop = StopRule() if stop is None else stop
        self.log_every = int(log_every)

        self.state = None
        self.trajectory = None

        # Debug hook: logs every step, not only the logged ones
        self.debug = False

    def step(self, state):
        """Return the state after one step."""
        return self._update(state)[0]

    def _update(self, state):
        raise NotImplementedError

    def _checked(self, vector, variable, t):
        return check_finite(vector, variable, t)

    def _logged_state(self, state):
        if self.single_network:
            return SearchState(state.w, state.w, state.alpha, state.t)
        return state

    def _record(self, state, norms=(0., 0., 0.)):
        view = self._logged_state(state)
        obj, hp = self.obj, self.hp
        residual = equilibrium_residual(obj, view, hp)
        return TrajectoryRecord(
            view.t, view.w, view.y, view.alpha,
            L_train=obj.eval_train(view.w, view.alpha),
            L_val=obj.eval_val(view.y, view.alpha),
            L=eval_lagrangian(obj, view.y, view.w, view.alpha, hp),
            dw=norms[0], dy=norms[1], dalpha=norms[2],
            r_w=residual.r_w, r_y=residual.r_y, r_alpha=residual.r_alpha)

    def run(self, init):
        """
        Iterate the step rule from `init` until the stop rule fires.

        Returns the `Trajectory`; it is also stored in `self.trajectory` and
        the last state in `self.state`. Raises `DivergenceError` with the
        last finite state if an iterate becomes non-finite or its norm
        exceeds `stop.divergence_bound`.
        """
        state = init.copy()
        trajectory = Trajectory(self.name)
        trajectory.append(self._record(state))
        self.trajectory = trajectory
        logger.info("run solver=%s t0=%d max_steps=%d", self.name, state.t,
                    self.stop.max_steps)

        for k in range(1, self.stop.max_steps + 1):
            try:
                new, norms = self._update(state)
                if not new.is_finite():
                    raise NonFiniteError(f"Non-finite iterate at step {new.t}.",
                                         step=new.t)
            except NonFiniteError as e:
                self.state = state
                raise DivergenceError(f"{self.name} diverged at step {state.t + 1}: {e}",
                                      state=state, trajectory=trajectory,
                                      step=state.t + 1) from e
            if new.max_norm() > self.stop.divergence_bound:
                self.state = state
                raise DivergenceError(f"{self.name} left the ball of radius "
                                      f"{self.stop.divergence_bound} at step {new.t}.",
                                      state=state, trajectory=trajectory, step=new.t)
            state = new

            converged = 0 < self.stop.grad_tol and max(norms) < self.stop.grad_tol
            if self.debug:
                logger.debug("step t=%d |dw|=%.6g |dy|=%.6g |dalpha|=%.6g",
                             state.t, *norms)
            if k % self.log_every == 0 or k == self.stop.max_steps or converged:
                record = self._record(state, norms)
                trajectory.append(record)
                logger.info("step t=%d L=%.10g L_train=%.6g L_val=%.6g |dalpha|=%.6g",
                            record.t, record.L, record.L_train, record.L_val,
                            record.dalpha)
            if converged:
                logger.info("converged t=%d grad_tol=%g", state.t, self.stop.grad_tol)
                break

        self.state = state
        return trajectory

    def __repr__(self):
        return f"{type(self).__name__}(hp={self.hp}, stop={self.stop})"


class RARTS(Solver):
    """Gauss-Seidel descent on the relaxed Lagrangian."""
    name = "rarts"

    def _update(self, state):
        obj, hp = self.obj, self.hp
        w, y, alpha, t = state.w, state.y, state.alpha, state.t
        eta_w, eta_y, eta_alpha = hp.rates(t)
        obj.begin_step(t)

        dir_w = hp.lam * self._checked(obj.grad_w_train(w, alpha), "w", t) \
            + hp.beta * (w - y)
        w_new = w - eta_w * dir_w

        dir_y = self._checked(obj.grad_y_val(y, alpha), "y", t) + hp.beta * (y - w_new)
        y_new = y - eta_y * dir_y

        dir_alpha = self._checked(rarts_alpha_direction(obj, w_new, y_new, alpha, hp.lam),
                                  "alpha", t)
        alpha_new = alpha - eta_alpha * dir_alpha

        return (SearchState(w_new, y_new, alpha_new, t + 1),
                (dir_w.norm(), dir_y.norm(), dir_alpha.norm()))


class DARTS1(Solver):
    """First order DARTS."""
    name = "darts1"
    single_network = True

    def _update(self, state):
        obj, hp = self.obj, self.hp
        w, alpha, t = state.w, state.alpha, state.t
        eta_w, _, eta_alpha = hp.rates(t)
        obj.begin_step(t)

        dir_w = self._checked(obj.grad_w_train(w, alpha), "w", t)
        w_new = w - eta_w * dir_w
        dir_alpha = self._checked(obj.grad_alpha_val(w_new, alpha), "alpha", t)
        alpha_new = alpha - eta_alpha * dir_alpha

        return (SearchState(w_new, state.y, alpha_new, t + 1),
                (dir_w.norm(), 0., dir_alpha.norm()))


class DARTS2(DARTS1):
    """
    Second order DARTS.

    Parameters
    ==========
    mixed: `"auto"` (exact mixed derivative if the objective has one),
           `"exact"` or `"fd"` (central finite differences).

    The base point of the virtual step is w⁺ or w according to
    `hp.darts2_virtual_at` (`"post"` or `"pre"`).
    """
    name = "darts2"

    def __init__(self, obj, hp, stop=None, log_every=1, mixed="auto"):
        if not hp.xi > 0:
            raise ConfigError(f"Second order DARTS needs xi > 0, {hp.xi} was given.")
        super().__init__(obj, hp, stop, log_every)
        self.mixed = mixed

    def _update(self, state):
        obj, hp = self.obj, self.hp
        w, alpha, t = state.w, state.alpha, state.t
        eta_w, _, eta_alpha = hp.rates(t)
        obj.begin_step(t)

        dir_w = self._checked(obj.grad_w_train(w, alpha), "w", t)
        w_new = w - eta_w * dir_w
        base = w_new if hp.darts2_virtual_at == "post" else w
        dir_alpha = self._checked(darts2_alpha_direction(obj, base, alpha, hp, self.mixed),
                                  "alpha", t)
        alpha_new = alpha - eta_alpha * dir_alpha

        return (SearchState(w_new, state.y, alpha_new, t + 1),
                (dir_w.norm(), 0., dir_alpha.norm()))


class MiLeNAS(DARTS1):
    """Mixed-level rule: rarts with y = w and without the penalty."""
    name = "milenas"

    def _update(self, state):
        obj, hp = self.obj, self.hp
        w, alpha, t = state.w, state.alpha, state.t
        eta_w, _, eta_alpha = hp.rates(t)
        obj.begin_step(t)

        dir_w = hp.lam * self._checked(obj.grad_w_train(w, alpha), "w", t)
        w_new = w - eta_w * dir_w
        dir_alpha = self._checked(milenas_alpha_direction(obj, w_new, alpha, hp.lam),
                                  "alpha", t)
        alpha_new = alpha - eta_alpha * dir_alpha

        return (SearchState(w_new, state.y, alpha_new, t + 1),
                (dir_w.norm(), 0., dir_alpha.norm()))


SOLVERS = {cls.name: cls for cls in (RARTS, DARTS1, DARTS2, MiLeNAS)}


def get_solver(solver_kind, obj, hp, stop=None, log_every=1, **kwargs):
    """Instantiate the solver registered under `solver_kind`."""
    try:
        cls = SOLVERS[solver_kind]
    except KeyError:
        raise ConfigError(f"Unknown solver `{solver_kind}`; use one of "
                          f"{sorted(SOLVERS)}.")
    return cls(obj, hp, stop, log_every, **kwargs)


def rarts_step(state, obj, hp):
    """One Gauss-Seidel step of rarts."""
    return RARTS(obj, hp).step(state)


def darts1_step(state, obj, hp):
    """One step of first order DARTS; y is carried unchanged."""
    return DARTS1(obj, hp).step(state)


def darts2_step(state, obj, hp, mixed="auto"):
    """One step of second order DARTS (requires `hp.xi > 0`)."""
    return DARTS2(obj, hp, mixed=mixed).step(state)


def milenas_step(state, obj, hp):
    """One step of the single-network MiLeNAS rule; y is carried unchanged."""
    return MiLeNAS(obj, hp).step(state)


def run(solver_kind, obj, init, hp, stop=None, log_every=1, debug=False, **kwargs):
    """
    Run `solver_kind` ("rarts", "darts1", "darts2" or "milenas") from
    `init` and return the `Trajectory`.
    """
    solver = get_solver(solver_kind, obj, hp, stop, log_every, **kwargs)
    solver.debug = debug
    return solver.run(init)
