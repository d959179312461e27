"""
Convergence diagnostics of the relaxed Lagrangian iteration.

The Lagrangian `L(y, w, α) = L_val(y,α) + λ·L_train(w,α) + β/2·‖y − w‖²`
descends along the RARTS iterations if the learning rates stay below

    c1 = ½·[L1/2 + β/2 + (1+λ)·L3/2]⁻¹     (bound of η_y)
    c2 = ½·[L2/2 + β/2 + (1+λ)·L3/2]⁻¹     (bound of η_w)
    c3 = 1/((1+λ)·L3)                       (bound of η_α)

where L1 and L2 are Lipschitz constants of ∇L_val and ∇L_train and
L3 = max(L1, L2). This module computes the bounds (`step_size_bounds`),
estimates L1 and L2 by sampling (`estimate_lipschitz`), checks a logged
trajectory for ascent steps (`descent_check`) and measures how far a state
is from solving the equilibrium equations

    λ∇_w L_train(w,α) + β(w − y) = 0
    ∇_y L_val(y,α)    + β(y − w) = 0
    λ∇_α L_train(w,α) + ∇_α L_val(y,α) = 0

(`equilibrium_residual`). For the solvable quadratic model the equations
are linear and `quadratic_equilibrium` solves them exactly; the functions
accept `fractions.Fraction` arguments and then compute in exact arithmetic.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .core import NonUniqueEquilibriumError, ParamVector, TrajectoryGapError
from .objectives import eval_lagrangian
from .utils import spawn_rngs

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepSizeBounds:
    """Lipschitz constants and the learning-rate bounds derived from them."""
    L1: float
    L2: float
    L3: float
    c1: float
    c2: float
    c3: float

    def admits(self, hp):
        """Return `True` if the initial rates of `hp` are below the bounds."""
        return hp.eta_y < self.c1 and hp.eta_w < self.c2 and hp.eta_alpha < self.c3

    def halved(self, hp):
        """Return a copy of `hp` with every rate at half of its bound."""
        return hp.replace(eta_y=self.c1 / 2, eta_w=self.c2 / 2, eta_alpha=self.c3 / 2)


@dataclass(frozen=True)
class EquilibriumResidual:
    """Norms of the three left-hand sides of the equilibrium equations."""
    r_w: float
    r_y: float
    r_alpha: float

    def max(self):
        return max(self.r_w, self.r_y, self.r_alpha)


def step_size_bounds(L1, L2, hp):
    """
    Compute the descent bounds for the Lipschitz constants `L1`, `L2`.

    Parameters
    ==========
    L1 : Lipschitz constant of ∇L_val, > 0
    L2 : Lipschitz constant of ∇L_train, > 0
    hp : `HyperParams`, `lam` and `beta` are used

    Returns
    =======
    `StepSizeBounds`
    """
    if not L1 > 0 or not L2 > 0:
        raise ValueError(f"Lipschitz constants must be positive, "
                         f"L1={L1} and L2={L2} were given.")
    L3 = max(L1, L2)
    shared = hp.beta / 2 + (1 + hp.lam) * L3 / 2
    c1 = 0.5 / (L1 / 2 + shared)
    c2 = 0.5 / (L2 / 2 + shared)
    c3 = 1 / ((1 + hp.lam) * L3)
    return StepSizeBounds(L1, L2, L3, c1, c2, c3)


def _uniform(generator, box, name, segments):
    try:
        low, high = box[name]
    except KeyError:
        raise ValueError(f"The box has no interval for `{name}`.")
    if not low < high:
        raise ValueError(f"Degenerate box interval for `{name}`: [{low}, {high}].")
    size = sum(int(np.prod(shape, dtype=np.int64)) for _, _, shape in segments)
    return ParamVector(generator.uniform(low, high, size), segments)


def _max_ratio(generator, obj, box, weight_name, loss, n_samples):
    grad_weights = obj.grad_y_val if loss == "val" else obj.grad_w_train
    grad_alpha = obj.grad_alpha_val if loss == "val" else obj.grad_alpha_train

    def gradient(u, a):
        return np.concatenate([grad_weights(u, a).values, grad_alpha(u, a).values])

    best = 0.
    for _ in range(n_samples):
        u, a = (_uniform(generator, box, weight_name, obj.weight_segments),
                _uniform(generator, box, "alpha", obj.alpha_segments))
        u2, a2 = (_uniform(generator, box, weight_name, obj.weight_segments),
                  _uniform(generator, box, "alpha", obj.alpha_segments))
        dist = np.linalg.norm(np.concatenate([u.values - u2.values,
                                              a.values - a2.values]))
        if dist == 0:
            continue
        ratio = np.linalg.norm(gradient(u, a) - gradient(u2, a2)) / dist
        best = max(best, float(ratio))
    return best


def estimate_lipschitz(obj, box, n_samples, seed=0):
    """
    Estimate Lipschitz constants of ∇L_val and ∇L_train by sampling.

    Pairs of points are drawn uniformly from the box and the largest
    observed ratio ‖∇L(z) − ∇L(z')‖ / ‖z − z'‖ is returned for each loss,
    with z = (y, α) for L_val and z = (w, α) for L_train. The results are
    lower bounds of the true constants.

    Parameters
    ==========
    obj : `BilevelObjective`
    box : dict
        `{"y": (low, high), "w": (low, high), "alpha": (low, high)}`, every
        coordinate of the variable is drawn from its interval
    n_samples : int >= 2
        number of sampled pairs per loss
    seed : seed of the generator

    Returns
    =======
    `(L1, L2)`
    """
    if n_samples < 2:
        raise ValueError(f"At least 2 samples are needed, {n_samples} was given.")
    val_rng, train_rng = spawn_rngs(seed, 2)
    L1 = _max_ratio(val_rng, obj, box, "y", "val", n_samples)
    L2 = _max_ratio(train_rng, obj, box, "w", "train", n_samples)
    logger.info("lipschitz estimate L1=%.6g L2=%.6g samples=%d (lower bounds)",
                L1, L2, n_samples)
    return L1, L2


def descent_check(traj, obj, hp, slack=1e-12):
    """
    Return the steps at which the Lagrangian went up.

    The trajectory must be logged at every step. The result is a list of
    `(t, L_t, L_{t+1})` with `L_{t+1} > L_t + slack`.
    """
    records = list(traj)
    for prev, nxt in zip(records, records[1:]):
        if nxt.t != prev.t + 1:
            raise TrajectoryGapError(f"The trajectory skips steps {prev.t + 1}.."
                                     f"{nxt.t - 1}; descent cannot be certified.")

    values = [eval_lagrangian(obj, r.y, r.w, r.alpha, hp) for r in records]
    violations = [(prev.t, L0, L1)
                  for prev, L0, L1 in zip(records, values, values[1:])
                  if L1 > L0 + slack]
    if violations:
        logger.info("descent violations=%d first_t=%d", len(violations),
                    violations[0][0])
    return violations


def equilibrium_residual(obj, state, hp):
    """Residuals of the equilibrium equations at `state`."""
    w, y, alpha = state.w, state.y, state.alpha
    r_w = hp.lam * obj.grad_w_train(w, alpha) + hp.beta * (w - y)
    r_y = obj.grad_y_val(y, alpha) + hp.beta * (y - w)
    r_alpha = hp.lam * obj.grad_alpha_train(w, alpha) + obj.grad_alpha_val(y, alpha)
    return EquilibriumResidual(r_w.norm(), r_y.norm(), r_alpha.norm())


def quadratic_equilibrium(lam, beta):
    """
    Exact solution `(alpha_bar, w_bar, y_bar)` of the equilibrium equations
    of the solvable quadratic model.

    With D = 4λβ − β − 2λ the solution is

        ᾱ = 4λβ/D,   w̄ = 2β(2λ − 1)/D,   ȳ = (4λβ − 2β − 4λ)/D,

    which satisfies w̄ = (2λ − 1)/(2λ)·ᾱ and ᾱ + β(ȳ − w̄) = 0. As β grows
    it tends to `limit_equilibrium(lam)`.

    Raises `NonUniqueEquilibriumError` for λ = 1/4 (where the large-penalty
    limit is not unique) and whenever D = 0; raises `ValueError` for λ = 0
    or β <= 0.
    """
    if lam == 0:
        raise ValueError("The training-loss weight λ must be nonzero.")
    if not beta > 0:
        raise ValueError(f"The penalty β must be positive, {beta} was given.")
    if 4 * lam == 1:
        raise NonUniqueEquilibriumError("The equilibrium is not unique for λ = 1/4.")
    D = 4 * lam * beta - beta - 2 * lam
    if D == 0:
        raise NonUniqueEquilibriumError(f"The equilibrium system is singular for "
                                        f"λ={lam}, β={beta}.")
    alpha_bar = 4 * lam * beta / D
    w_bar = 2 * beta * (2 * lam - 1) / D
    y_bar = (4 * lam * beta - 2 * beta - 4 * lam) / D
    return alpha_bar, w_bar, y_bar


def limit_equilibrium(lam):
    """
    Equilibrium `(alpha_bar, w_bar)` of the quadratic model for β → ∞
    (the weights y and w coincide): `(4λ/(4λ−1), (4λ−2)/(4λ−1))`.
    """
    if lam == 0:
        raise ValueError("The training-loss weight λ must be nonzero.")
    if 4 * lam == 1:
        raise NonUniqueEquilibriumError("The equilibrium is not unique for λ = 1/4.")
    return 4 * lam / (4 * lam - 1), (4 * lam - 2) / (4 * lam - 1)
