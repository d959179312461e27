# -*- coding: utf-8 -*-
# ---
# jupyter:
#   jupytext:
#     formats: ipynb,py:light
#     text_representation:
#       extension: .py
#       format_name: light
#       format_version: '1.5'
#       jupytext_version: 1.6.0
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# # The solvable bilevel model
# This notebook compares the architecture search rules of rarts on a
# problem small enough to be solved by hand:
#
#     L_val(y, α)   = α·y − 2α + 1
#     L_train(w, α) = w² − 2α·w + α²
#
# The inner problem argmin_w L_train(w, α) gives w = α, so the bilevel
# problem minimizes α² − 2α + 1 and its solution is (α*, w*) = (1, 1).
#
# All runs start at (α₀, w₀) = (2, −2) and use learning rates 0.01.

import rarts
rarts.setup(width=480, height=360)

from rarts import quadratic_objective, run, StopRule
from rarts.diagnostics import (quadratic_equilibrium, limit_equilibrium,
                               step_size_bounds, descent_check)

obj = quadratic_objective()
start = obj.point(2., -2., y=0.)
stop = StopRule(max_steps=10000)

# ## First order DARTS
# The first order rule follows the validation gradient at the freshly
# trained weights. The validation loss is linear in α with slope y − 2, so
# α stops moving only at w = 2: the run ends at the spurious point (2, 2).

from rarts.examples.quadratic import darts1_baseline

baseline = darts1_baseline()
hp = baseline.hyper_params
darts1 = run(baseline.solver, obj, start, hp, baseline.stop, log_every=50)
darts1

darts1.final.alpha.values, darts1.final.w.values

# ## RARTS
# RARTS splits the weights into w (trained on L_train) and y (trained on
# L_val), couples them with the penalty β/2·‖y − w‖² and updates w, y and α
# in a Gauss-Seidel sweep. The run settles at the solution of the
# equilibrium equations.

rarts_traj = run("rarts", obj, start, hp, stop, log_every=50)
rarts_traj

final = rarts_traj.final
print(f"alpha={final.alpha.values[0]:.6f} w={final.w.values[0]:.6f} y={final.y.values[0]:.6f}")
print("equilibrium", quadratic_equilibrium(10., 10.))

# As β grows, y and w are pulled together and the equilibrium tends to
# (4λ/(4λ−1), (4λ−2)/(4λ−1)); for large λ this approaches the bilevel
# solution (1, 1).

for beta in (10., 100., 1000.):
    print(beta, quadratic_equilibrium(10., beta)[:2])
print("limit", limit_equilibrium(10.))

# ### Families of trajectories
# Varying λ, β and the starting point y₀ of the auxiliary weights.

from rarts.examples.quadratic import lambda_panel, beta_panel, y0_panel

for name, panel in (("lambda", lambda_panel()), ("beta", beta_panel()), ("y0", y0_panel())):
    for config in panel:
        init = obj.point(config.init.alpha, config.init.w, config.init.y)
        traj = run(config.solver, obj, init, config.hyper_params, config.stop, 100)
        params = config.hyper_params
        print(f"{name}: lambda={params.lam} beta={params.beta} y0={config.init.y} -> "
              f"alpha={traj.final.alpha.values[0]:.4f} w={traj.final.w.values[0]:.4f}")

# ## Second order DARTS
# The second order rule differentiates through one virtual training step of
# size ξ. On this model its fixed point is α = 2/(1 + 2ξ): the bilevel
# solution needs ξ = 1/2.

for xi in (0.01, 0.5):
    traj = run("darts2", obj, start, hp.replace(xi=xi), stop, log_every=100)
    print(f"xi={xi}: alpha={traj.final.alpha.values[0]:.4f} w={traj.final.w.values[0]:.4f}")

# ## Guaranteed descent
# With the exact Lipschitz constants L1 = 1 and L2 = 4 of the two gradients
# the learning-rate bounds below make the relaxed Lagrangian decrease at
# every step.

bounds = step_size_bounds(*obj.lipschitz, hp)
bounds

safe = bounds.halved(hp)
traj = run("rarts", obj, start, safe, stop)
len(descent_check(traj, obj, safe))
