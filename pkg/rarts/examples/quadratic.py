# -*- coding: utf-8 -*-
from rarts.core import HyperParams, StopRule
from rarts.experiments import ExperimentConfig, InitSpec, SweepSpec


# ## Trajectories on the solvable model
# All runs start at (α₀, w₀) = (2, −2) with learning rates fixed at 0.01
# and 10 000 steps. RARTS ends close to the equilibrium of the relaxed
# problem, first order DARTS at the spurious point (2, 2).
def trajectory_config(solver="rarts", lam=10., beta=10., y0=0., xi=0., out="out",
                      log_every=1):
    hp = HyperParams(lam=lam, beta=beta, eta_w=0.01, eta_y=0.01, eta_alpha=0.01, xi=xi)
    return ExperimentConfig(kind="quadratic", solver=solver, hyper_params=hp,
                            stop=StopRule(max_steps=10000),
                            init=InitSpec(alpha=2., w=-2., y=y0),
                            log_every=log_every, out=out)


# Three families of RARTS trajectories; each varies one of λ, β and y₀.
def lambda_panel(lambdas=(1., 5., 10.)):
    """β = 10, y₀ = 0"""
    return [trajectory_config(lam=lam, beta=10., y0=0.) for lam in lambdas]


def beta_panel(betas=(1., 5., 10.)):
    """λ = 10, y₀ = 0"""
    return [trajectory_config(lam=10., beta=beta, y0=0.) for beta in betas]


def y0_panel(y0s=(-1., 0., 1.)):
    """λ = β = 10"""
    return [trajectory_config(lam=10., beta=10., y0=y0) for y0 in y0s]


def darts1_baseline():
    return trajectory_config(solver="darts1")


def darts2_config(xi=0.5, mixed="auto"):
    config = trajectory_config(solver="darts2", xi=xi)
    config.mixed = mixed
    return config


def sweep_config(lambdas=(1., 10.), betas=(1., 10.), seeds=(0,), out="out"):
    config = trajectory_config(out=out, log_every=1)
    config.kind = "sweep"
    config.plot = False
    config.seeds = list(seeds)
    config.sweep = SweepSpec(list(lambdas), list(betas))
    return config
