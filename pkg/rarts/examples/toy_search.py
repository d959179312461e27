# -*- coding: utf-8 -*-
from rarts.core import HyperParams, StopRule
from rarts.experiments import ExperimentConfig, RetrainSpec, TaskSpec
from rarts.supernet import CellSpec

# Search space of the recovery experiment
RECOVERY_MENU = ("zero", "identity", "linear_tanh", "linear_relu")

# Teacher genotype of the recovery experiment. Without biases, tanh cells
# compute odd functions, so relu on the last edge cannot be imitated by the
# other operations.
RECOVERY_TEACHER = ("linear_tanh", "linear_relu")

# Samples per split, well above the 264 weights of the mixed cell
RECOVERY_SAMPLES = 1024


def search_hyper_params(alpha_warmup=400):
    return HyperParams(lam=1., beta=1., eta_w=0.1, eta_y=0.1, eta_alpha=0.2,
                       alpha_warmup=alpha_warmup)


# ## Teacher recovery
# Noise-free teacher with two edges; 2 000 search steps followed by
# retraining of the discretized cell. α is frozen for the first 400 steps.
def recovery_config(seeds=(0, 1, 2, 3, 4), solver="rarts", kind="search", out="out",
                    noise_std=0., compare=(), n_samples=RECOVERY_SAMPLES,
                    alpha_warmup=400, retrain_epochs=5000):
    return ExperimentConfig(
        kind=kind, solver=solver, hyper_params=search_hyper_params(alpha_warmup),
        stop=StopRule(max_steps=2000), seeds=list(seeds), log_every=50, out=out,
        cell=CellSpec(depth=2, feature_dim=8, op_menu=RECOVERY_MENU),
        task=TaskSpec(n_train=n_samples, n_val=n_samples, n_test=256,
                      noise_std=noise_std, teacher_ops=list(RECOVERY_TEACHER)),
        retrain=RetrainSpec(epochs=retrain_epochs, lr=0.1),
        genotype=list(RECOVERY_TEACHER) if kind == "retrain" else None,
        compare=list(compare))


# ## Paired comparison
# RARTS against first order DARTS on the same noisy tasks, 256 samples per
# split and a warm-up of 200 steps.
def comparison_config(seeds=tuple(range(10)), out="out"):
    return recovery_config(seeds=seeds, noise_std=0.1, compare=("darts1",), out=out,
                           n_samples=256, alpha_warmup=200, retrain_epochs=3000)
