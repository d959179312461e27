"""Helpers shared by the solvers, the supernet and the CLI."""
import numpy as np

from .core import NonFiniteError


def rng(seed):
    """Return a numpy `Generator` seeded with `seed`."""
    return np.random.default_rng(seed)


def spawn_rngs(seed, count):
    """
    Return `count` independent generators derived from `seed`.

    The generators come from disjoint `SeedSequence` children, so the
    streams never overlap and do not depend on how much the others are
    consumed.
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]


def check_finite(vector, variable, step):
    """
    Raise `NonFiniteError` naming `variable` and `step` if `vector`
    (a `ParamVector` or an array) has a non-finite entry.
    """
    values = getattr(vector, "values", vector)
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"Non-finite value in `{variable}` at step {step}.",
                             variable=variable, step=step)
    return vector


def format_float(x, digits=6):
    """Deterministic short representation of a float."""
    x = float(x)
    if x == 0:
        return "0"
    text = f"{x:.{digits}g}"
    return "0" if text in ("-0", "0") else text
