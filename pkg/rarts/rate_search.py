"""
Find the largest constant learning rate that keeps the relaxed Lagrangian
descending along a RARTS run.
"""
import logging

from .core import DivergenceError, StopRule
from .diagnostics import descent_check
from .solvers import RARTS

logger = logging.getLogger(__name__)


def descends(obj, init, hp, eta, steps=200, slack=1e-12):
    """
    Return `True` if a `steps`-long RARTS run from `init` with all three
    learning rates set to `eta` shows no descent violation.
    """
    trial = hp.replace(eta_w=eta, eta_y=eta, eta_alpha=eta, schedule="constant")
    solver = RARTS(obj, trial, StopRule(max_steps=steps, divergence_bound=1e150))
    try:
        traj = solver.run(init)
    except DivergenceError:
        return False
    return not descent_check(traj, obj, trial, slack)


def bin_search_rate(obj, init, hp, steps=200, low=1e-6, high=1.0, rel_tol=1e-3):
    """Search for the largest common learning rate by binary search.

    Runs of `steps` RARTS steps from `init` are checked with
    `descent_check`. The search assumes that small rates descend and large
    ones do not, and it stops when the bracket `[low, high]` is narrower
    than `rel_tol * low`. The hyper-parameters other than the rates are
    taken from `hp`.

    Returns the largest rate found to descend (`high` itself if it does).
    Raises `ValueError` if even `low` violates descent.
    """
    if not 0 < low < high:
        raise ValueError(f"Need 0 < low < high, got low={low}, high={high}.")
    if not descends(obj, init, hp, low, steps):
        raise ValueError(f"No learning rate >= {low} is small enough.")
    if descends(obj, init, hp, high, steps):
        return high

    while high - low > rel_tol * low:
        current = (low + high) / 2
        if descends(obj, init, hp, current, steps):
            low = current
        else:
            high = current
        logger.debug("bin_search_rate low=%.6g high=%.6g", low, high)

    logger.info("bin_search_rate result=%.6g steps=%d", low, steps)
    return low
