"""
Module with probability vectors used by the continuous relaxation.

A row of architecture logits is turned into a probability vector over the
candidate operations by `softmax`. A probability vector has all entries in
(0, 1] and sums up to 1.
"""
import numpy as np


def softmax(logits, axis=-1):
    """
    Numerically stable softmax along `axis` (row-wise for matrices).

    Parameters
    ==========
    logits : array-like of real numbers
    axis : int
    """
    logits = np.asarray(logits, dtype=np.float64)
    z = np.exp(logits - np.max(logits, axis=axis, keepdims=True))
    return z / np.sum(z, axis=axis, keepdims=True)


def is_distribution(p, tol=1e-12):
    """
    Checks if `p` is a probability vector (each row, for matrices).

    Parameters
    ==========
    p : array-like of non-negative reals
    tol : allowed deviation of the sums from 1

    Returns
    =======
    True if all entries are in [0, 1] and every row sums up to 1 within `tol`.
    """
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0) or np.any(p > 1):
        return False
    return bool(np.all(np.abs(np.sum(p, axis=-1) - 1) <= tol))
