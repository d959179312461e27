"""
Core module defining the basic data structures and exceptions of rarts.

## Parameter vectors

All variables of a search (the weights `w` of the network trained on the
training split, the weights `y` of the auxiliary network trained on the
validation split, and the architecture parameters `alpha`) are stored as
`ParamVector` objects: a flat float64 vector together with an ordered list
of named segments `(name, offset, shape)`. The segments tile the vector
exactly. Two vectors are *compatible* if their segment descriptors are
identical; `w` and `y` must always be compatible because both networks share
the same architecture (and therefore the same tensor shapes).

## Search state and trajectories

A `SearchState` is the iterate triple `(w, y, alpha)` plus the step counter
`t`. Solvers turn one state into the next one and log selected states into a
`Trajectory`, a list of `TrajectoryRecord`s strictly increasing in `t`.

## Hyper-parameters and stopping

`HyperParams` gathers λ, β, the three learning rates (with an optional
schedule), the DARTS-2 virtual step ξ and the finite-difference scale.
`StopRule` tells `Solver.run` when to stop. Both validate themselves on
creation and raise `ConfigError` on invalid values.

## Exceptions

All exceptions of the package are defined at the bottom of this module.
"""
import math
from dataclasses import dataclass, asdict, fields

import numpy as np


class ParamVector:
    """
    Flat real vector with named segments.

    Parameters
    ==========
    values : array-like
        the flat values; copied and converted to float64
    segments : iterable of `(name, offset, shape)`
        ordered segment descriptors; they must tile `values` exactly

    Raises `ShapeError` if the segments leave gaps, overlap, or do not
    cover the vector.
    """

    def __init__(self, values, segments):
        self.values = np.array(values, dtype=np.float64).ravel()
        self.segments = tuple((str(name), int(offset), tuple(int(s) for s in shape))
                              for name, offset, shape in segments)
        self._index = {}

        expected = 0
        for name, offset, shape in self.segments:
            if offset != expected:
                raise ShapeError(f"Segment `{name}` starts at {offset}, "
                                 f"expected {expected}.")
            if name in self._index:
                raise ShapeError(f"Segment `{name}` is defined twice.")
            size = int(np.prod(shape, dtype=np.int64))
            self._index[name] = (offset, size, shape)
            expected += size
        if expected != self.values.size:
            raise ShapeError(f"Segments cover {expected} entries but the "
                             f"vector has {self.values.size}.")

    @classmethod
    def from_arrays(cls, arrays):
        """Build a vector from an ordered iterable of `(name, array)` pairs."""
        segments, chunks = [], []
        offset = 0
        for name, array in arrays:
            array = np.asarray(array, dtype=np.float64)
            segments.append((name, offset, array.shape))
            chunks.append(array.ravel())
            offset += array.size
        values = np.concatenate(chunks) if chunks else np.zeros(0)
        return cls(values, segments)

    @classmethod
    def zeros(cls, segments):
        """Return the zero vector with the given segments."""
        size = sum(int(np.prod(shape, dtype=np.int64)) for _, _, shape in segments)
        return cls(np.zeros(size), segments)

    @property
    def size(self):
        return self.values.size

    def names(self):
        """Return the segment names in order."""
        return [name for name, _, _ in self.segments]

    def segment(self, name):
        """Return the segment `name` as a reshaped view into `values`."""
        try:
            offset, size, shape = self._index[name]
        except KeyError:
            raise KeyError(f"No segment `{name}`; segments are {self.names()}")
        return self.values[offset:offset + size].reshape(shape)

    def arrays(self):
        """Return `[(name, array)]` with reshaped views of all segments."""
        return [(name, self.segment(name)) for name in self.names()]

    def compatible(self, other):
        """Return `True` if `other` has identical segment descriptors."""
        return isinstance(other, ParamVector) and self.segments == other.segments

    def check_compatible(self, other, what="vectors"):
        if not self.compatible(other):
            raise ShapeError(f"The {what} are not shape-compatible: "
                             f"{self.segments} vs "
                             f"{getattr(other, 'segments', other)}")

    def like(self, values):
        """Return a new vector with the segments of `self` and `values`."""
        return ParamVector(values, self.segments)

    def copy(self):
        return ParamVector(self.values, self.segments)

    def norm(self):
        """Euclidean norm of the whole vector."""
        return float(np.linalg.norm(self.values))

    def is_finite(self):
        return bool(np.all(np.isfinite(self.values)))

    def __add__(self, other):
        self.check_compatible(other)
        return self.like(self.values + other.values)

    def __sub__(self, other):
        self.check_compatible(other)
        return self.like(self.values - other.values)

    def __mul__(self, scalar):
        return self.like(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.like(-self.values)

    def __repr__(self):
        names = ", ".join(f"{n}{list(s)}" for n, _, s in self.segments)
        return f"ParamVector({names}; {np.array2string(self.values, precision=6)})"


_SCHEDULES = ("constant", "cosine")
_VIRTUAL_AT = ("post", "pre")


@dataclass
class HyperParams:
    """
    Hyper-parameters of the relaxed Lagrangian and of the step rules.

    Parameters
    ==========
    lam : float > 0
        weight λ of the training loss in the Lagrangian
    beta : float >= 0
        penalty β on ‖y − w‖²
    eta_w, eta_y, eta_alpha : float > 0
        initial learning rates of `w`, `y` and `alpha`
    xi : float >= 0
        virtual step of second order DARTS
    fd_epsilon_scale : float > 0
        scale of the finite-difference step used by second order DARTS
        when the objective offers no exact mixed derivative
    schedule : "constant" | "cosine"
        learning-rate schedule; cosine decays to `lr_floor` times the
        initial rate over `schedule_horizon` steps and stays there
    schedule_horizon : int >= 1
    lr_floor : float in (0, 1]
        the strictly positive limit of the cosine schedule (as a fraction
        of the initial rate)
    alpha_warmup : int >= 0
        number of initial steps in which the `alpha` step is suppressed
    darts2_virtual_at : "post" | "pre"
        base point of the second order DARTS virtual step: the freshly
        updated weights (default) or the weights before the step
    """
    lam: float = 1.0
    beta: float = 0.0
    eta_w: float = 0.01
    eta_y: float = 0.01
    eta_alpha: float = 0.01
    xi: float = 0.0
    fd_epsilon_scale: float = 0.01
    schedule: str = "constant"
    schedule_horizon: int = 10000
    lr_floor: float = 0.1
    alpha_warmup: int = 0
    darts2_virtual_at: str = "post"

    def __post_init__(self):
        for name in ("lam", "beta", "eta_w", "eta_y", "eta_alpha", "xi",
                     "fd_epsilon_scale", "lr_floor"):
            config_number(getattr(self, name), f"hyper_params.{name}")
        for name in ("lam", "eta_w", "eta_y", "eta_alpha", "fd_epsilon_scale"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"Hyper-parameter `{name}` must be strictly "
                                  f"positive, {getattr(self, name)} was given.")
        for name in ("beta", "xi"):
            if getattr(self, name) < 0:
                raise ConfigError(f"Hyper-parameter `{name}` must be "
                                  f"non-negative, {getattr(self, name)} was given.")
        if not 0 < self.lr_floor <= 1:
            raise ConfigError(f"`lr_floor` must be in (0, 1], "
                              f"{self.lr_floor} was given.")
        if self.schedule not in _SCHEDULES:
            raise ConfigError(f"Unknown schedule `{self.schedule}`; "
                              f"use one of {_SCHEDULES}.")
        self.schedule_horizon = config_int(self.schedule_horizon,
                                           "hyper_params.schedule_horizon", 1)
        self.alpha_warmup = config_int(self.alpha_warmup, "hyper_params.alpha_warmup", 0)
        if self.darts2_virtual_at not in _VIRTUAL_AT:
            raise ConfigError(f"`darts2_virtual_at` must be one of "
                              f"{_VIRTUAL_AT}, {self.darts2_virtual_at!r} "
                              f"was given.")

    def rates(self, t):
        """
        Return the learning rates `(eta_w, eta_y, eta_alpha)` for step `t`.

        The constant schedule returns the initial rates. The cosine schedule
        returns `eta * (floor + (1 - floor) * (1 + cos(pi * s)) / 2)` with
        `s = min(t, horizon) / horizon`, so every rate converges to the
        strictly positive limit `floor * eta`. During the warm-up the
        `alpha` rate is 0.
        """
        factor = 1.0
        if self.schedule == "cosine":
            s = min(t, self.schedule_horizon) / self.schedule_horizon
            factor = self.lr_floor + (1 - self.lr_floor) * 0.5 * (1 + math.cos(math.pi * s))
        eta_alpha = 0.0 if t < self.alpha_warmup else self.eta_alpha * factor
        return self.eta_w * factor, self.eta_y * factor, eta_alpha

    def replace(self, **changes):
        """Return a validated copy with `changes` applied."""
        values = asdict(self)
        values.update(changes)
        return HyperParams(**values)

    def to_dict(self):
        values = asdict(self)
        values["lambda"] = values.pop("lam")
        return values

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        _reject_unknown(cls, data, "hyper_params")
        return cls(**data)


@dataclass
class StopRule:
    """
    When to stop a run.

    Parameters
    ==========
    max_steps : int >= 1
    grad_tol : float >= 0
        stop as soon as the norms of all three update directions are below
        `grad_tol` (0 disables the test)
    divergence_bound : float > 0
        abort with `DivergenceError` when the norm of any iterate exceeds it
    """
    max_steps: int = 10000
    grad_tol: float = 0.0
    divergence_bound: float = 1e8

    def __post_init__(self):
        self.max_steps = config_int(self.max_steps, "stop.max_steps", 1)
        config_number(self.grad_tol, "stop.grad_tol")
        config_number(self.divergence_bound, "stop.divergence_bound")
        if self.grad_tol < 0:
            raise ConfigError("`grad_tol` must be non-negative.")
        if not self.divergence_bound > 0:
            raise ConfigError("`divergence_bound` must be positive.")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        _reject_unknown(cls, data, "stop")
        return cls(**data)


def _reject_unknown(cls, data, where):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in `{where}`: {unknown}")


def config_number(value, name):
    """Return `value` as a float, raise `ConfigError` unless it is a finite number."""
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)) \
            or not math.isfinite(value):
        raise ConfigError(f"`{name}` must be a finite number, {value!r} was given.")
    return float(value)


def config_int(value, name, minimum=None):
    """
    Return `value` as an int.

    Integral floats such as `2.0` are accepted. Raises `ConfigError` for
    anything else and for values below `minimum`.
    """
    if config_number(value, name) != int(value):
        raise ConfigError(f"`{name}` must be an integer, {value!r} was given.")
    if minimum is not None and value < minimum:
        raise ConfigError(f"`{name}` must be at least {minimum}, {value!r} was given.")
    return int(value)


class SearchState:
    """
    The iterate triple `(w, y, alpha)` and the step counter `t`.

    `w` and `y` must be compatible `ParamVector`s.
    """

    def __init__(self, w, y, alpha, t=0):
        w.check_compatible(y, "weights w and y")
        if t < 0:
            raise ValueError(f"Step counter must be non-negative, {t} was given.")
        self.w = w
        self.y = y
        self.alpha = alpha
        self.t = int(t)

    def copy(self):
        return SearchState(self.w.copy(), self.y.copy(), self.alpha.copy(), self.t)

    def max_norm(self):
        """The largest norm among the three iterates."""
        return max(self.w.norm(), self.y.norm(), self.alpha.norm())

    def is_finite(self):
        return self.w.is_finite() and self.y.is_finite() and self.alpha.is_finite()

    def summary(self):
        """Plain-python summary used in reports."""
        return {"t": self.t,
                "w": self.w.values.tolist(),
                "y": self.y.values.tolist(),
                "alpha": self.alpha.values.tolist()}

    def __repr__(self):
        return (f"SearchState(t={self.t}, w={self.w.values}, y={self.y.values}, "
                f"alpha={self.alpha.values})")


class TrajectoryRecord:
    """
    One logged step of a run.

    Holds copies of the iterates, the two losses, the Lagrangian, the norms
    of the three update directions (`dw`, `dy`, `dalpha`; zero for the
    initial record) and the equilibrium residuals.
    """
    __slots__ = ("t", "w", "y", "alpha", "L_train", "L_val", "L",
                 "dw", "dy", "dalpha", "r_w", "r_y", "r_alpha")

    def __init__(self, t, w, y, alpha, L_train, L_val, L,
                 dw=0.0, dy=0.0, dalpha=0.0, r_w=0.0, r_y=0.0, r_alpha=0.0):
        self.t = t
        self.w = w.copy()
        self.y = y.copy()
        self.alpha = alpha.copy()
        self.L_train = L_train
        self.L_val = L_val
        self.L = L
        self.dw, self.dy, self.dalpha = dw, dy, dalpha
        self.r_w, self.r_y, self.r_alpha = r_w, r_y, r_alpha

    def state(self):
        return SearchState(self.w.copy(), self.y.copy(), self.alpha.copy(), self.t)

    def __repr__(self):
        return (f"TrajectoryRecord(t={self.t}, L={self.L:.6g}, "
                f"alpha={self.alpha.values}, w={self.w.values})")


class Trajectory:
    """
    Ordered list of `TrajectoryRecord`s, strictly increasing in `t`.

    The attribute `solver` stores the name of the step rule that produced
    the trajectory.
    """

    def __init__(self, solver=None):
        self.solver = solver
        self.records = []

    def append(self, record):
        if self.records and record.t <= self.records[-1].t:
            raise ValueError(f"Trajectory records must be strictly increasing "
                             f"in t: {record.t} after {self.records[-1].t}.")
        self.records.append(record)

    @property
    def final(self):
        if not self.records:
            raise IndexError("The trajectory is empty.")
        return self.records[-1]

    def steps(self):
        return [r.t for r in self.records]

    def column(self, name):
        """Return the list of attribute `name` over all records."""
        return [getattr(r, name) for r in self.records]

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def _repr_svg_(self):
        from . import plot
        return plot.trajectory_to_svg(self)


### Exceptions ###
class ShapeError(ValueError):
    """Inconsistent shapes; `node` is the tape node index if known."""

    def __init__(self, message, node=None, op=None):
        super().__init__(message)
        self.node = node
        self.op = op


class NonFiniteError(ArithmeticError):
    """A non-finite value appeared in a tape node or in a solver variable."""

    def __init__(self, message, node=None, variable=None, step=None):
        super().__init__(message)
        self.node = node
        self.variable = variable
        self.step = step


class TapeOrderError(Exception):
    pass


class ConfigError(ValueError):
    pass


class DivergenceError(Exception):
    """
    A run or a retraining left the finite or bounded region.

    `state` is the last finite `SearchState` (runs) and `trajectory` the
    records logged so far; `epoch` is set by retraining.
    """

    def __init__(self, message, state=None, trajectory=None, step=None, epoch=None):
        super().__init__(message)
        self.state = state
        self.trajectory = trajectory
        self.step = step
        self.epoch = epoch


class NonUniqueEquilibriumError(ValueError):
    pass


class TrajectoryGapError(ValueError):
    pass


class PlotError(ValueError):
    pass
