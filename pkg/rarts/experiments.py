"""
Experiments driven by JSON configurations.

An `ExperimentConfig` describes one of four experiment kinds:

 * **quadratic** : a solver on the solvable quadratic model
                   (`run_quadratic`);
 * **search**    : architecture search on a synthetic task, followed by
                   discretization and retraining (`run_search`);
 * **retrain**   : retraining of a given genotype (`run_retrain`);
 * **sweep**     : quadratic runs over a grid of λ, β and seeds (`sweep`).

Parsing is strict: unknown keys raise `ConfigError`. `to_dict()` writes
every field, so a parsed and re-serialized config parses to an equal one.

Every runner writes its artifacts to `config.out` and returns a `RunReport`
whose manifest lists the written files with their sizes. The report itself
is written last as `report.json` and is not part of its own manifest.
"""
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, asdict

import numpy as np

from . import io
from .core import (ConfigError, DivergenceError, HyperParams, StopRule, config_int,
                   config_number)
from .diagnostics import (descent_check, equilibrium_residual,
                          quadratic_equilibrium)
from .objectives import quadratic_objective
from .plot import emit_plot
from .solvers import SOLVERS, run
from .supernet import (ArchParams, CellSpec, discretize, gen_task,
                       loss_and_grads, retrain, supernet_objective)

logger = logging.getLogger(__name__)

KINDS = ("quadratic", "search", "retrain", "sweep")


def _strict(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"`{where}` must be a JSON object.")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in `{where}`: {unknown}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"Invalid `{where}`: {e}")


@dataclass
class InitSpec:
    """Initial point of a quadratic run; `y` defaults to `w`."""
    alpha: float = 2.0
    w: float = -2.0
    y: float = None

    def __post_init__(self):
        config_number(self.alpha, "init.alpha")
        config_number(self.w, "init.w")
        if self.y is not None:
            config_number(self.y, "init.y")


@dataclass
class TaskSpec:
    """Synthetic task of a search; `teacher_ops` pins the teacher genotype."""
    n_train: int = 256
    n_val: int = 256
    n_test: int = 256
    noise_std: float = 0.0
    teacher_ops: list = None
    batch_size: int = None
    init_scale: float = 1.0

    def __post_init__(self):
        for name in ("n_train", "n_val", "n_test"):
            setattr(self, name, config_int(getattr(self, name), f"task.{name}", 1))
        if config_number(self.noise_std, "task.noise_std") < 0:
            raise ConfigError(f"`task.noise_std` must be non-negative, "
                              f"{self.noise_std} was given.")
        if config_number(self.init_scale, "task.init_scale") <= 0:
            raise ConfigError(f"`task.init_scale` must be positive, "
                              f"{self.init_scale} was given.")
        if self.batch_size is not None:
            self.batch_size = config_int(self.batch_size, "task.batch_size", 1)
        if self.teacher_ops is not None and (
                not isinstance(self.teacher_ops, (list, tuple))
                or not all(isinstance(op, str) for op in self.teacher_ops)):
            raise ConfigError(f"`task.teacher_ops` must be a list of operation "
                              f"names, {self.teacher_ops!r} was given.")


@dataclass
class RetrainSpec:
    epochs: int = 2000
    lr: float = 0.1

    def __post_init__(self):
        self.epochs = config_int(self.epochs, "retrain.epochs", 1)
        if not config_number(self.lr, "retrain.lr") > 0:
            raise ConfigError(f"The retraining rate must be positive, {self.lr} "
                              f"was given.")


@dataclass
class SweepSpec:
    lambdas: list = field(default_factory=lambda: [10.0])
    betas: list = field(default_factory=lambda: [10.0])

    def __post_init__(self):
        if not isinstance(self.lambdas, list) or not isinstance(self.betas, list) \
                or not self.lambdas or not self.betas:
            raise ConfigError("Sweep grids must be non-empty lists.")
        for name in ("lambdas", "betas"):
            for value in getattr(self, name):
                config_number(value, f"sweep.{name}")


@dataclass
class ExperimentConfig:
    """
    Parameters
    ==========
    kind : "quadratic" | "search" | "retrain" | "sweep"
    solver : name of the step rule (see `rarts.solvers.SOLVERS`)
    hyper_params : `HyperParams`
    stop : `StopRule`
    seeds : non-empty list of ints
    log_every : trajectory logging period
    out : output directory
    init : `InitSpec` of quadratic runs
    mixed : mixed-derivative mode of second order DARTS
    plot : write the SVG phase plot of quadratic runs
    cell : `CellSpec` of the search space
    task : `TaskSpec`
    retrain : `RetrainSpec`
    genotype : operations of the retrained cell, or the path of a genotype
               JSON file (relative to the config file)
    sweep : `SweepSpec`
    compare : further solvers run on the same search tasks
    latency_weight : reserved for an additive latency penalty; must be 0
    record_timing : store the wall-clock duration in the report (off by
                    default so that reports are reproducible byte by byte)
    """
    kind: str = "quadratic"
    solver: str = "rarts"
    hyper_params: HyperParams = field(default_factory=HyperParams)
    stop: StopRule = field(default_factory=StopRule)
    seeds: list = field(default_factory=lambda: [0])
    log_every: int = 1
    out: str = "out"
    init: InitSpec = field(default_factory=InitSpec)
    mixed: str = "auto"
    plot: bool = True
    cell: CellSpec = field(default_factory=CellSpec)
    task: TaskSpec = field(default_factory=TaskSpec)
    retrain: RetrainSpec = field(default_factory=RetrainSpec)
    genotype: list = None
    sweep: SweepSpec = field(default_factory=SweepSpec)
    compare: list = field(default_factory=list)
    latency_weight: float = 0.0
    record_timing: bool = False

    def __post_init__(self):
        if not isinstance(self.kind, str) or self.kind not in KINDS:
            raise ConfigError(f"Unknown experiment kind `{self.kind}`; use one of {KINDS}.")
        for solver in [self.solver] + list(self.compare):
            if not isinstance(solver, str) or solver not in SOLVERS:
                raise ConfigError(f"Unknown solver `{solver}`; use one of "
                                  f"{sorted(SOLVERS)}.")
        if not isinstance(self.seeds, list) or not self.seeds:
            raise ConfigError(f"`seeds` must be a non-empty list, {self.seeds!r} was given.")
        if any(isinstance(s, bool) or not isinstance(s, int) or s < 0 for s in self.seeds):
            raise ConfigError(f"Seeds must be non-negative integers, {self.seeds} "
                              f"was given.")
        self.log_every = config_int(self.log_every, "log_every", 1)
        if self.mixed not in ("auto", "exact", "fd"):
            raise ConfigError(f"Unknown mixed-derivative mode `{self.mixed}`.")
        if config_number(self.latency_weight, "latency_weight") != 0:
            raise ConfigError("The latency penalty is not implemented; "
                              "`latency_weight` must be 0.")
        if self.kind == "retrain" and self.genotype is None:
            raise ConfigError("A retrain experiment needs a `genotype`.")

    @classmethod
    def from_dict(cls, data, base_dir="."):
        """
        Parse a configuration dict.

        Every malformed value raises `ConfigError`, including values of the
        wrong type deep inside nested sections.
        """
        try:
            return cls._parse(data, base_dir)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid configuration: {e}") from e

    @classmethod
    def _parse(cls, data, base_dir):
        if not isinstance(data, dict):
            raise ConfigError("The configuration must be a JSON object.")
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {unknown}")
        nested = {"hyper_params": HyperParams.from_dict, "stop": StopRule.from_dict,
                  "cell": CellSpec.from_dict,
                  "init": lambda d: _strict(InitSpec, d, "init"),
                  "task": lambda d: _strict(TaskSpec, d, "task"),
                  "retrain": lambda d: _strict(RetrainSpec, d, "retrain"),
                  "sweep": lambda d: _strict(SweepSpec, d, "sweep")}
        for key, parse in nested.items():
            if key in data:
                if not isinstance(data[key], dict):
                    raise ConfigError(f"`{key}` must be a JSON object.")
                try:
                    data[key] = parse(data[key])
                except TypeError as e:
                    raise ConfigError(f"Invalid `{key}`: {e}")
        if isinstance(data.get("genotype"), str):
            path = os.path.join(base_dir, data["genotype"])
            if not os.path.exists(path):
                raise ConfigError(f"Genotype file `{path}` does not exist.")
            data["genotype"] = io.read_genotype(path)
        return cls(**data)

    def to_dict(self):
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data["hyper_params"] = self.hyper_params.to_dict()
        data["stop"] = self.stop.to_dict()
        data["cell"] = self.cell.to_dict()
        for key in ("init", "task", "retrain", "sweep"):
            data[key] = asdict(data[key])
        data["seeds"] = list(self.seeds)
        data["compare"] = list(self.compare)
        data["genotype"] = None if self.genotype is None else list(self.genotype)
        return data


def load_config(path):
    """Parse the JSON config at `path`."""
    try:
        data = io.read_json(path)
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot read the configuration `{path}`: {e}")
    return ExperimentConfig.from_dict(data, os.path.dirname(os.path.abspath(path)))


@dataclass
class RunReport:
    """
    Summary of an experiment.

    `files` is the manifest `[{"path": ..., "bytes": ...}]` with paths
    relative to the output directory.
    """
    config: dict
    final: dict = None
    residuals: dict = None
    descent_violations: int = None
    duration: float = None
    files: list = field(default_factory=list)
    results: list = field(default_factory=list)
    error: str = None

    def add_file(self, out, path):
        self.files.append({"path": os.path.relpath(path, out),
                           "bytes": os.path.getsize(path)})

    def to_dict(self):
        return asdict(self)

    def write(self, out):
        return io.write_json(self.to_dict(), os.path.join(out, "report.json"))


def _prepare(config, kind):
    if config.kind != kind:
        raise ConfigError(f"Expected a `{kind}` configuration, got `{config.kind}`.")
    os.makedirs(config.out, exist_ok=True)
    return RunReport(config.to_dict()), time.perf_counter()


def _finish(config, report, start):
    if config.record_timing:
        report.duration = time.perf_counter() - start
    report.write(config.out)
    return report


def _solver_kwargs(config, solver):
    return {"mixed": config.mixed} if solver == "darts2" else {}


def _quadratic_equilibrium_or_error(lam, beta):
    try:
        return quadratic_equilibrium(lam, beta), None
    except ValueError as e:
        return None, f"{type(e).__name__}: {e}"


def run_quadratic(config):
    """
    Run the configured solver on the quadratic model.

    Writes `trajectory.csv`, the phase plot `trajectory.svg` (if
    `config.plot`) and `report.json`. On divergence the partial trajectory
    and the report are written before `DivergenceError` is re-raised.
    """
    report, start = _prepare(config, "quadratic")
    obj = quadratic_objective()
    hp = config.hyper_params
    init = obj.point(config.init.alpha, config.init.w, config.init.y)
    csv_path = os.path.join(config.out, "trajectory.csv")

    try:
        traj = run(config.solver, obj, init, hp, config.stop, config.log_every,
                   **_solver_kwargs(config, config.solver))
    except DivergenceError as e:
        if e.trajectory is not None and len(e.trajectory):
            report.add_file(config.out, io.write_quadratic_csv(e.trajectory, csv_path))
        if e.state is not None:
            report.final = e.state.summary()
        report.error = str(e)
        _finish(config, report, start)
        raise

    report.add_file(config.out, io.write_quadratic_csv(traj, csv_path))
    final = traj.final
    report.final = final.state().summary()
    report.residuals = {"r_w": final.r_w, "r_y": final.r_y, "r_alpha": final.r_alpha}
    if config.log_every == 1:
        report.descent_violations = len(descent_check(traj, obj, hp))

    equilibrium, error = _quadratic_equilibrium_or_error(hp.lam, hp.beta)
    report.results.append({"equilibrium": None if equilibrium is None
                           else [float(v) for v in equilibrium],
                           "equilibrium_error": error})
    if config.plot:
        spec = {"title": config.solver}
        if equilibrium is not None:
            spec["equilibrium"] = [float(equilibrium[0]), float(equilibrium[1])]
        svg_path = emit_plot(csv_path, os.path.join(config.out, "trajectory.svg"), spec)
        report.add_file(config.out, svg_path)
    logger.info("quadratic solver=%s alpha=%.6g w=%.6g", config.solver,
                final.alpha.values[0], final.w.values[0])
    return _finish(config, report, start)


def _search_one(config, solver, seed, obj, task, out, report):
    init = obj.init_state(seed, config.task.init_scale)
    prefix = os.path.join(out, f"{solver}_seed{seed}")
    try:
        traj = run(solver, obj, init, config.hyper_params, config.stop, config.log_every,
                   **_solver_kwargs(config, solver))
    except DivergenceError as e:
        if e.trajectory is not None and len(e.trajectory):
            report.add_file(out, io.write_search_csv(e.trajectory,
                                                     prefix + "_trajectory.csv"))
        raise
    report.add_file(out, io.write_search_csv(traj, prefix + "_trajectory.csv"))

    arch = ArchParams(traj.final.alpha)
    cell = discretize(arch, config.cell)
    report.add_file(out, io.write_genotype(cell, prefix + "_genotype.json"))
    weights, test_mse = retrain(cell, task, config.retrain.epochs, config.retrain.lr, seed)
    X_val, Y_val = task.split("val")
    val_mse = loss_and_grads(cell, weights, None, X_val, Y_val)[0]

    recovered = [a == b for a, b in zip(cell.genotype, task.teacher.genotype)]
    return {"solver": solver, "seed": seed,
            "genotype": list(cell.genotype),
            "teacher": list(task.teacher.genotype),
            "recovered": recovered,
            "search_val_loss": traj.final.L_val,
            "val_mse": val_mse,
            "test_mse": test_mse,
            "alpha_softmax": arch.probabilities().tolist()}


def run_search(config):
    """
    Search, discretize and retrain for every seed (and every solver of
    `config.compare`).

    Writes per run `<solver>_seed<seed>_trajectory.csv` and
    `<solver>_seed<seed>_genotype.json`; with more than one solver also
    `comparison.csv` with one row per seed.

    If a search or a retraining diverges, the report is written with the
    results so far, the partial trajectory and the error before
    `DivergenceError` is re-raised.
    """
    report, start = _prepare(config, "search")
    solvers = [config.solver] + [s for s in config.compare if s != config.solver]
    for seed in config.seeds:
        task = gen_task(seed, config.cell, config.task.n_train, config.task.n_val,
                        config.task.n_test, config.task.noise_std,
                        config.task.teacher_ops)
        obj = supernet_objective(config.cell, task, config.task.batch_size, seed)
        for solver in solvers:
            try:
                result = _search_one(config, solver, seed, obj, task, config.out, report)
            except DivergenceError as e:
                report.error = f"{solver} seed {seed}: {e}"
                _finish(config, report, start)
                raise
            logger.info("search solver=%s seed=%d genotype=%s recovered=%s test_mse=%.6g",
                        solver, seed, ",".join(result["genotype"]),
                        all(result["recovered"]), result["test_mse"])
            report.results.append(result)

    if len(solvers) > 1:
        header = ["seed"] + [f"{s}_{col}" for s in solvers
                             for col in ("val_mse", "test_mse", "recovered")]
        rows = []
        for seed in config.seeds:
            row = [str(seed)]
            for s in solvers:
                r = next(r for r in report.results if r["seed"] == seed and r["solver"] == s)
                row += [repr(float(r["val_mse"])), repr(float(r["test_mse"])),
                        str(int(all(r["recovered"])))]
            rows.append(row)
        path = io.write_csv(os.path.join(config.out, "comparison.csv"), header, rows)
        report.add_file(config.out, path)
    return _finish(config, report, start)


def run_retrain(config):
    """Retrain `config.genotype` on the task of every seed."""
    report, start = _prepare(config, "retrain")
    cell = config.cell.with_genotype(config.genotype)
    for seed in config.seeds:
        task = gen_task(seed, config.cell, config.task.n_train, config.task.n_val,
                        config.task.n_test, config.task.noise_std,
                        config.task.teacher_ops)
        try:
            _, test_mse = retrain(cell, task, config.retrain.epochs, config.retrain.lr, seed)
        except DivergenceError as e:
            report.error = f"seed {seed}: {e}"
            _finish(config, report, start)
            raise
        report.results.append({"seed": seed, "genotype": list(cell.genotype),
                               "teacher": list(task.teacher.genotype),
                               "test_mse": test_mse})
    return _finish(config, report, start)


SWEEP_COLUMNS = ("lambda", "beta", "seed", "alpha", "w", "y", "r_w", "r_y", "r_alpha",
                 "descent_violations", "equilibrium_alpha", "equilibrium_w",
                 "equilibrium_y", "equilibrium_error", "run_error")


def _sweep_row(job):
    """Run one grid point; errors are recorded in the row."""
    lam, beta, seed, data = job
    config = ExperimentConfig.from_dict(data)
    row = dict.fromkeys(SWEEP_COLUMNS)
    row.update({"lambda": lam, "beta": beta, "seed": seed})

    equilibrium, row["equilibrium_error"] = _quadratic_equilibrium_or_error(lam, beta)
    if equilibrium is not None:
        row["equilibrium_alpha"], row["equilibrium_w"], row["equilibrium_y"] = \
            (float(v) for v in equilibrium)

    obj = quadratic_objective()
    try:
        hp = config.hyper_params.replace(lam=lam, beta=beta)
        init = obj.point(config.init.alpha, config.init.w, config.init.y)
        traj = run(config.solver, obj, init, hp, config.stop, config.log_every,
                   **_solver_kwargs(config, config.solver))
        state = traj.final.state()
        residual = equilibrium_residual(obj, state, hp)
        row.update({"alpha": state.alpha.values[0], "w": state.w.values[0],
                    "y": state.y.values[0], "r_w": residual.r_w,
                    "r_y": residual.r_y, "r_alpha": residual.r_alpha})
        if config.log_every == 1:
            row["descent_violations"] = len(descent_check(traj, obj, hp))
    except Exception as e:
        row["run_error"] = f"{type(e).__name__}: {e}"
    return row


def sweep_workers():
    """Size of the sweep worker pool (`RARTS_WORKERS` or the CPU count)."""
    value = os.environ.get("RARTS_WORKERS")
    if value:
        try:
            workers = int(value)
        except ValueError:
            raise ConfigError(f"RARTS_WORKERS must be an integer, `{value}` was given.")
        if workers < 1:
            raise ConfigError("RARTS_WORKERS must be >= 1.")
        return workers
    return os.cpu_count() or 1


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def sweep(config):
    """
    Quadratic runs over `sweep.lambdas × sweep.betas × seeds`.

    Runs execute in a process pool of `sweep_workers()` workers; rows of
    `sweep.csv` are ordered by `(lambda, beta, seed)`.
    """
    report, start = _prepare(config, "sweep")
    data = config.to_dict()
    jobs = sorted(((float(lam), float(beta), seed, data)
                  for lam in config.sweep.lambdas
                  for beta in config.sweep.betas
                  for seed in config.seeds), key=lambda job: job[:3])
    workers = min(sweep_workers(), len(jobs))
    logger.info("sweep runs=%d workers=%d", len(jobs), workers)
    if workers == 1:
        rows = [_sweep_row(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(_sweep_row, jobs))

    path = io.write_csv(os.path.join(config.out, "sweep.csv"), SWEEP_COLUMNS,
                        ([_cell(row[c]) for c in SWEEP_COLUMNS] for row in rows))
    report.add_file(config.out, path)
    report.results = rows
    return _finish(config, report, start)


RUNNERS = {"quadratic": run_quadratic, "search": run_search,
           "retrain": run_retrain, "sweep": sweep}
