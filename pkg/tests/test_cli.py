#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import csv
import json
import math
import os
import tempfile

from rarts.cli import main
from rarts.experiments import ExperimentConfig, load_config, sweep_workers
from rarts.examples import default_config
from rarts.examples.quadratic import darts1_baseline, darts2_config, sweep_config
from rarts.examples.toy_search import recovery_config
from rarts.core import ConfigError
from rarts import io

# Sweeps run in-process here
os.environ["RARTS_WORKERS"] = "1"

root = tempfile.mkdtemp(prefix="rarts-test-cli-")


def read_bytes(directory):
    files = {}
    for name in sorted(os.listdir(directory)):
        with open(os.path.join(directory, name), "rb") as f:
            files[name] = f.read()
    return files


def write_config(name, data):
    return io.write_json(data, os.path.join(root, name))


# ## Quadratic runs

# +
first = os.path.join(root, "q1")
code1 = main(["quadratic", "--out", first, "--steps", "3000"])
files = read_bytes(first)
code2 = main(["quadratic", "--out", first, "--steps", "3000"])
# -

assert code1 == code2 == 0, (code1, code2)
assert sorted(files) == ["report.json", "trajectory.csv", "trajectory.svg"]
assert read_bytes(first) == files, "equal runs must give byte-identical files"

report = io.read_json(os.path.join(first, "report.json"))
assert report["config"]["hyper_params"]["lambda"] == 10.
assert report["config"]["stop"]["max_steps"] == 3000
assert report["duration"] is None
assert [f["path"] for f in report["files"]] == ["trajectory.csv", "trajectory.svg"]
assert report["files"][0]["bytes"] == os.path.getsize(os.path.join(first, "trajectory.csv"))
assert report["descent_violations"] == 0
assert abs(report["final"]["alpha"][0] - 40 / 37) < 1e-3
print("Passed test 1 for `rarts quadratic` in file test_cli.py")

# ### Overrides, divergence and configuration errors

# +
darts = os.path.join(root, "darts1")
assert main(["quadratic", "--out", darts, "--solver", "darts1", "--steps", "10000",
             "--log-every", "100"]) == 0
with open(os.path.join(darts, "trajectory.csv")) as f:
    last = list(csv.DictReader(f))[-1]
# -

assert last["t"] == "10000" and abs(float(last["alpha"]) - 2.) < 0.05
print("Passed test 2 for CLI overrides in file test_cli.py")

diverged = os.path.join(root, "diverged")
assert main(["quadratic", "--out", diverged, "--lambda", "100"]) == 3
report = io.read_json(os.path.join(diverged, "report.json"))
assert "diverge" in report["error"] or "radius" in report["error"]
assert os.path.exists(os.path.join(diverged, "trajectory.csv"))
print("Passed test 3 for exit code 3 in file test_cli.py")

bad = write_config("bad.json", {"kind": "quadratic", "hyper_params": {"lambda": 1, "mu": 2}})
assert main(["quadratic", "--config", bad, "--out", os.path.join(root, "bad")]) == 2
assert main(["quadratic", "--out", os.path.join(root, "bad"), "--lr-w", "-1"]) == 2
assert main(["search", "--config", bad]) == 2, "kind of the config must match"
assert main(["quadratic", "--out", os.path.join(root, "bad"), "--solver", "darts2"]) == 2, \
    "second order DARTS needs xi > 0"
print("Passed test 4 for exit code 2 in file test_cli.py")

# Values of the wrong type are configuration errors too
for i, (kind, data) in enumerate((
        ("quadratic", {"stop": {"max_steps": "ten"}}),
        ("quadratic", {"log_every": "x"}),
        ("quadratic", {"hyper_params": {"schedule_horizon": "x"}}),
        ("quadratic", {"hyper_params": {"alpha_warmup": [1]}}),
        ("quadratic", {"init": {"alpha": "two"}}),
        ("quadratic", {"stop": {"grad_tol": None}}),
        ("sweep", {"sweep": {"lambdas": ["ten"]}}),
        ("search", {"task": {"n_train": "many"}}),
        ("search", {"cell": {"depth": "two"}}),
        ("search", {"cell": {"op_menu": "identity"}}),
        ("search", {"retrain": {"epochs": 1.5}}))):
    wrong = write_config(f"wrong{i}.json", dict(data, kind=kind))
    assert main([kind, "--config", wrong, "--out", os.path.join(root, "wrong")]) == 2, data
    try:
        ExperimentConfig.from_dict(dict(data, kind=kind))
        assert False, f"{data} must raise ConfigError"
    except ConfigError:
        pass
assert not os.path.exists(os.path.join(root, "wrong"))
print("Passed test 5 for wrong-typed configuration values in file test_cli.py")

# ### Second order DARTS reaches (1, 1)

config = darts2_config(xi=0.5, mixed="fd")
config.out = os.path.join(root, "darts2")
path = write_config("darts2.json", config.to_dict())
assert main(["quadratic", "--config", path]) == 0
final = io.read_json(os.path.join(config.out, "report.json"))["final"]
assert abs(final["alpha"][0] - 1.) < 0.01 and abs(final["w"][0] - 1.) < 0.01, final
print("Passed test 6 for `rarts quadratic` with darts2 in file test_cli.py")

# ## Configurations round-trip

for config in (default_config("quadratic"), default_config("search"),
               default_config("retrain"), default_config("sweep"), darts2_config(),
               darts1_baseline()):
    data = json.loads(io.dumps(config.to_dict()))
    assert ExperimentConfig.from_dict(data) == config, config.kind
assert load_config(path) == ExperimentConfig.from_dict(io.read_json(path))

for data in ({"kind": "replay"}, {"seeds": []}, {"latency_weight": 0.5},
             {"kind": "retrain"}, {"cell": {"depth": 2, "width": 3}}):
    try:
        ExperimentConfig.from_dict(data)
        assert False, f"{data} must raise ConfigError"
    except ConfigError:
        pass

baseline = darts1_baseline()
baseline.out, baseline.log_every = os.path.join(root, "baseline"), 100
assert main(["quadratic", "--config", write_config("baseline.json", baseline.to_dict())]) == 0
final = io.read_json(os.path.join(baseline.out, "report.json"))["final"]
assert abs(final["alpha"][0] - 2.) < 0.05 and abs(final["w"][0] - 2.) < 0.05, final
print("Passed test 7 for ExperimentConfig in file test_cli.py")

# ## Plot subcommand

# +
svg = os.path.join(root, "replot.svg")
plot_spec = write_config("plot.json", {"title": "again"})
code = main(["plot", os.path.join(first, "trajectory.csv"), "--out", svg,
             "--config", plot_spec])
# -

assert code == 0 and os.path.getsize(svg) > 0
assert main(["plot", os.path.join(root, "missing.csv"), "--out", svg]) == 1
print("Passed test 8 for `rarts plot` in file test_cli.py")

# ## Sweep over λ and β

# +
config = sweep_config(lambdas=(0.25, 1., 10.), betas=(1., 10.), seeds=(0,),
                      out=os.path.join(root, "sweep"))
path = write_config("sweep.json", config.to_dict())
assert main(["sweep", "--config", path]) == 0
with open(os.path.join(config.out, "sweep.csv")) as f:
    rows = list(csv.DictReader(f))
# -

assert [(float(r["lambda"]), float(r["beta"])) for r in rows] == \
    [(0.25, 1.), (0.25, 10.), (1., 1.), (1., 10.), (10., 1.), (10., 10.)]
for row in rows:
    if float(row["lambda"]) == 0.25:
        assert "not unique" in row["equilibrium_error"], row
        continue
    assert row["run_error"] == "" and row["descent_violations"] == "0", row
    assert max(float(row[r]) for r in ("r_w", "r_y", "r_alpha")) < 1e-3, row
    assert abs(float(row["alpha"]) - float(row["equilibrium_alpha"])) < 1e-3, row
print("Passed test 9 for `rarts sweep` in file test_cli.py")

os.environ["RARTS_WORKERS"] = "many"
try:
    sweep_workers()
    assert False, "RARTS_WORKERS must be an integer"
except ConfigError:
    pass
os.environ["RARTS_WORKERS"] = "1"
print("Passed test 10 for sweep_workers in file test_cli.py")

# ## A small search with a comparison and a retraining

# +
config = recovery_config(seeds=(0,), compare=("darts1",), out=os.path.join(root, "search"))
data = config.to_dict()
data["stop"]["max_steps"] = 20
data["log_every"] = 5
data["task"].update({"n_train": 32, "n_val": 32, "n_test": 32})
data["retrain"]["epochs"] = 5
data["cell"]["feature_dim"] = 3
path = write_config("search.json", data)
assert main(["search", "--config", path]) == 0
report = io.read_json(os.path.join(config.out, "report.json"))
# -

names = sorted(f["path"] for f in report["files"])
assert names == ["comparison.csv", "darts1_seed0_genotype.json", "darts1_seed0_trajectory.csv",
                 "rarts_seed0_genotype.json", "rarts_seed0_trajectory.csv"], names
assert [r["solver"] for r in report["results"]] == ["rarts", "darts1"]
for result in report["results"]:
    assert result["teacher"] == ["linear_tanh", "linear_relu"]
    assert len(result["recovered"]) == 2 and result["test_mse"] >= 0
genotype = os.path.join(config.out, "rarts_seed0_genotype.json")

retrain = dict(data, kind="retrain", genotype=os.path.relpath(genotype, root),
               out=os.path.join(root, "retrain"), compare=[])
path = write_config("retrain.json", retrain)
assert main(["retrain", "--config", path]) == 0
results = io.read_json(os.path.join(root, "retrain", "report.json"))["results"]
assert results[0]["genotype"] == io.read_genotype(genotype)
print("Passed test 11 for `rarts search` and `rarts retrain` in file test_cli.py")

# The recovery task has more samples per split than the mixed cell has weights
recovery = recovery_config()
n_weights = sum(math.prod(shape) for _, _, shape in recovery.cell.weight_segments())
assert n_weights == 264
assert min(recovery.task.n_train, recovery.task.n_val) > 3 * n_weights
assert 0 < recovery.hyper_params.alpha_warmup < recovery.stop.max_steps == 2000
print("Passed test 12 for the recovery configuration in file test_cli.py")

# ### A diverging search still writes its report

# +
diverging = dict(data, out=os.path.join(root, "search-diverged"), compare=[])
diverging["hyper_params"] = dict(data["hyper_params"], eta_w=1e6)
diverging["stop"] = dict(data["stop"], divergence_bound=1e3)
path = write_config("search-diverged.json", diverging)
code = main(["search", "--config", path])
report = io.read_json(os.path.join(diverging["out"], "report.json"))
# -

assert code == 3, code
assert report["error"].startswith("rarts seed 0: "), report["error"]
assert report["results"] == []
assert [f["path"] for f in report["files"]] == ["rarts_seed0_trajectory.csv"]
with open(os.path.join(diverging["out"], "rarts_seed0_trajectory.csv")) as f:
    assert list(csv.DictReader(f))[0]["t"] == "0"
print("Passed test 13 for a diverging `rarts search` in file test_cli.py")
