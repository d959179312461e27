"""
Reading and writing of rarts artifacts.

 * trajectory CSV of the quadratic model, columns
   `t,alpha,w,y,L_train,L_val,L,r_w,r_y,r_alpha`;
 * trajectory CSV of a supernet search, columns `t,L_train,L_val,L`
   followed by the softmax weights `alpha_e_k` of edge `e` and operation
   `k` (row-major);
 * JSON documents (configs, reports, genotypes) written with sorted keys.

Floats are written with `repr`, which is the shortest string that reads
back to the same float, so equal runs give byte-identical files.
"""
import csv
import json

from .core import PlotError
from .distribution import softmax

QUADRATIC_COLUMNS = ("t", "alpha", "w", "y", "L_train", "L_val", "L",
                     "r_w", "r_y", "r_alpha")
SEARCH_COLUMNS = ("t", "L_train", "L_val", "L")


def _fmt(x):
    return repr(float(x))


def search_columns(depth, n_ops):
    """Header of the search trajectory CSV."""
    return SEARCH_COLUMNS + tuple(f"alpha_{e}_{k}" for e in range(depth)
                                  for k in range(n_ops))


def quadratic_rows(traj):
    for r in traj:
        yield ([str(r.t)] +
               [_fmt(v) for v in (r.alpha.values[0], r.w.values[0], r.y.values[0],
                                  r.L_train, r.L_val, r.L, r.r_w, r.r_y, r.r_alpha)])


def search_rows(traj):
    for r in traj:
        probs = softmax(r.alpha.segment("alpha")).ravel()
        yield ([str(r.t)] + [_fmt(v) for v in (r.L_train, r.L_val, r.L)] +
               [_fmt(p) for p in probs])


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_quadratic_csv(traj, path):
    """Write the trajectory of a quadratic-model run."""
    return write_csv(path, QUADRATIC_COLUMNS, quadratic_rows(traj))


def write_search_csv(traj, path):
    """Write the trajectory of a supernet search."""
    depth, n_ops = traj.final.alpha.segment("alpha").shape
    return write_csv(path, search_columns(depth, n_ops), search_rows(traj))


def read_trajectory_csv(path, required=("t",)):
    """
    Read a trajectory CSV into `(header, rows)` where every row is a dict of
    floats.

    Raises `PlotError` naming the offending line if the header lacks one of
    the `required` columns or a row is malformed.
    """
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise PlotError(f"{path}: line 1: the file is empty.")
        missing = [c for c in required if c not in header]
        if missing:
            raise PlotError(f"{path}: line 1: missing columns {missing}.")
        rows = []
        for line, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise PlotError(f"{path}: line {line}: expected {len(header)} "
                                f"fields, found {len(row)}.")
            try:
                rows.append({c: float(v) for c, v in zip(header, row)})
            except ValueError:
                raise PlotError(f"{path}: line {line}: non-numeric field in {row}.")
    return header, rows


def dumps(data):
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def write_json(data, path):
    with open(path, "w") as f:
        f.write(dumps(data))
    return path


def read_json(path):
    with open(path) as f:
        return json.load(f)


def write_genotype(cell, path):
    """Write the genotype record `{"edges": [op, ...]}` of a discrete cell."""
    return write_json({"edges": list(cell.genotype)}, path)


def read_genotype(path):
    """Read the list of operations of a genotype record."""
    data = read_json(path)
    if set(data) != {"edges"} or not isinstance(data["edges"], list):
        raise ValueError(f"{path}: a genotype record must be {{\"edges\": [...]}}.")
    return data["edges"]
