#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import os
import re
import tempfile

import rarts
from rarts import io, plot
from rarts.core import PlotError, StopRule
from rarts.diagnostics import quadratic_equilibrium
from rarts.solvers import run

from quadratic_examples import quadratic_hp, quadratic_start

out = tempfile.mkdtemp(prefix="rarts-test-plot-")

# ## Phase plot of a RARTS run

# +
obj, init = quadratic_start()
traj = run("rarts", obj, init, quadratic_hp(), StopRule(max_steps=2000), log_every=10)
csv_path = io.write_quadratic_csv(traj, os.path.join(out, "trajectory.csv"))
spec = {"equilibrium": [float(v) for v in quadratic_equilibrium(10., 10.)[:2]],
        "title": "rarts"}
svg_path = plot.emit_plot(csv_path, os.path.join(out, "trajectory.svg"), spec)
with open(svg_path) as f:
    svg = f.read()
# -

assert svg.startswith("<svg ") and svg.endswith("</svg>\n")
assert svg.count('class="trajectory"') == 1
assert svg.count('class="reference"') == 3, "(1,1), (2,2) and the equilibrium"
end = re.search(r'class="end"[^>]*data-x="([^"]+)" data-y="([^"]+)"', svg)
assert float(end.group(1)) == traj.final.alpha.values[0]
assert float(end.group(2)) == traj.final.w.values[0]
print("Passed test 1 for emit_plot in file test_plot.py")

second = plot.emit_plot(csv_path, os.path.join(out, "again.svg"), spec)
with open(second) as f:
    assert f.read() == svg, "equal inputs must give byte-identical SVG files"
print("Passed test 2 for deterministic SVG files in file test_plot.py")

# ### Display options

rarts.setup(width=400, height=300)
small = plot.trajectory_to_svg(traj)
assert 'width="400" height="300"' in small
rarts.setup()
assert 'width="800" height="600"' in traj._repr_svg_()
print("Passed test 3 for rarts.setup in file test_plot.py")

# ### Malformed input

# +
empty = os.path.join(out, "empty.csv")
with open(empty, "w") as f:
    f.write("t,alpha,w\n")

no_w = os.path.join(out, "no_w.csv")
with open(no_w, "w") as f:
    f.write("t,alpha\n0,1.0\n")
# -

for path, options, line in ((empty, None, "line 2"), (no_w, None, "line 1"),
                            (csv_path, {"colour": "red"}, None)):
    try:
        plot.emit_plot(path, os.path.join(out, "never.svg"), options)
        assert False, f"{path} with {options} must raise PlotError"
    except PlotError as e:
        assert line is None or line in str(e), str(e)
assert not os.path.exists(os.path.join(out, "never.svg"))
print("Passed test 4 for PlotError in file test_plot.py")

# ### Text is escaped

# +
svg = plot.phase_plot([(0., 1.), (1., 0.)], title="a<b & c>d")
named = plot.Series2svg([(0., 1.)], ("t", "L"), [("w<1 & y>0", 0.5, 0.5)]).get_svg()
# -

assert ">a&lt;b &amp; c&gt;d</text>" in svg
assert ">w&lt;1 &amp; y&gt;0</text>" in named
assert "a<b" not in svg and "w<1" not in named
print("Passed test 5 for escaped titles and markers in file test_plot.py")
