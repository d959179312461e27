"""
Module that renders trajectories as standalone SVG images.

The phase plot of a quadratic-model run draws the (α, w) pairs as a
polyline with start and end markers and reference markers at the bilevel
minimizer (1, 1), the spurious point (2, 2) and, if given, the equilibrium
of the relaxed problem. Trajectories of larger problems are drawn as the
Lagrangian over the steps.

The output only depends on the input numbers: coordinates are printed with
a fixed number of decimals, so equal inputs give byte-identical files.
Display defaults live in `_svg_options` and can be changed by
`rarts.setup()`.
"""
from xml.sax.saxutils import escape

from .core import PlotError
from .io import read_trajectory_csv
from .utils import format_float

global _svg_options
_svg_options = {
    "width": 800,
    "height": 600,
    "margin": 40,
    "ticks": 5,
    "line_color": "#1f77b4",
    "marker_color": "#d62728",
    "font": "sans-serif",
    "font_size": 12,
}

REFERENCE_MARKERS = (("(1,1)", 1.0, 1.0), ("(2,2)", 2.0, 2.0))


def _fmt(v):
    return f"{v:.2f}"


class Series2svg:
    """
    Convert a list of points to SVG.

    Parameters
    ==========
    points : list of `(x, y)` floats, non-empty
    labels : `(x_label, y_label)`
    markers : list of `(name, x, y)` reference markers
    title : str, optional
    """

    def __init__(self, points, labels, markers=(), title=None):
        if not points:
            raise PlotError("Nothing to plot: the trajectory is empty.")
        self.points = points
        self.labels = labels
        self.markers = list(markers)
        self.title = title
        self._opts = dict(_svg_options)

        xs = [p[0] for p in points] + [m[1] for m in self.markers]
        ys = [p[1] for p in points] + [m[2] for m in self.markers]
        self.x_range = self._extent(xs)
        self.y_range = self._extent(ys)

    @staticmethod
    def _extent(values):
        low, high = min(values), max(values)
        if low == high:
            low, high = low - 1, high + 1
        return low, high

    def _px(self, x):
        m, width = self._opts["margin"], self._opts["width"]
        low, high = self.x_range
        return m + (x - low) / (high - low) * (width - 2 * m)

    def _py(self, y):
        m, height = self._opts["margin"], self._opts["height"]
        low, high = self.y_range
        return height - m - (y - low) / (high - low) * (height - 2 * m)

    def _axes(self):
        o = self._opts
        m, w, h, n = o["margin"], o["width"], o["height"], o["ticks"]
        lines = [f'<line class="axis" x1="{m}" y1="{h - m}" x2="{w - m}" y2="{h - m}" '
                 f'stroke="black"/>',
                 f'<line class="axis" x1="{m}" y1="{m}" x2="{m}" y2="{h - m}" '
                 f'stroke="black"/>']
        for i in range(n):
            x = self.x_range[0] + (self.x_range[1] - self.x_range[0]) * i / max(n - 1, 1)
            y = self.y_range[0] + (self.y_range[1] - self.y_range[0]) * i / max(n - 1, 1)
            px, py = _fmt(self._px(x)), _fmt(self._py(y))
            lines.append(f'<line class="tick" x1="{px}" y1="{h - m}" x2="{px}" '
                         f'y2="{h - m + 5}" stroke="black"/>')
            lines.append(f'<text x="{px}" y="{h - m + 18}" text-anchor="middle">'
                         f'{format_float(x, 4)}</text>')
            lines.append(f'<line class="tick" x1="{m - 5}" y1="{py}" x2="{m}" '
                         f'y2="{py}" stroke="black"/>')
            lines.append(f'<text x="{m - 7}" y="{py}" text-anchor="end">'
                         f'{format_float(y, 4)}</text>')
        lines.append(f'<text x="{w - m}" y="{h - 4}" text-anchor="end">'
                     f'{escape(self.labels[0])}</text>')
        lines.append(f'<text x="4" y="{m - 8}">{escape(self.labels[1])}</text>')
        return lines

    def _circle(self, cls, x, y, r, fill, extra=""):
        return (f'<circle class="{cls}" cx="{_fmt(self._px(x))}" '
                f'cy="{_fmt(self._py(y))}" r="{r}" fill="{fill}"{extra}/>')

    def get_svg(self):
        o = self._opts
        parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{o["width"]}" '
                 f'height="{o["height"]}" viewBox="0 0 {o["width"]} {o["height"]}" '
                 f'font-family="{o["font"]}" font-size="{o["font_size"]}">',
                 f'<rect width="{o["width"]}" height="{o["height"]}" fill="white"/>']
        if self.title:
            parts.append(f'<text x="{o["width"] // 2}" y="{o["margin"] // 2}" '
                         f'text-anchor="middle">{escape(str(self.title))}</text>')
        parts.extend(self._axes())

        points = " ".join(f"{_fmt(self._px(x))},{_fmt(self._py(y))}"
                          for x, y in self.points)
        parts.append(f'<polyline class="trajectory" points="{points}" fill="none" '
                     f'stroke="{o["line_color"]}" stroke-width="1.5"/>')

        for name, x, y in self.markers:
            parts.append(self._circle("reference", x, y, 5, "none",
                                      f' stroke="{o["marker_color"]}"'))
            parts.append(f'<text x="{_fmt(self._px(x) + 7)}" y="{_fmt(self._py(y) - 7)}">'
                         f'{escape(name)}</text>')
        (x0, y0), (x1, y1) = self.points[0], self.points[-1]
        parts.append(self._circle("start", x0, y0, 4, "green",
                                  f' data-x="{repr(x0)}" data-y="{repr(y0)}"'))
        parts.append(self._circle("end", x1, y1, 4, "black",
                                  f' data-x="{repr(x1)}" data-y="{repr(y1)}"'))
        parts.append("</svg>")
        return "\n".join(parts) + "\n"


def phase_plot(points, equilibrium=None, title=None):
    """SVG phase plot of `(alpha, w)` points."""
    markers = list(REFERENCE_MARKERS)
    if equilibrium is not None:
        markers.append(("equilibrium", float(equilibrium[0]), float(equilibrium[1])))
    return Series2svg(points, ("alpha", "w"), markers, title).get_svg()


def trajectory_to_svg(traj):
    """Phase plot of a one-dimensional run, otherwise the Lagrangian over t."""
    if traj.records and traj.final.alpha.size == 1 and traj.final.w.size == 1:
        points = [(float(r.alpha.values[0]), float(r.w.values[0])) for r in traj]
        return phase_plot(points, title=traj.solver)
    points = [(float(r.t), float(r.L)) for r in traj]
    return Series2svg(points, ("t", "L"), title=traj.solver).get_svg()


def emit_plot(trajectory_csv_path, out_svg_path, plot_spec=None):
    """
    Write the phase plot of a quadratic trajectory CSV to `out_svg_path`.

    Parameters
    ==========
    trajectory_csv_path : path of a CSV with (at least) `alpha` and `w`
    out_svg_path : where to write the SVG
    plot_spec : dict, optional
        `equilibrium` (`[alpha, w]` reference marker) and `title`

    Raises `PlotError` if the CSV is malformed or has no rows.
    """
    plot_spec = plot_spec or {}
    unknown = sorted(set(plot_spec) - {"equilibrium", "title"})
    if unknown:
        raise PlotError(f"Unknown plot options {unknown}.")
    _, rows = read_trajectory_csv(trajectory_csv_path, required=("alpha", "w"))
    if not rows:
        raise PlotError(f"{trajectory_csv_path}: line 2: the trajectory has no rows.")
    svg = phase_plot([(r["alpha"], r["w"]) for r in rows],
                     plot_spec.get("equilibrium"), plot_spec.get("title"))
    with open(out_svg_path, "w") as f:
        f.write(svg)
    return out_svg_path
