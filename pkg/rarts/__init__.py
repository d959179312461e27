__version__ = "1.0.0"

from . import core
from . import autodiff
from . import objectives
from . import solvers
from . import diagnostics
from . import supernet
from . import examples

from .core import ParamVector, HyperParams, SearchState, StopRule, Trajectory
from .objectives import quadratic_objective, eval_lagrangian
from .solvers import run


def setup(**kwargs):
    """
    Configure the SVG output of rarts.

    This is mainly useful in Jupyter/IPython where trajectories render
    themselves as SVG phase plots.

    Parameters
    ----------
    width : int
        width of the image in pixels (default: 800)
    height : int
        height of the image in pixels (default: 600)
    margin : int
        margin around the axes (default: 40)
    ticks : int
        number of ticks per axis (default: 5)
    line_color : str
        color of the trajectory (default: '#1f77b4')
    marker_color : str
        color of the reference markers (default: '#d62728')
    font : str
        the font of labels (default: 'sans-serif')
    """
    from . import plot as _plot
    for key, default in (("width", 800), ("height", 600), ("margin", 40),
                         ("ticks", 5), ("line_color", "#1f77b4"),
                         ("marker_color", "#d62728"), ("font", "sans-serif")):
        _plot._svg_options[key] = kwargs.get(key, default)
