"""Ready-made experiment configurations."""
from .quadratic import sweep_config, trajectory_config
from .toy_search import recovery_config


def default_config(kind):
    """The configuration used by the CLI when no `--config` is given."""
    if kind == "quadratic":
        return trajectory_config()
    if kind == "search":
        return recovery_config()
    if kind == "retrain":
        return recovery_config(kind="retrain")
    if kind == "sweep":
        return sweep_config()
    raise ValueError(f"Unknown experiment kind `{kind}`.")
