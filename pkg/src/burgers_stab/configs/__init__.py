"""Bundled experiment configurations."""

from importlib import resources


def bundled_path(name):
    """Filesystem path of a bundled config such as ``"ex1"`` or ``"ex1.cfg"``."""
    if not name.endswith(".cfg"):
        name += ".cfg"
    return str(resources.files(__package__) / name)
