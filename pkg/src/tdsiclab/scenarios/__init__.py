"""Bundled scenario configurations."""

from importlib import resources


def names():
    return sorted(p.name[:-4] for p in resources.files(__name__).iterdir() if p.name.endswith(".cfg"))


def path(name):
    """Filesystem path of a bundled scenario, e.g. ``path("fig1_2e")``."""
    p = resources.files(__name__) / f"{name}.cfg"
    if not p.is_file():
        raise KeyError(f"no bundled scenario {name!r}; available: {', '.join(names())}")
    return str(p)
