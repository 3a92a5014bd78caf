"""Shipped camera-parameter documents.

``table1_*`` transcribe the calibration of the simulated 180 degree camera,
``table2_left_*`` / ``table2_right_*`` the two real 190 degree cameras, and
``sim_atan_400`` is the desk-scale equidistant camera used by the default
simulations.
"""

from importlib import resources
from pathlib import Path


def table_path(name: str) -> Path:
    """Path of a shipped parameter file, given with or without ``.json``."""
    if not name.endswith(".json"):
        name += ".json"
    path = Path(str(resources.files(__name__).joinpath(name)))
    if not path.is_file():
        raise FileNotFoundError(f"no shipped camera table named {name!r}")
    return path


def available() -> list[str]:
    return sorted(p.name[:-5] for p in Path(str(resources.files(__name__))).glob("*.json"))
