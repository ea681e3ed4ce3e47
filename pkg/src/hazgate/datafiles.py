"""Resolution of the shipped data directory.

The packaged reference files (canonical process model, SHARD/UCA/CUE
catalogs, requirements registry, seeded scenarios) live under
``hazgate/data``.  Setting the environment variable ``HAZGATE_DATA_DIR``
points every loader at an alternative directory, which keeps tests and
downstream pipelines hermetic.
"""

from __future__ import annotations

import os
from pathlib import Path

ENV_VAR = "HAZGATE_DATA_DIR"

_SHIPPED = Path(__file__).resolve().parent / "data"


def data_dir() -> Path:
    override = os.environ.get(ENV_VAR)
    if override:
        return Path(override)
    return _SHIPPED


def data_path(*parts: str) -> Path:
    """Path of a shipped data file, honouring the override directory."""
    return data_dir().joinpath(*parts)
