"""Runtime settings: caps, tolerances and worker partitioning.

Settings are read from a YAML or JSON mapping. Keys that are not given
keep their defaults.

Examples
--------
>>> s = Settings()
>>> s.enumeration_cap == 2**24
True
>>> s.replace(n_jobs=4).n_jobs
4
"""

from dataclasses import asdict, dataclass, fields, replace
from functools import lru_cache
import logging
import os
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from .errors import MalformedSpecError

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "INFOFLOW_CONFIG"


@dataclass(frozen=True)
class Settings:
    """Explicit caps and tolerances shared by all modules."""

    node_cap: int = 10**7
    enumeration_cap: int = 2**24
    expansion_max_d: int = 12
    reversibility_tol: float = 1e-10
    equilibrium_tol: float = 1e-9
    block_size: int = 4096
    mc_block_size: int = 1024
    n_jobs: int = 1

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "Settings":
        """Build settings from a mapping, rejecting unknown keys."""
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(values) - set(known)
        if unknown:
            raise MalformedSpecError(
                f"Unknown settings: {sorted(unknown)}. "
                f"Valid keys are {sorted(known)}"
            )
        cleaned = {}
        for key, value in values.items():
            default = getattr(cls, key)
            try:
                cleaned[key] = type(default)(value)
            except (TypeError, ValueError) as err:
                raise MalformedSpecError(
                    f"Invalid value for setting {key}: {value!r}"
                ) from err
        settings = cls(**cleaned)
        settings.validate()
        return settings

    def validate(self):
        for name in ("node_cap", "enumeration_cap", "block_size"):
            if getattr(self, name) < 1:
                raise MalformedSpecError(f"{name} must be positive.")
        if self.mc_block_size < 1 or self.expansion_max_d < 1:
            raise MalformedSpecError(
                "mc_block_size and expansion_max_d must be positive."
            )
        if self.n_jobs == 0:
            raise MalformedSpecError("n_jobs must be nonzero.")

    def replace(self, **changes) -> "Settings":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


def load_settings(path: Union[Path, str]) -> Settings:
    """Load settings from a YAML or JSON file."""
    from .io import load_document

    values = load_document(Path(path))
    if values is None:
        values = {}
    if not isinstance(values, Mapping):
        raise MalformedSpecError(
            f"Settings file {path} must contain a mapping."
        )
    logger.debug("Loaded settings from %s: %s", path, values)
    return Settings.from_mapping(values)


@lru_cache(1)
def get_settings(path: Optional[str] = None) -> Settings:
    """Return the process settings.

    The file given as argument wins over the INFOFLOW_CONFIG environment
    variable; without either, defaults are used.
    """
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if path:
        return load_settings(path)
    return Settings()
