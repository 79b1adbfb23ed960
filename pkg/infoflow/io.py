"""Reading channel, tree and prior documents; writing reports."""

import csv
import json
from pathlib import Path
import re
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np
import yaml

from .channel import Channel, validate_channel
from .errors import MalformedSpecError
from .tree import TreeSpec, build_from_spec

ext2loader = {
    "json": json.loads,
    r"ya?ml": yaml.safe_load,
}

REPORT_SCHEMA_VERSION = 1


def get_loader(path: Path):
    """Get a loader based on the file extension using regex.

    Examples
    --------
    >>> get_loader(Path("tree.yml")) is yaml.safe_load
    True
    >>> get_loader(Path("tree.csv")) is None
    True
    """
    ext = path.suffix[1:]
    for pattern, loader in ext2loader.items():
        if re.fullmatch(pattern, ext):
            return loader
    return None


def load_document(path: Path) -> Any:
    """Parse a JSON or YAML document."""
    loader = get_loader(path)
    if not loader:
        raise MalformedSpecError(f"Unsupported file format: {path}")
    try:
        return loader(Path(path).read_text())
    except FileNotFoundError as err:
        raise MalformedSpecError(f"No such file: {path}") from err
    except (json.JSONDecodeError, yaml.YAMLError) as err:
        raise MalformedSpecError(f"Could not parse {path}: {err}") from err


def parse_channel(document: Any, **kwargs) -> Channel:
    """Validate a channel document {"matrix": [[...], ...]}."""
    if not isinstance(document, Mapping) or "matrix" not in document:
        raise MalformedSpecError(
            'A channel document must be a mapping with a "matrix" key.'
        )
    return validate_channel(document["matrix"], **kwargs)


def load_channel(path: Path, **kwargs) -> Channel:
    """Load and validate a channel file."""
    return parse_channel(load_document(Path(path)), **kwargs)


def load_tree(path: Path, **kwargs) -> TreeSpec:
    """Load and validate a tree file."""
    return build_from_spec(load_document(Path(path)), **kwargs)


def load_prior(path: Path) -> np.ndarray:
    """Load a prior given as a list or as {"prior": [...]}."""
    document = load_document(Path(path))
    if isinstance(document, Mapping):
        document = document.get("prior")
    if not isinstance(document, list):
        raise MalformedSpecError(
            f"Prior file {path} must hold a list of probabilities."
        )
    return np.asarray(document, dtype=float)


def to_jsonable(value: Any) -> Any:
    """Recursively convert numpy containers and scalars to plain python."""
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return value


def dump_json(report: Mapping) -> str:
    """Serialize a report mapping as indented JSON."""
    return json.dumps(to_jsonable(report), indent=2)


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    schema_version: int = REPORT_SCHEMA_VERSION,
):
    """Write rows below a schema comment line and a fixed header."""
    with open(path, "w", newline="") as handle:
        handle.write(f"# schema_version={schema_version}\n")
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])


def read_csv(path: Path) -> tuple[Optional[int], list[dict[str, str]]]:
    """Read a report CSV, returning its schema version and rows."""
    with open(path, newline="") as handle:
        first = handle.readline()
        match = re.match(r"#\s*schema_version=(\d+)", first)
        if match is None:
            handle.seek(0)
        version = int(match.group(1)) if match else None
        return version, list(csv.DictReader(handle))
