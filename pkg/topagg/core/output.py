"""
Result files: JSON lines, CSV and a rendered summary.

Every file starts with the toolkit version, the config hash and the master
seed. Keys are sorted and floats use ``repr`` so reruns are byte-identical.
"""

import csv
import hashlib
import json
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from topagg import __version__
from topagg.core.template import render_template
from topagg.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset, tuple)):
        return list(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps(value: Any) -> str:
    """Canonical JSON: sorted keys, compact separators."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), default=_to_builtin)


def config_hash(resolved: Mapping[str, Any]) -> str:
    """sha256 of the canonical JSON of a resolved config."""
    return hashlib.sha256(dumps(resolved).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """
    Where and how a subcommand writes its results.

    Attributes:
        subcommand: The harness that ran
        config_path: Config file, or None for presets only
        seed: Master seed
        output_dir: Target directory
        fmt: ``text`` or ``json`` for stdout
        config_hash: Hash of the resolved config
    """

    subcommand: str
    config_path: Optional[str]
    seed: int
    output_dir: str
    fmt: str
    config_hash: str

    def meta(self) -> Dict[str, Any]:
        return {
            "type": "meta",
            "toolkit": "topagg",
            "version": __version__,
            "subcommand": self.subcommand,
            "config_hash": self.config_hash,
            "seed": self.seed,
        }

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def prepare(self) -> None:
        """
        Creates the output directory.

        Raises:
            ConfigurationError: If it cannot be created or written
        """
        try:
            os.makedirs(self.output_dir, exist_ok=True)
        except OSError as e:
            raise ConfigurationError(f"cannot create output directory {self.output_dir}: {e}")
        if not os.access(self.output_dir, os.W_OK):
            raise ConfigurationError(f"output directory {self.output_dir} is not writable")


def write_jsonl(path: str, manifest: RunManifest, records: Iterable[Mapping[str, Any]]) -> str:
    """Writes the meta record followed by one JSON object per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps(manifest.meta()) + "\n")
        for record in records:
            f.write(dumps(dict(record)) + "\n")
    logger.debug("wrote %s", path)
    return path


def write_json(path: str, manifest: RunManifest, payload: Mapping[str, Any]) -> str:
    """Writes one JSON document with a ``meta`` key."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps({"meta": manifest.meta(), **payload}, sort_keys=True, indent=2, default=_to_builtin) + "\n")
    logger.debug("wrote %s", path)
    return path


def csv_header(manifest: RunManifest) -> str:
    return f"# topagg {__version__} config={manifest.config_hash} seed={manifest.seed}"


def write_csv(path: str, manifest: RunManifest, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> str:
    """Writes a comment header line, the column names and one line per row."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(csv_header(manifest) + "\n")
        writer = csv.DictWriter(f, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else _to_builtin(v) if isinstance(v, np.generic) else v) for k, v in row.items()})
    logger.debug("wrote %s", path)
    return path


def write_summary(path: str, manifest: RunManifest, title: str, sections: List[Dict[str, Any]]) -> str:
    """
    Renders ``summary.md``.

    Args:
        path: Target file
        manifest: Run manifest (version, hash and seed are repeated in the file)
        title: Heading
        sections: Each a mapping with ``heading`` and either ``table`` (list of
            row mappings) or ``items`` (mapping of key to value)
    """
    text = render_template("summary.md.j2", {"meta": manifest.meta(), "title": title, "sections": sections})
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.debug("wrote %s", path)
    return path
