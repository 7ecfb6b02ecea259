"""Run manifests written ahead of every command's outputs."""

import json
import logging
from dataclasses import asdict, dataclass, field, is_dataclass
from pathlib import Path
from typing import Any, Dict, List, Union

from . import __version__
from .graph_io import ArtifactWriteError, file_digest


logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"


@dataclass
class RunManifest:
    """Command, fully resolved configuration, input digests, seeds and outputs.

    No timestamps are recorded so identical runs produce identical manifests.
    """
    command: str
    config: Dict[str, Any] = field(default_factory=dict)
    inputs: Dict[str, str] = field(default_factory=dict)
    seeds: List[int] = field(default_factory=list)
    version: str = __version__
    outputs: Dict[str, str] = field(default_factory=dict)

    def add_config(self, name: str, section: Any) -> None:
        self.config[name] = asdict(section) if is_dataclass(section) else section

    def add_input(self, path: Union[str, Path]) -> None:
        self.inputs[str(path)] = file_digest(path)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def write_manifest(manifest: RunManifest, out_dir: Union[str, Path]) -> str:
    path = Path(out_dir) / MANIFEST_FILE
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(manifest.to_json())
    except OSError as e:
        raise ArtifactWriteError(path, e.strerror or str(e))
    logger.debug(f"Wrote manifest for '{manifest.command}' to {path}")
    return str(path)


def read_manifest(path: Union[str, Path]) -> RunManifest:
    with open(path, "r") as f:
        data = json.load(f)
    return RunManifest(**data)
