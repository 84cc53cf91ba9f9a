"""Run manifests: enough resolved configuration to reproduce any run."""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

from . import __version__


def file_sha256(path: Path | str) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_manifest(subcommand: str, config: dict, inputs: dict[str, Path | str],
                   deterministic: bool) -> dict:
    """Resolved config plus input hashes and tool version.

    In deterministic mode the timestamp is left empty so manifests are
    byte-reproducible; everything else in the manifest is already a pure
    function of the inputs and configuration.
    """
    return {
        "subcommand": subcommand,
        "config": config,
        "inputs": {
            name: {"path": str(path), "sha256": file_sha256(path)}
            for name, path in inputs.items()
        },
        "tool_version": __version__,
        "deterministic": deterministic,
        "timestamp": "" if deterministic else datetime.now(timezone.utc).isoformat(),
    }


def write_manifest(manifest: dict, path: Path | str) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")


def read_manifest(path: Path | str) -> dict:
    with Path(path).open("r", encoding="utf-8") as fh:
        return json.load(fh)
