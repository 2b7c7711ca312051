"""JSON report assembly. The layout is described by ``report.schema.json``."""
from __future__ import annotations

import json
from datetime import datetime, timezone
from importlib import resources

from . import __version__
from .analysis import ExfatVolume
from .tree import DirectoryTree

SCHEMA_VERSION = "1.0"
TOOL_NAME = "exfat-forensics"


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("report.schema.json").read_text())


def new_report(command: str, volume: ExfatVolume | None = None, source: str | None = None,
               deterministic: bool = False) -> dict:
    report: dict = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": TOOL_NAME, "version": __version__},
        "command": command,
        "findings": [],
    }
    if volume is not None:
        report["image"] = {
            "source": source,
            "sha256": volume.image.digest(),
            "length": volume.image.length,
            "partition_offset": volume.image.partition_offset,
        }
        report["geometry"] = volume.geometry.to_dict()
    if not deterministic:
        report["generated_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return report


def tree_summary(tree: DirectoryTree, include_sets: bool = True) -> dict:
    out = {
        "directories": [d.to_dict() for d in tree.directories],
        "set_count": len(tree.sets),
        "live_count": len(tree.live_sets()),
        "inactive_count": len(tree.inactive_sets()),
        "errors": [{"path": p, "error": e} for p, e in tree.errors()],
    }
    if include_sets:
        out["sets"] = [s.to_dict() for s in tree.sets]
    return out


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
