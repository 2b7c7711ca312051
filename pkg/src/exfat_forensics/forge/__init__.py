"""Synthetic exFAT volumes with ground truth, used as test oracle."""
from .builder import Clock, ForgedVolume, InactiveTruth, Manifest, ManifestFile, format_volume
from .protocol import CarvingPlan, ProtocolPlan, carving_scenario, protocol_scenario
from .scenario import (
    CreateDir,
    CreateFile,
    Delete,
    FillFreeSpace,
    Move,
    Rename,
    ReplayResult,
    Scenario,
    Shorten,
    Stage,
    StageSnapshot,
    apply,
    load_scenario,
    make_content,
    parse_scenario,
    replay,
)

__all__ = [
    "Clock", "ForgedVolume", "InactiveTruth", "Manifest", "ManifestFile", "format_volume",
    "CarvingPlan", "ProtocolPlan", "carving_scenario", "protocol_scenario",
    "CreateDir", "CreateFile", "Delete", "FillFreeSpace", "Move", "Rename", "ReplayResult",
    "Scenario", "Shorten", "Stage", "StageSnapshot", "apply", "load_scenario", "make_content",
    "parse_scenario", "replay",
]
