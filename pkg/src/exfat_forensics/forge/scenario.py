"""Scenario scripts and stage-wise replay.

A scenario file is plain text, one operation per line::

    volume size=16M cluster=1024 label=EVIDENCE
    clock start=2016-09-30T09:00:00 step=2
    stage "Stage 2: adding files"
    mkdir /subfolder
    create /colors.jpg jpeg:955787:7
    fill zero clusters=64
    delete /colors.jpg
    rename /a.jpg a_much_longer_name.jpg
    move /a.jpg /subfolder
    shorten /notes.txt first-fragment

Content specs are ``kind:size[:seed]`` with kind one of jpeg, pdf, text,
random, zero, or ``file:PATH`` (relative to the scenario file).
"""
from __future__ import annotations

import hashlib
import random
import shlex
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from ..errors import ScenarioSyntaxError
from .builder import Clock, DEFAULT_EPOCH, ForgedVolume, format_volume

JPEG_HEADER = b"\xFF\xD8\xFF\xE0"
JPEG_FOOTER = b"\xFF\xD9"


def _payload(size: int, seed: int) -> bytes:
    """Seeded bytes that never contain 0xFF, so no spurious JPEG markers appear."""
    raw = random.Random(seed).randbytes(size)
    return raw.replace(b"\xff", b"\xfe")


def make_content(kind: str, size: int, seed: int = 0) -> bytes:
    if size < 0:
        raise ValueError("content size must be non-negative")
    if kind == "zero":
        return bytes(size)
    if kind == "random":
        return _payload(size, seed)
    if kind == "jpeg":
        if size < len(JPEG_HEADER) + len(JPEG_FOOTER):
            raise ValueError("jpeg content needs at least 6 bytes")
        body = size - len(JPEG_HEADER) - len(JPEG_FOOTER)
        return JPEG_HEADER + _payload(body, seed) + JPEG_FOOTER
    if kind == "pdf":
        head, tail = b"%PDF-1.4\n", b"\n%%EOF\n"
        body = max(0, size - len(head) - len(tail))
        return (head + _payload(body, seed) + tail)[:size]
    if kind == "text":
        rng = random.Random(seed)
        words = ["evidence", "cluster", "bitmap", "entry", "volume", "sector", "chain", "record"]
        out = bytearray()
        line = 0
        while len(out) < size:
            line += 1
            out += f"{line:06d} ".encode() + " ".join(rng.choice(words) for _ in range(8)).encode() + b"\n"
        return bytes(out[:size])
    raise ValueError(f"unknown content kind {kind!r}")


# -- operations -------------------------------------------------------------

@dataclass(frozen=True)
class CreateFile:
    path: str
    content: bytes = field(repr=False)


@dataclass(frozen=True)
class CreateDir:
    path: str


@dataclass(frozen=True)
class FillFreeSpace:
    pattern: bytes = b"\x00"
    file_clusters: int = 64
    directory: str = "/"
    prefix: str = "dummy"


@dataclass(frozen=True)
class Delete:
    path: str


@dataclass(frozen=True)
class Rename:
    path: str
    new_name: str


@dataclass(frozen=True)
class Move:
    path: str
    new_dir: str


@dataclass(frozen=True)
class Shorten:
    path: str
    new_size: int | str


Operation = CreateFile | CreateDir | FillFreeSpace | Delete | Rename | Move | Shorten


def apply(volume: ForgedVolume, op: Operation) -> ForgedVolume:
    """Mutate ``volume`` (image and manifest) by one operation."""
    if isinstance(op, CreateFile):
        volume.create_file(op.path, op.content)
    elif isinstance(op, CreateDir):
        volume.create_dir(op.path)
    elif isinstance(op, FillFreeSpace):
        volume.fill_free_space(op.pattern, op.file_clusters, op.directory, op.prefix)
    elif isinstance(op, Delete):
        volume.delete(op.path)
    elif isinstance(op, Rename):
        volume.rename(op.path, op.new_name)
    elif isinstance(op, Move):
        volume.move(op.path, op.new_dir)
    elif isinstance(op, Shorten):
        volume.shorten(op.path, op.new_size)
    else:
        raise TypeError(f"not a forge operation: {op!r}")
    return volume


@dataclass
class Stage:
    name: str
    operations: list[Operation] = field(default_factory=list)


@dataclass
class Scenario:
    size: int = 16 * 1024 * 1024
    cluster_size: int = 1024
    label: str = "FORGED"
    clock_start: datetime = DEFAULT_EPOCH
    clock_step: int = 2
    stages: list[Stage] = field(default_factory=list)

    def stage(self, name: str) -> Stage:
        st = Stage(name)
        self.stages.append(st)
        return st


@dataclass
class StageSnapshot:
    name: str
    image: bytes = field(repr=False)
    expected_verdicts: dict[str, str | None]
    live_paths: tuple[str, ...]

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.image).hexdigest()


@dataclass
class ReplayResult:
    volume: ForgedVolume
    snapshots: list[StageSnapshot]

    @property
    def image(self) -> bytes:
        return self.volume.snapshot()

    @property
    def manifest(self):
        return self.volume.manifest


def _snap(volume: ForgedVolume, name: str, keep_images: bool) -> StageSnapshot:
    return StageSnapshot(
        name=name,
        image=volume.snapshot() if keep_images else b"",
        expected_verdicts=volume.expected_verdicts(),
        live_paths=tuple(n.path for n in volume.live_nodes()),
    )


def replay(scenario: Scenario, keep_images: bool = True) -> ReplayResult:
    """Format, then run each stage; one snapshot after formatting and after every stage."""
    clock = Clock(scenario.clock_start, scenario.clock_step)
    volume = format_volume(scenario.size, scenario.cluster_size, scenario.label, clock)
    snapshots = [_snap(volume, "format", keep_images)]
    for stage in scenario.stages:
        volume.stage = stage.name
        for op in stage.operations:
            apply(volume, op)
        snapshots.append(_snap(volume, stage.name, keep_images))
    return ReplayResult(volume, snapshots)


# -- text format ------------------------------------------------------------

_UNITS = {"": 1, "K": 1024, "M": 1024 ** 2, "G": 1024 ** 3}


def _parse_size(text: str) -> int:
    text = text.strip().upper().removesuffix("B").removesuffix("I")
    unit = text[-1] if text and text[-1] in "KMG" else ""
    number = text[:-1] if unit else text
    return int(number, 0) * _UNITS[unit]


def _kv(tokens: list[str]) -> dict[str, str]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ScenarioSyntaxError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def _content(spec: str, base: Path | None) -> bytes:
    kind, _, rest = spec.partition(":")
    if kind == "file":
        path = Path(rest)
        if base is not None and not path.is_absolute():
            path = base / path
        return path.read_bytes()
    parts = rest.split(":") if rest else []
    if not parts:
        raise ScenarioSyntaxError(f"content spec {spec!r} needs a size")
    seed = int(parts[1]) if len(parts) > 1 else 0
    return make_content(kind, _parse_size(parts[0]), seed)


def parse_scenario(text: str, base_dir: str | Path | None = None) -> Scenario:
    base = Path(base_dir) if base_dir is not None else None
    scenario = Scenario()
    current: Stage | None = None
    for lineno, line in enumerate(text.splitlines(), 1):
        try:
            tokens = shlex.split(line, comments=True)
        except ValueError as exc:
            raise ScenarioSyntaxError(f"line {lineno}: {exc}") from exc
        if not tokens:
            continue
        cmd, args = tokens[0].lower(), tokens[1:]
        try:
            if cmd == "volume":
                kv = _kv(args)
                scenario.size = _parse_size(kv.get("size", str(scenario.size)))
                scenario.cluster_size = _parse_size(kv.get("cluster", str(scenario.cluster_size)))
                scenario.label = kv.get("label", scenario.label)
                continue
            if cmd == "clock":
                kv = _kv(args)
                if "start" in kv:
                    scenario.clock_start = datetime.fromisoformat(kv["start"])
                scenario.clock_step = int(kv.get("step", scenario.clock_step))
                continue
            if cmd == "stage":
                current = scenario.stage(" ".join(args) or f"stage {len(scenario.stages) + 2}")
                continue
            if current is None:
                current = scenario.stage("stage 2")
            current.operations.append(_parse_op(cmd, args, base))
        except ScenarioSyntaxError as exc:
            raise ScenarioSyntaxError(f"line {lineno}: {exc}") from exc
        except (ValueError, IndexError, OSError) as exc:
            raise ScenarioSyntaxError(f"line {lineno}: {exc}") from exc
    return scenario


def _parse_op(cmd: str, args: list[str], base: Path | None) -> Operation:
    if cmd in ("mkdir", "create_dir"):
        return CreateDir(args[0])
    if cmd in ("create", "create_file"):
        return CreateFile(args[0], _content(args[1], base))
    if cmd in ("fill", "fill_free_space"):
        pattern = b"\x00"
        rest = args
        if rest and "=" not in rest[0]:
            word = rest[0]
            pattern = b"\x00" if word == "zero" else bytes.fromhex(word)
            rest = rest[1:]
        kv = _kv(rest)
        return FillFreeSpace(pattern, int(kv.get("clusters", 64)), kv.get("dir", "/"), kv.get("prefix", "dummy"))
    if cmd == "delete":
        return Delete(args[0])
    if cmd == "rename":
        return Rename(args[0], args[1])
    if cmd == "move":
        return Move(args[0], args[1])
    if cmd == "shorten":
        size = args[1]
        return Shorten(args[0], size if size == "first-fragment" else _parse_size(size))
    raise ScenarioSyntaxError(f"unknown operation {cmd!r}")


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), base_dir=path.parent)
