"""In-memory exFAT volume that replays file operations the way the Windows
driver was observed to: minimal writes, stale FAT cells, inactive sets left
in place. Every mutation is mirrored into a ground-truth manifest.
"""
from __future__ import annotations

import fnmatch
import hashlib
import math
import struct
from dataclasses import dataclass, field
from datetime import datetime, timedelta

from ..direntry import ATTR_ARCHIVE, ATTR_DIRECTORY, RECORD_SIZE, encode_dos_timestamp
from ..errors import ForgeError, NoSpaceError, PathNotFoundError, SizeTooSmallError
from ..fat import END_OF_CHAIN
from ..volume import VolumeGeometry
from . import records

SECTOR_SIZE = 512
FAT_OFFSET_SECTORS = 24
DEFAULT_EPOCH = datetime(2016, 9, 30, 9, 0, 0)

ASSUMPTIONS = (
    "allocation is first-fit: the first free run long enough wins, otherwise free runs are used in ascending order",
    "new entry sets are appended after the last used record of a directory; inactive slots are never reused",
    "a contiguous file gets zeroed FAT cells on allocation; a fragmented file gets a full chain including its first fragment",
    "delete clears the in-use bit of each record and the bitmap bits only; FAT cells and data stay untouched",
    "rename that needs more name records inactivates the old set and appends a new one; shorter renames rewrite in place",
    "rename stamps the last-access time of the new set; move copies the set verbatim",
    "shorten updates size and modification time in place, frees released clusters in the bitmap, leaves FAT cells and slack bytes stale",
    "directory extension prefers the cluster right after the directory; otherwise the directory becomes FAT-chained",
    "file slack in the last cluster is zero-filled when content is written",
)


class Clock:
    """Deterministic scenario clock; every forge operation consumes one tick."""

    def __init__(self, start: datetime = DEFAULT_EPOCH, step_seconds: int = 2):
        if step_seconds < 2 or step_seconds % 2:
            raise ValueError("DOS timestamps have 2-second resolution; use an even step >= 2")
        self.current = start.replace(microsecond=0, second=start.second - start.second % 2)
        self.step = timedelta(seconds=step_seconds)

    def tick(self) -> datetime:
        self.current += self.step
        return self.current


@dataclass
class Node:
    node_id: int
    name: str
    is_dir: bool
    parent: "Node | None"
    clusters: list[int] = field(default_factory=list)
    size: int = 0
    no_fat_chain: bool = True
    created: int = 0
    modified: int = 0
    accessed: int = 0
    slot: int | None = None
    set_count: int = 0
    children: dict[str, "Node"] = field(default_factory=dict)
    used_slots: int = 0

    @property
    def path(self) -> str:
        if self.parent is None:
            return "/"
        base = self.parent.path.rstrip("/")
        return f"{base}/{self.name}"

    @property
    def first_cluster(self) -> int:
        return self.clusters[0] if self.clusters else 0

    def fragments(self) -> list[list[int]]:
        out: list[list[int]] = []
        for cn in self.clusters:
            if out and out[-1][-1] + 1 == cn:
                out[-1].append(cn)
            else:
                out.append([cn])
        return out


@dataclass
class ManifestFile:
    file_id: int
    name: str
    path: str
    is_dir: bool
    content: bytes = field(repr=False, default=b"")
    live: bool = True
    current_size: int = 0
    events: list[dict] = field(default_factory=list)
    cluster_history: list[dict] = field(default_factory=list)
    entry_locations: list[str] = field(default_factory=list)
    # Timestamps of the most recent set describing the file (raw DOS values).
    timestamps: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.content).hexdigest()

    @property
    def current_content(self) -> bytes:
        return self.content[: self.current_size]

    @property
    def clusters(self) -> list[int]:
        return list(self.cluster_history[-1]["clusters"]) if self.cluster_history else []

    def to_dict(self) -> dict:
        return {
            "file_id": self.file_id,
            "name": self.name,
            "path": self.path,
            "is_dir": self.is_dir,
            "sha256": self.digest,
            "size": len(self.content),
            "current_size": self.current_size,
            "live": self.live,
            "events": self.events,
            "cluster_history": self.cluster_history,
            "entry_locations": self.entry_locations,
            "timestamps": self.timestamps,
        }


@dataclass
class InactiveTruth:
    """Why an inactive set exists, as recorded when the forge produced it."""

    set_id: str
    file_id: int
    cause: str          # delete | rename | move
    stage: str
    time: str
    first_cluster: int
    parent_dir_id: int
    identity_word: int
    created: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Manifest:
    geometry: dict
    files: dict[int, ManifestFile] = field(default_factory=dict)
    inactive_sets: list[InactiveTruth] = field(default_factory=list)
    operations: list[dict] = field(default_factory=list)
    assumptions: tuple[str, ...] = ASSUMPTIONS

    def live_file(self, path: str) -> ManifestFile:
        for f in self.files.values():
            if f.live and f.path == path:
                return f
        raise PathNotFoundError(path)

    def find(self, name: str) -> list[ManifestFile]:
        return [f for f in self.files.values() if f.name == name]

    def to_dict(self) -> dict:
        return {
            "geometry": self.geometry,
            "files": [f.to_dict() for f in sorted(self.files.values(), key=lambda f: f.file_id)],
            "inactive_sets": [t.to_dict() for t in self.inactive_sets],
            "operations": self.operations,
            "assumptions": list(self.assumptions),
        }


def _solve_layout(size: int, cluster_size: int) -> tuple[int, int, int, int]:
    total = size // SECTOR_SIZE
    spc = cluster_size // SECTOR_SIZE
    upper = max(0, (total - FAT_OFFSET_SECTORS) // spc)
    fat_len = math.ceil((upper + 2) * 4 / SECTOR_SIZE)
    heap = FAT_OFFSET_SECTORS + fat_len
    heap += (-heap) % spc
    count = max(0, (total - heap) // spc)
    return total, fat_len, heap, count


class ForgedVolume:
    """A mutable exFAT image plus its manifest. Build with :func:`format_volume`."""

    def __init__(self, size: int, cluster_size: int = 1024, label: str = "FORGED",
                 clock: Clock | None = None, serial: int = 0x1234ABCD):
        if cluster_size < SECTOR_SIZE or cluster_size & (cluster_size - 1):
            raise ForgeError("cluster size must be a power of two >= 512")
        total, fat_len, heap, count = _solve_layout(size, cluster_size)
        bitmap_bytes = math.ceil(count / 8)
        table = records.upcase_table()
        system = math.ceil(bitmap_bytes / cluster_size) + math.ceil(len(table) / cluster_size) + 1
        if count < max(system, 1):
            raise SizeTooSmallError(f"{size} bytes leave {count} clusters, system files need {system}")

        self.clock = clock or Clock()
        self.cluster_size = cluster_size
        self.image = bytearray(total * SECTOR_SIZE)
        self.alloc = bytearray(count)
        self._next_id = 0
        self.stage = "format"

        bitmap_clusters = list(range(2, 2 + math.ceil(bitmap_bytes / cluster_size)))
        upcase_first = bitmap_clusters[-1] + 1
        upcase_clusters = list(range(upcase_first, upcase_first + math.ceil(len(table) / cluster_size)))
        root_cluster = upcase_clusters[-1] + 1

        self.geometry = VolumeGeometry(
            sector_size_bytes=SECTOR_SIZE,
            sectors_per_cluster=cluster_size // SECTOR_SIZE,
            fat_offset_sectors=FAT_OFFSET_SECTORS,
            fat_length_sectors=fat_len,
            heap_offset_sectors=heap,
            cluster_count=count,
            root_first_cluster=root_cluster,
            volume_length_sectors=total,
            serial_number=serial,
            volume_label=label[:11] if label else None,
        )
        region = records.boot_region(
            sector_size=SECTOR_SIZE, sectors_per_cluster=cluster_size // SECTOR_SIZE,
            volume_sectors=total, fat_offset=FAT_OFFSET_SECTORS, fat_length=fat_len,
            heap_offset=heap, cluster_count=count, root_cluster=root_cluster, serial=serial,
        )
        self.image[: len(region)] = region
        self.image[len(region): 2 * len(region)] = region
        self._set_fat(0, 0xFFFFFFF8)
        self._set_fat(1, END_OF_CHAIN)

        self.bitmap_first = bitmap_clusters[0]
        self.bitmap_size = bitmap_bytes
        for clusters in (bitmap_clusters, upcase_clusters, [root_cluster]):
            self._mark(clusters, True)
            self._write_chain(clusters)
        self._write_data(upcase_clusters, table)

        self.root = Node(self._new_id(), "", True, None, clusters=[root_cluster], no_fat_chain=False)
        self.manifest = Manifest(geometry=self.geometry_dict())
        root_entries = []
        if label:
            root_entries.append(records.label_record(label))
        root_entries.append(records.bitmap_record(self.bitmap_first, bitmap_bytes))
        root_entries.append(records.upcase_record(upcase_first, table))
        self._append_records(self.root, b"".join(root_entries))
        self.system_clusters = tuple(bitmap_clusters + upcase_clusters + [root_cluster])

    # -- low level -----------------------------------------------------

    def geometry_dict(self) -> dict:
        g = self.geometry
        return {
            "sector_size_bytes": g.sector_size_bytes,
            "sectors_per_cluster": g.sectors_per_cluster,
            "cluster_size_bytes": g.cluster_size_bytes,
            "fat_offset_sectors": g.fat_offset_sectors,
            "fat_length_sectors": g.fat_length_sectors,
            "heap_offset_sectors": g.heap_offset_sectors,
            "cluster_count": g.cluster_count,
            "root_first_cluster": g.root_first_cluster,
            "volume_label": g.volume_label,
            "image_size": len(self.image),
        }

    def _new_id(self) -> int:
        self._next_id += 1
        return self._next_id

    def offset_of(self, cn: int) -> int:
        return self.geometry.cluster_to_offset(cn)

    def _set_fat(self, cn: int, value: int) -> None:
        struct.pack_into("<I", self.image, self.geometry.fat_offset_bytes + 4 * cn, value)

    def fat_cell(self, cn: int) -> int:
        return struct.unpack_from("<I", self.image, self.geometry.fat_offset_bytes + 4 * cn)[0]

    def _write_chain(self, clusters: list[int]) -> None:
        for cn, nxt in zip(clusters, clusters[1:]):
            self._set_fat(cn, nxt)
        if clusters:
            self._set_fat(clusters[-1], END_OF_CHAIN)

    def _zero_fat(self, clusters: list[int]) -> None:
        for cn in clusters:
            self._set_fat(cn, 0)

    def _mark(self, clusters: list[int], allocated: bool) -> None:
        base = self.offset_of(self.bitmap_first)
        for cn in clusters:
            self.alloc[cn - 2] = 1 if allocated else 0
            byte_index, bit_index = divmod(cn - 2, 8)
            if allocated:
                self.image[base + byte_index] |= 1 << bit_index
            else:
                self.image[base + byte_index] &= ~(1 << bit_index) & 0xFF

    def is_allocated(self, cn: int) -> bool:
        return bool(self.alloc[cn - 2])

    def free_clusters(self) -> int:
        return len(self.alloc) - sum(self.alloc)

    def free_runs(self) -> list[tuple[int, int]]:
        runs = []
        pos = self.alloc.find(0)
        while pos != -1:
            end = self.alloc.find(1, pos)
            if end == -1:
                end = len(self.alloc)
            runs.append((pos + 2, end - pos))
            pos = self.alloc.find(0, end)
        return runs

    def _allocate(self, n: int) -> list[int]:
        """First fit: the first run of ``n`` free clusters, else ascending fragments."""
        if n == 0:
            return []
        pos = self.alloc.find(bytes(n))
        if pos != -1:
            return list(range(pos + 2, pos + 2 + n))
        if self.free_clusters() < n:
            raise NoSpaceError(f"need {n} clusters, {self.free_clusters()} free")
        out: list[int] = []
        for start, length in self.free_runs():
            take = min(length, n - len(out))
            out.extend(range(start, start + take))
            if len(out) == n:
                break
        return out

    def _write_data(self, clusters: list[int], content: bytes) -> None:
        cs = self.cluster_size
        for i, cn in enumerate(clusters):
            chunk = content[i * cs:(i + 1) * cs]
            off = self.offset_of(cn)
            self.image[off:off + cs] = chunk + bytes(cs - len(chunk))

    def _place(self, clusters: list[int]) -> bool:
        """Write FAT state for a fresh extent; returns the no-FAT-chain flag."""
        contiguous = all(b == a + 1 for a, b in zip(clusters, clusters[1:]))
        if contiguous:
            self._zero_fat(clusters)
        else:
            self._write_chain(clusters)
        return contiguous

    # -- directories ---------------------------------------------------

    def _slot_offset(self, directory: Node, slot: int) -> int:
        cluster_index, within = divmod(slot * RECORD_SIZE, self.cluster_size)
        return self.offset_of(directory.clusters[cluster_index]) + within

    def _capacity(self, directory: Node) -> int:
        return len(directory.clusters) * self.cluster_size // RECORD_SIZE

    def _extend_directory(self, directory: Node) -> None:
        last = directory.clusters[-1]
        nxt = last + 1
        if self.geometry.in_range(nxt) and not self.is_allocated(nxt):
            cn = nxt
        else:
            cn = self._allocate(1)[0]
        self._mark([cn], True)
        off = self.offset_of(cn)
        self.image[off:off + self.cluster_size] = bytes(self.cluster_size)
        directory.clusters.append(cn)
        if directory is self.root or not directory.no_fat_chain or cn != last + 1:
            directory.no_fat_chain = False
            self._write_chain(directory.clusters)
        directory.size = len(directory.clusters) * self.cluster_size
        if directory is not self.root:
            self._rewrite_set(directory)

    def _append_records(self, directory: Node, data: bytes) -> int:
        count = len(data) // RECORD_SIZE
        while directory.used_slots + count > self._capacity(directory):
            self._extend_directory(directory)
        slot = directory.used_slots
        for i in range(count):
            off = self._slot_offset(directory, slot + i)
            self.image[off:off + RECORD_SIZE] = data[i * RECORD_SIZE:(i + 1) * RECORD_SIZE]
        directory.used_slots += count
        return slot

    def _read_records(self, directory: Node, slot: int, count: int) -> bytes:
        out = b""
        for i in range(count):
            off = self._slot_offset(directory, slot + i)
            out += bytes(self.image[off:off + RECORD_SIZE])
        return out

    def _write_records(self, directory: Node, slot: int, data: bytes) -> None:
        for i in range(len(data) // RECORD_SIZE):
            off = self._slot_offset(directory, slot + i)
            self.image[off:off + RECORD_SIZE] = data[i * RECORD_SIZE:(i + 1) * RECORD_SIZE]

    def _set_bytes(self, node: Node) -> bytes:
        return records.entry_set(
            node.name,
            ATTR_DIRECTORY if node.is_dir else ATTR_ARCHIVE,
            node.created, node.modified, node.accessed,
            node.first_cluster, node.size, node.no_fat_chain,
        )

    def _rewrite_set(self, node: Node) -> None:
        data = self._set_bytes(node)
        if len(data) // RECORD_SIZE != node.set_count + 1:
            raise ForgeError("in-place rewrite cannot change the number of records")
        self._write_records(node.parent, node.slot, data)

    def set_id(self, directory: Node, slot: int) -> str:
        return f"{directory.first_cluster}:{slot * RECORD_SIZE}"

    def identity_word(self, node: Node) -> int:
        return struct.unpack_from("<H", self._read_records(node.parent, node.slot, 1), 2)[0]

    # -- lookup --------------------------------------------------------

    def lookup(self, path: str) -> Node:
        node = self.root
        for part in [p for p in path.split("/") if p]:
            if not node.is_dir or part not in node.children:
                raise PathNotFoundError(path)
            node = node.children[part]
        return node

    def glob(self, pattern: str) -> list[str]:
        """Live paths in one directory matching a shell-style name pattern."""
        parent, name_pattern = self._split(pattern)
        names = sorted(n for n in parent.children if fnmatch.fnmatchcase(n, name_pattern))
        return [parent.children[n].path for n in names]

    def _split(self, path: str) -> tuple[Node, str]:
        parent_path, _, name = path.rstrip("/").rpartition("/")
        parent = self.lookup(parent_path or "/")
        if not parent.is_dir:
            raise PathNotFoundError(f"{parent_path} is not a directory")
        if not name:
            raise ForgeError(f"bad path {path!r}")
        return parent, name

    # -- manifest helpers ----------------------------------------------

    def _mfile(self, node: Node) -> ManifestFile:
        return self.manifest.files[node.node_id]

    def _event(self, node: Node, op: str, when: datetime, **extra) -> None:
        mf = self._mfile(node)
        mf.path = node.path
        mf.name = node.name
        mf.timestamps = {"created": node.created, "modified": node.modified, "accessed": node.accessed}
        entry = {"op": op, "stage": self.stage, "time": when.isoformat(), "path": node.path}
        entry.update(extra)
        mf.events.append(entry)

    def _clusters_changed(self, node: Node, op: str, when: datetime) -> None:
        self._mfile(node).cluster_history.append(
            {"op": op, "stage": self.stage, "time": when.isoformat(), "clusters": list(node.clusters),
             "no_fat_chain": node.no_fat_chain}
        )

    def _truth(self, node: Node, cause: str, when: datetime) -> None:
        self.manifest.inactive_sets.append(InactiveTruth(
            set_id=self.set_id(node.parent, node.slot),
            file_id=node.node_id,
            cause=cause,
            stage=self.stage,
            time=when.isoformat(),
            first_cluster=node.first_cluster,
            parent_dir_id=node.parent.node_id,
            identity_word=self.identity_word(node),
            created=node.created,
        ))

    def _log(self, op: str, **args) -> None:
        self.manifest.operations.append({"op": op, "stage": self.stage, **args})

    # -- operations ----------------------------------------------------

    def create_file(self, path: str, content: bytes) -> Node:
        return self._create(path, bytes(content), is_dir=False)

    def create_dir(self, path: str) -> Node:
        return self._create(path, b"", is_dir=True)

    def _create(self, path: str, content: bytes, is_dir: bool) -> Node:
        parent, name = self._split(path)
        if name in parent.children:
            raise ForgeError(f"{path} already exists")
        when = self.clock.tick()
        stamp = encode_dos_timestamp(when)
        node = Node(self._new_id(), name, is_dir, parent, created=stamp, modified=stamp, accessed=stamp)
        node.set_count = math.ceil(len(name) / 15) + 1
        # Reserve directory room first so the set never lands past the end.
        needed = node.set_count + 1
        while parent.used_slots + needed > self._capacity(parent):
            self._extend_directory(parent)
        n = 1 if is_dir else math.ceil(len(content) / self.cluster_size)
        clusters = self._allocate(n)
        self._mark(clusters, True)
        node.clusters = clusters
        node.no_fat_chain = self._place(clusters) if clusters else False
        if is_dir:
            node.size = self.cluster_size
            self._write_data(clusters, b"")
        else:
            node.size = len(content)
            self._write_data(clusters, content)
        node.slot = self._append_records(parent, self._set_bytes(node))
        parent.children[name] = node
        self.manifest.files[node.node_id] = ManifestFile(
            node.node_id, name, node.path, is_dir, content=content, current_size=len(content),
        )
        self._mfile(node).entry_locations.append(self.set_id(parent, node.slot))
        self._event(node, "create_dir" if is_dir else "create_file", when,
                    set_id=self.set_id(parent, node.slot))
        self._clusters_changed(node, "create", when)
        self._log("create_dir" if is_dir else "create_file", path=path, size=len(content))
        return node

    def fill_free_space(self, pattern: bytes = b"\x00", file_clusters: int = 64,
                        directory: str = "/", prefix: str = "dummy") -> list[Node]:
        """Create dummy files until no free cluster remains."""
        parent = self.lookup(directory)
        made = []
        index = 0
        while True:
            free = self.free_clusters()
            name = f"{prefix}{index:05d}.bin"
            records_needed = math.ceil(len(name) / 15) + 2
            reserve = 0
            if parent.used_slots + records_needed > self._capacity(parent):
                reserve = 1
            take = min(file_clusters, free - reserve)
            if take <= 0:
                break
            size = take * self.cluster_size
            content = (pattern * (size // max(1, len(pattern)) + 1))[:size]
            made.append(self.create_file(f"{directory.rstrip('/')}/{name}", content))
            index += 1
        return made

    def delete(self, path: str) -> None:
        if any(c in path for c in "*?["):
            for match in self.glob(path):
                self.delete(match)
            return
        node = self.lookup(path)
        if node is self.root:
            raise ForgeError("cannot delete the root directory")
        if node.is_dir:
            for child in sorted(node.children.values(), key=lambda c: c.slot):
                self.delete(child.path)
        when = self.clock.tick()
        parent = node.parent
        self._truth(node, "delete", when)
        data = self._read_records(parent, node.slot, node.set_count + 1)
        self._write_records(parent, node.slot, records.deactivate(data))
        self._mark(node.clusters, False)
        del parent.children[node.name]
        mf = self._mfile(node)
        self._event(node, "delete", when, set_id=self.set_id(parent, node.slot))
        mf.live = False
        self._log("delete", path=path)

    def rename(self, path: str, new_name: str) -> Node:
        node = self.lookup(path)
        parent = node.parent
        if new_name in parent.children:
            raise ForgeError(f"{new_name} already exists")
        when = self.clock.tick()
        needed = math.ceil(len(new_name) / 15) + 1
        old_slot = node.slot
        del parent.children[node.name]
        node.accessed = encode_dos_timestamp(when)
        if needed > node.set_count:
            self._truth(node, "rename", when)
            data = self._read_records(parent, node.slot, node.set_count + 1)
            self._write_records(parent, node.slot, records.deactivate(data))
            node.name = new_name
            node.set_count = needed
            node.slot = self._append_records(parent, self._set_bytes(node))
        else:
            node.name = new_name
            old = self._read_records(parent, node.slot, node.set_count + 1)
            fresh = self._set_bytes(node)
            # Unused trailing name records keep their slot but lose the in-use bit.
            fresh += records.deactivate(old[len(fresh):])
            self._write_records(parent, node.slot, fresh)
            node.set_count = len(fresh) // RECORD_SIZE - 1
        parent.children[new_name] = node
        self._mfile(node).entry_locations.append(self.set_id(parent, node.slot))
        self._event(node, "rename", when, old_set_id=self.set_id(parent, old_slot),
                    set_id=self.set_id(parent, node.slot))
        self._log("rename", path=path, new_name=new_name)
        return node

    def move(self, path: str, new_dir: str) -> Node:
        node = self.lookup(path)
        dest = self.lookup(new_dir)
        if not dest.is_dir:
            raise PathNotFoundError(f"{new_dir} is not a directory")
        if node.name in dest.children:
            raise ForgeError(f"{new_dir} already holds {node.name}")
        when = self.clock.tick()
        source = node.parent
        old_slot = node.slot
        self._truth(node, "move", when)
        data = self._read_records(source, node.slot, node.set_count + 1)
        self._write_records(source, node.slot, records.deactivate(data))
        del source.children[node.name]
        node.parent = dest
        node.slot = self._append_records(dest, data)
        dest.children[node.name] = node
        self._mfile(node).entry_locations.append(self.set_id(dest, node.slot))
        self._event(node, "move", when, old_set_id=self.set_id(source, old_slot),
                    set_id=self.set_id(dest, node.slot))
        self._log("move", path=path, new_dir=new_dir)
        return node

    def shorten(self, path: str, new_size: int | str) -> Node:
        """Truncate a file. ``new_size="first-fragment"`` keeps what fits in the first fragment."""
        node = self.lookup(path)
        if node.is_dir:
            raise ForgeError("cannot shorten a directory")
        cs = self.cluster_size
        if new_size == "first-fragment":
            first = node.fragments()[0] if node.clusters else []
            new_size = max(1, len(first) * cs - cs // 2)
        new_size = int(new_size)
        if not 0 <= new_size <= node.size:
            raise ForgeError(f"shorten to {new_size} would not shorten {node.size}-byte file")
        when = self.clock.tick()
        stamp = encode_dos_timestamp(when)
        keep = math.ceil(new_size / cs)
        released = node.clusters[keep:]
        node.clusters = node.clusters[:keep]
        self._mark(released, False)
        if node.clusters and all(b == a + 1 for a, b in zip(node.clusters, node.clusters[1:])):
            node.no_fat_chain = True
        node.size = new_size
        node.modified = stamp
        node.accessed = stamp
        self._rewrite_set(node)
        mf = self._mfile(node)
        mf.current_size = new_size
        self._event(node, "shorten", when, new_size=new_size, released=released)
        self._clusters_changed(node, "shorten", when)
        self._log("shorten", path=path, new_size=new_size)
        return node

    # -- ground truth --------------------------------------------------

    def snapshot(self) -> bytes:
        return bytes(self.image)

    def live_nodes(self) -> list[Node]:
        out = []
        stack = [self.root]
        while stack:
            d = stack.pop()
            for child in d.children.values():
                out.append(child)
                if child.is_dir:
                    stack.append(child)
        return sorted(out, key=lambda n: n.node_id)

    def expected_verdicts(self) -> dict[str, str | None]:
        """Ground-truth verdict per inactive set, derived from the forge's own history.

        ``None`` marks histories the analyzer is not expected to resolve to a
        single operation (several operations touched the file afterwards).
        """
        live = {n.node_id: n for n in self.live_nodes()}
        out: dict[str, str | None] = {}
        for truth in self.manifest.inactive_sets:
            node = live.get(truth.file_id)
            if node is not None:
                same_dir = node.parent.node_id == truth.parent_dir_id
                if node.first_cluster != truth.first_cluster or node.created != truth.created:
                    out[truth.set_id] = None
                elif truth.cause == "rename" and same_dir:
                    out[truth.set_id] = "renamed"
                elif truth.cause == "move" and not same_dir and self.identity_word(node) == truth.identity_word:
                    out[truth.set_id] = "moved"
                else:
                    out[truth.set_id] = None
            elif truth.first_cluster >= 2 and self.is_allocated(truth.first_cluster):
                out[truth.set_id] = "indeterminate"
            elif truth.first_cluster >= 2:
                out[truth.set_id] = "deleted"
            else:
                out[truth.set_id] = None
        return out


def format_volume(size: int, cluster_size: int = 1024, label: str = "FORGED",
                  clock: Clock | None = None) -> ForgedVolume:
    return ForgedVolume(size, cluster_size, label, clock)
