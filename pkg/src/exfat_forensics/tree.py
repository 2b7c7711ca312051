"""Directory tree walk covering active and inactive entry sets."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .direntry import (
    DirectoryListing,
    FileEntrySet,
    SpecialRecord,
    assemble_sets,
    iter_records,
)
from .errors import ClusterOutOfRangeError
from .fat import FatTable, walk_chain
from .volume import VolumeGeometry, VolumeImage, read_cluster


@dataclass
class DirectoryNode:
    path: str
    first_cluster: int
    clusters: tuple[int, ...]
    entry: FileEntrySet | None = None
    from_inactive: bool = False
    listing: DirectoryListing | None = None
    errors: list[str] = field(default_factory=list)

    @property
    def sets(self) -> list[FileEntrySet]:
        return self.listing.sets if self.listing else []

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "first_cluster": self.first_cluster,
            "clusters": list(self.clusters),
            "set_id": self.entry.set_id if self.entry else None,
            "from_inactive_directory": self.from_inactive,
            "orphan_records": [
                {"offset": r.raw.offset, "hex": r.raw.data.hex()} for r in (self.listing.orphans if self.listing else [])
            ],
            "errors": list(self.errors),
        }


@dataclass
class DirectoryTree:
    root: DirectoryNode
    directories: list[DirectoryNode]
    cluster_size: int = 0

    def __post_init__(self):
        self.sets = sorted(
            (s for d in self.directories for s in d.sets),
            key=lambda s: s.location.image_offset,
        )
        self._by_id = {s.set_id: s for s in self.sets}
        self._owners: dict[int, FileEntrySet] | None = None

    @classmethod
    def from_sets(cls, sets: list[FileEntrySet], root_cluster: int = 0,
                  cluster_size: int = 0) -> "DirectoryTree":
        """A tree over hand-assembled sets, grouped by parent cluster."""
        by_parent: dict[int, list[FileEntrySet]] = {}
        for s in sets:
            by_parent.setdefault(s.location.parent_cluster, []).append(s)
        nodes = []
        for parent, members in sorted(by_parent.items()):
            path = members[0].parent_path
            nodes.append(DirectoryNode(path, parent, (parent,), listing=DirectoryListing(members, [], [])))
        root = next((n for n in nodes if n.first_cluster == root_cluster), None)
        root = root or DirectoryNode("/", root_cluster, (), listing=DirectoryListing([], [], []))
        if root not in nodes:
            nodes.insert(0, root)
        return cls(root, nodes, cluster_size)

    def cluster_owners(self, fat: FatTable, cluster_size: int | None = None) -> dict[int, FileEntrySet]:
        """Cluster number -> live set currently holding it (cached)."""
        cluster_size = cluster_size or self.cluster_size
        if self._owners is None:
            owners: dict[int, FileEntrySet] = {}
            for d in self.directories:
                if not d.from_inactive and d.first_cluster:
                    for cn in d.clusters:
                        if d.entry is not None:
                            owners.setdefault(cn, d.entry)
            for s in self.live_sets():
                if s.is_directory:
                    continue
                for cn in file_clusters(s, fat, cluster_size):
                    owners.setdefault(cn, s)
            self._owners = owners
        return self._owners

    def next_set(self, entry: FileEntrySet) -> FileEntrySet | None:
        """The set recorded right after ``entry`` in the same directory."""
        siblings = [s for s in self.sets if s.location.parent_cluster == entry.location.parent_cluster]
        siblings.sort(key=lambda s: s.location.record_offset)
        for s in siblings:
            if s.location.record_offset > entry.location.record_offset:
                return s
        return None

    @property
    def specials(self) -> list[SpecialRecord]:
        return self.root.listing.specials if self.root.listing else []

    @property
    def root_records(self) -> list[SpecialRecord]:
        return self.specials

    def get(self, set_id: str) -> FileEntrySet:
        return self._by_id[set_id]

    def live_sets(self) -> list[FileEntrySet]:
        return [s for s in self.sets if s.live]

    def inactive_sets(self) -> list[FileEntrySet]:
        return [s for s in self.sets if not s.active]

    def directory(self, path: str) -> DirectoryNode | None:
        want = "/" + path.strip("/")
        for d in self.directories:
            if d.path == want and not d.from_inactive:
                return d
        for d in self.directories:
            if d.path == want:
                return d
        return None

    def directory_of(self, entry: FileEntrySet) -> DirectoryNode | None:
        for d in self.directories:
            if d.first_cluster == entry.location.parent_cluster:
                return d
        return None

    def errors(self) -> list[tuple[str, str]]:
        return [(d.path, e) for d in self.directories for e in d.errors]


def file_clusters(entry: FileEntrySet, fat: FatTable, cluster_size: int) -> tuple[int, ...]:
    """Clusters the set currently claims: a plain run, or a FAT chain bounded by its size."""
    span = entry.cluster_span(cluster_size)
    if span == 0 or entry.first_cluster < 2:
        return ()
    if entry.no_fat_chain:
        last = min(entry.first_cluster + span, fat.cluster_count + 2)
        return tuple(range(entry.first_cluster, last))
    return walk_chain(fat, entry.first_cluster, span).clusters


def _directory_clusters(entry: FileEntrySet, fat: FatTable, geom: VolumeGeometry) -> tuple[int, ...]:
    span = max(1, math.ceil(entry.file_size / geom.cluster_size_bytes))
    if entry.no_fat_chain:
        return tuple(cn for cn in range(entry.first_cluster, entry.first_cluster + span) if geom.in_range(cn))
    return walk_chain(fat, entry.first_cluster, span).clusters


def _read_directory(image: VolumeImage, geom: VolumeGeometry, node: DirectoryNode,
                    stop_at_end: bool) -> None:
    chunks = []
    offsets = []
    for cn in node.clusters:
        try:
            chunks.append(read_cluster(image, geom, cn))
            offsets.append(geom.cluster_to_offset(cn))
        except ClusterOutOfRangeError as exc:
            node.errors.append(f"unreadable-cluster {cn}: {exc}")
            break
    records = iter_records(b"".join(chunks), node.first_cluster, offsets,
                           geom.cluster_size_bytes, stop_at_end=stop_at_end)
    node.listing = assemble_sets(records, node.path, node.from_inactive)


def walk_tree(image: VolumeImage, geom: VolumeGeometry, fat: FatTable, bm=None,
              include_inactive: bool = True) -> DirectoryTree:
    """Read every directory reachable from the root.

    Live directories are walked first so that a moved directory is read at
    its live location; inactive directories follow, unless their first
    cluster was already visited or has since been handed to something else.
    """
    root_chain = walk_chain(fat, geom.root_first_cluster, geom.cluster_count)
    root = DirectoryNode("/", geom.root_first_cluster, root_chain.clusters)
    visited = {geom.root_first_cluster}
    directories = [root]
    live_queue = deque([root])
    dead_queue: deque[tuple[DirectoryNode, FileEntrySet]] = deque()

    def expand(node: DirectoryNode) -> None:
        _read_directory(image, geom, node, stop_at_end=not include_inactive)
        for s in node.sets:
            if not s.is_directory or s.malformed:
                continue
            if s.active and not node.from_inactive:
                child = _child(node, s, from_inactive=False)
                if child is not None:
                    live_queue.append(child)
            elif include_inactive:
                dead_queue.append((node, s))

    def _child(parent: DirectoryNode, s: FileEntrySet, from_inactive: bool) -> DirectoryNode | None:
        if not geom.in_range(s.first_cluster):
            parent.errors.append(f"directory {s.name!r} has invalid first cluster {s.first_cluster}")
            return None
        if s.first_cluster in visited:
            if not from_inactive:
                parent.errors.append(f"directory {s.name!r} cluster {s.first_cluster} already visited")
            return None
        visited.add(s.first_cluster)
        node = DirectoryNode(
            path=s.path,
            first_cluster=s.first_cluster,
            clusters=_directory_clusters(s, fat, geom),
            entry=s,
            from_inactive=from_inactive,
        )
        directories.append(node)
        return node

    while live_queue:
        expand(live_queue.popleft())
    while dead_queue:
        parent, s = dead_queue.popleft()
        if s.first_cluster in visited:
            continue
        if bm is not None and geom.in_range(s.first_cluster) and bm.is_allocated(s.first_cluster):
            parent.errors.append(
                f"inactive directory {s.name!r} skipped: cluster {s.first_cluster} is allocated to another object"
            )
            continue
        child = _child(parent, s, from_inactive=True)
        if child is not None:
            expand(child)

    directories.sort(key=lambda d: (d.from_inactive, d.path, d.first_cluster))
    return DirectoryTree(root, directories, geom.cluster_size_bytes)
