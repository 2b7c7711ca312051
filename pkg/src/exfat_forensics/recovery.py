"""Content recovery for deleted files and for the former tails of shortened ones.

Deleting a file only clears its bitmap bits, so a contiguous file is read
back from its first cluster and size, and a fragmented one by following the
FAT chain that the driver never wiped. Every cluster is checked against the
bitmap; allocated ones belong to something newer and are handled per the
chosen fill policy rather than silently mixed in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .bitmap import AllocationBitmap
from .direntry import FileEntrySet
from .errors import ClusterOutOfRangeError, FileSizeExceedsVolumeError
from .fat import ClusterChain, FatTable, Termination, walk_chain
from .findings import Finding, bitmap_ref, cluster_ref, fat_ref
from .tree import DirectoryTree, file_clusters
from .volume import VolumeGeometry, VolumeImage, read_cluster


class FillPolicy(str, Enum):
    SUBSTITUTE = "substitute-zero-filler"
    SKIP = "skip"
    INCLUDE = "include-flagged"

    @classmethod
    def parse(cls, text: "str | FillPolicy") -> "FillPolicy":
        if isinstance(text, cls):
            return text
        aliases = {"substitute": cls.SUBSTITUTE, "zero": cls.SUBSTITUTE, "include": cls.INCLUDE}
        if text in aliases:
            return aliases[text]
        return cls(text)


class Integrity(str, Enum):
    COMPLETE = "complete"
    PARTIAL = "partial"
    TAIL_SPECULATIVE = "tail-speculative"


CLEAN = "clean"
OVERWRITTEN = "overwritten"


@dataclass(frozen=True)
class ClusterRecord:
    cluster: int
    provenance: str       # clean | overwritten
    handling: str         # used | substituted | skipped | included
    length: int           # bytes of this cluster that belong to the file

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RecoveredFile:
    entry: FileEntrySet
    strategy: str
    clusters: list[ClusterRecord] = field(default_factory=list)
    content: bytes = field(default=b"", repr=False)
    integrity: Integrity = Integrity.COMPLETE
    findings: list[Finding] = field(default_factory=list)
    fill_policy: FillPolicy = FillPolicy.SUBSTITUTE
    terminated_by: Termination | None = None
    # Tail recovery only: stale bytes past the current end of the last cluster.
    slack_length: int = 0

    @property
    def cluster_numbers(self) -> list[int]:
        return [c.cluster for c in self.clusters]

    @property
    def provenance(self) -> list[str]:
        return [c.provenance for c in self.clusters]

    def to_dict(self) -> dict:
        return {
            "set_id": self.entry.set_id,
            "name": self.entry.name,
            "path": self.entry.path,
            "strategy": self.strategy,
            "integrity": self.integrity.value,
            "fill_policy": self.fill_policy.value,
            "file_size": self.entry.file_size,
            "content_length": len(self.content),
            "slack_length": self.slack_length,
            "terminated_by": self.terminated_by.value if self.terminated_by else None,
            "clusters": [c.to_dict() for c in self.clusters],
            "findings": [f.to_dict() for f in self.findings],
            "metadata": {
                "attributes": self.entry.attributes,
                "created": self.entry.created.to_dict(),
                "modified": self.entry.modified.to_dict(),
                "accessed": self.entry.accessed.to_dict(),
                "no_fat_chain": self.entry.no_fat_chain,
            },
        }


def _own_clusters(entry: FileEntrySet, fat: FatTable | None, cluster_size: int) -> frozenset[int]:
    # An active file's own allocation bits do not mean "overwritten".
    if not entry.live or fat is None:
        return frozenset()
    return frozenset(file_clusters(entry, fat, cluster_size))


def _assemble(entry: FileEntrySet, clusters: list[int], image: VolumeImage, geom: VolumeGeometry,
              bm: AllocationBitmap, policy: FillPolicy, own: frozenset[int],
              strategy: str) -> RecoveredFile:
    cs = geom.cluster_size_bytes
    out = RecoveredFile(entry, strategy, fill_policy=policy)
    parts = []
    remaining = entry.file_size
    for cn in clusters:
        length = min(cs, remaining)
        remaining -= length
        if bm.is_allocated(cn) and cn not in own:
            out.findings.append(Finding("bitmap", "allocated", (cluster_ref(cn), bitmap_ref(cn)),
                                        "cluster belongs to a more recent object"))
            if policy is FillPolicy.SUBSTITUTE:
                parts.append(bytes(length))
                handling = "substituted"
            elif policy is FillPolicy.SKIP:
                handling = "skipped"
            else:
                parts.append(read_cluster(image, geom, cn)[:length])
                handling = "included"
            out.clusters.append(ClusterRecord(cn, OVERWRITTEN, handling, length))
        else:
            parts.append(read_cluster(image, geom, cn)[:length])
            out.clusters.append(ClusterRecord(cn, CLEAN, "used", length))
    out.content = b"".join(parts)
    covered = entry.file_size - remaining
    clean = all(c.provenance == CLEAN for c in out.clusters)
    out.integrity = Integrity.COMPLETE if clean and covered == entry.file_size else Integrity.PARTIAL
    return out


def _check_first(entry: FileEntrySet, geom: VolumeGeometry) -> None:
    if not geom.in_range(entry.first_cluster):
        raise ClusterOutOfRangeError(
            f"set {entry.set_id} first cluster {entry.first_cluster} outside the heap"
        )


def recover_contiguous(entry: FileEntrySet, image: VolumeImage, geom: VolumeGeometry,
                       bm: AllocationBitmap, fill_policy: FillPolicy | str = FillPolicy.SUBSTITUTE,
                       fat: FatTable | None = None) -> RecoveredFile:
    """Read ceil(size / cluster) clusters from the first cluster, bitmap-checking each."""
    policy = FillPolicy.parse(fill_policy)
    if entry.file_size == 0:
        return RecoveredFile(entry, "contiguous", fill_policy=policy)
    _check_first(entry, geom)
    cs = geom.cluster_size_bytes
    span = math.ceil(entry.file_size / cs)
    if entry.first_cluster + span > geom.cluster_count + 2:
        raise FileSizeExceedsVolumeError(
            f"{entry.file_size} bytes from cluster {entry.first_cluster} run past the last cluster"
        )
    clusters = list(range(entry.first_cluster, entry.first_cluster + span))
    return _assemble(entry, clusters, image, geom, bm, policy, _own_clusters(entry, fat, cs), "contiguous")


def chain_sanity(entry: FileEntrySet, chain: ClusterChain, tree: DirectoryTree | None,
                 fat: FatTable, bm: AllocationBitmap, cluster_size: int) -> list[Finding]:
    """Cross-checks of a rebuilt chain against size, bitmap and other sets."""
    findings: list[Finding] = []
    need = entry.cluster_span(cluster_size)
    clusters = chain.clusters
    if len(clusters) < need:
        findings.append(Finding(
            "chain-short", f"{len(clusters)} of {need} clusters",
            (fat_ref(clusters[-1]),) if clusters else (),
            f"walk stopped: {chain.terminated_by.value}",
        ))
    elif clusters:
        last = clusters[-1]
        value = fat.cell(last)
        if fat.is_chain_target(value):
            findings.append(Finding(
                "chain-long", f"chain continues to {value}", (fat_ref(last),),
                "file size is covered before the chain ends",
            ))
    own = _own_clusters(entry, fat, cluster_size)
    owners = tree.cluster_owners(fat, cluster_size) if tree is not None else {}
    for cn in clusters:
        if cn in own:
            continue
        if bm.is_allocated(cn):
            owner = owners.get(cn)
            findings.append(Finding(
                "reused-by-active", "allocated",
                (cluster_ref(cn), bitmap_ref(cn)) + ((f"set:{owner.set_id}",) if owner else ()),
                f"held by {owner.path}" if owner else "allocated to another object",
            ))
    if tree is not None:
        members = set(clusters)
        for s in tree.sets:
            if s is entry or s.live or s.first_cluster not in members:
                continue
            if s.first_cluster == entry.first_cluster and s.created.raw == entry.created.raw:
                continue  # earlier name or location of the same file
            findings.append(Finding(
                "claimed-by-inactive", f"first cluster of {s.path}",
                (cluster_ref(s.first_cluster), f"set:{s.set_id}"),
            ))
    return findings


def recover_chained(entry: FileEntrySet, image: VolumeImage, geom: VolumeGeometry, fat: FatTable,
                    bm: AllocationBitmap, fill_policy: FillPolicy | str = FillPolicy.SUBSTITUTE,
                    tree: DirectoryTree | None = None) -> RecoveredFile:
    """Follow the FAT from the first cluster until the file size is covered."""
    policy = FillPolicy.parse(fill_policy)
    if entry.file_size == 0:
        return RecoveredFile(entry, "fat-chain", fill_policy=policy)
    _check_first(entry, geom)
    cs = geom.cluster_size_bytes
    chain = walk_chain(fat, entry.first_cluster, entry.cluster_span(cs))
    out = _assemble(entry, list(chain.clusters), image, geom, bm, policy,
                    _own_clusters(entry, fat, cs), "fat-chain")
    out.terminated_by = chain.terminated_by
    out.findings.extend(chain_sanity(entry, chain, tree, fat, bm, cs))
    return out


def recover_file(entry: FileEntrySet, image: VolumeImage, geom: VolumeGeometry, fat: FatTable,
                 bm: AllocationBitmap, fill_policy: FillPolicy | str = FillPolicy.SUBSTITUTE,
                 tree: DirectoryTree | None = None) -> RecoveredFile:
    if entry.no_fat_chain or entry.file_size == 0:
        return recover_contiguous(entry, image, geom, bm, fill_policy, fat)
    return recover_chained(entry, image, geom, fat, bm, fill_policy, tree)


def _tail_result(entry: FileEntrySet, strategy: str, clusters: list[int], image: VolumeImage,
                 geom: VolumeGeometry, last: int | None, findings: list[Finding]) -> RecoveredFile:
    cs = geom.cluster_size_bytes
    out = RecoveredFile(entry, strategy, integrity=Integrity.TAIL_SPECULATIVE, findings=findings)
    parts = []
    if clusters and last is not None:
        used = entry.file_size - (entry.cluster_span(cs) - 1) * cs
        slack = read_cluster(image, geom, last)[used:]
        out.slack_length = len(slack)
        parts.append(slack)
    for cn in clusters:
        parts.append(read_cluster(image, geom, cn))
        out.clusters.append(ClusterRecord(cn, CLEAN, "used", cs))
    out.content = b"".join(parts)
    return out


def recover_shortened_tail(entry: FileEntrySet, image: VolumeImage, geom: VolumeGeometry,
                           fat: FatTable, bm: AllocationBitmap,
                           tree: DirectoryTree | None = None) -> RecoveredFile:
    """Hypothesise the former tail of a file that was made smaller.

    The stale chain is entered at the FAT cell of the file's last current
    cluster. If that cell leads nowhere, the unallocated run right after the
    file is proposed instead. Content starts with the slack of the last
    current cluster, followed by whole candidate clusters. Only clusters whose
    allocation bit is clear are ever returned.
    """
    cs = geom.cluster_size_bytes
    findings: list[Finding] = []
    current = list(file_clusters(entry, fat, cs))
    if not current:
        findings.append(Finding("current-extent", "empty", (f"set:{entry.set_id}",),
                                "file holds no clusters; nothing to extend"))
        return _tail_result(entry, "none", [], image, geom, None, findings)
    last = current[-1]
    own = set(current)

    value = fat.cell(last)
    findings.append(Finding("stale-chain-entry", f"cell = 0x{value:08X}", (fat_ref(last),),
                            "stale chain entered at the FAT cell of the last current cluster"))
    if fat.is_chain_target(value) and value not in own:
        chain = walk_chain(fat, value, fat.cluster_count)
        tail = []
        for cn in chain.clusters:
            if cn in own:
                findings.append(Finding("stale-chain", "loops into current extent", (cluster_ref(cn),)))
                break
            if bm.is_allocated(cn):
                findings.append(Finding("stale-chain", "stops at allocated cluster",
                                        (cluster_ref(cn), bitmap_ref(cn))))
                break
            tail.append(cn)
        else:
            findings.append(Finding("stale-chain", f"ends: {chain.terminated_by.value}",
                                    (fat_ref(chain.clusters[-1]),) if chain.clusters else ()))
        if tail:
            return _tail_result(entry, "stale-fat-chain", tail, image, geom, last, findings)

    run = []
    cn = last + 1
    while geom.in_range(cn) and not bm.is_allocated(cn):
        run.append(cn)
        cn += 1
    if not run:
        findings.append(Finding("no-candidate-run", "following cluster allocated",
                                (cluster_ref(last + 1),) if geom.in_range(last + 1) else ()))
        return _tail_result(entry, "contiguous-run", [], image, geom, None, findings)

    if tree is not None:
        starts = {s.first_cluster: s for s in sorted(tree.sets, key=lambda s: s.location.image_offset, reverse=True)
                  if s is not entry and not s.live}
        for i, c in enumerate(run):
            if c in starts:
                s = starts[c]
                findings.append(Finding("claimed-by-inactive", "run truncated",
                                        (cluster_ref(c), f"set:{s.set_id}"),
                                        f"{s.path} starts inside the candidate run"))
                run = run[:i]
                break
    if not run:
        return _tail_result(entry, "contiguous-run", [], image, geom, None, findings)

    after = run[-1] + 1
    if tree is not None:
        nxt = tree.next_set(entry)
        if nxt is not None and nxt.first_cluster == after:
            findings.append(Finding("next-entry-adjacent", "consistent",
                                    (f"set:{nxt.set_id}", cluster_ref(after)),
                                    f"next entry {nxt.name!r} starts right after the run"))
        else:
            neighbour = next((s for s in tree.live_sets() if s.first_cluster == after), None)
            result = "consistent" if neighbour is not None else "not-adjacent"
            locs = (cluster_ref(after),) + ((f"set:{neighbour.set_id}",) if neighbour else ())
            findings.append(Finding("next-entry-adjacent", result, locs,
                                    "checked the following entry and any live set starting after the run"))
    for c in [last] + run:
        v = fat.cell(c)
        if v and v != c + 1 and not (c == run[-1] and v == 0xFFFFFFFF):
            findings.append(Finding("fat-chaining-in-run", "inconsistent", (fat_ref(c),),
                                    f"cell 0x{v:08X} does not continue the run"))
        elif v:
            findings.append(Finding("fat-chaining-in-run", "consistent", (fat_ref(c),)))
    return _tail_result(entry, "contiguous-run", run, image, geom, last, findings)
