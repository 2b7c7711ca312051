"""Signature carving over unallocated clusters, with metadata re-attachment.

Files start on a cluster boundary, so by default only the first bytes of
each unallocated cluster are compared with known headers. Each hit is then
matched against surviving inactive entry sets by first cluster; the most
recent matching set supplies name, timestamps and the expected size, and a
fragmented match is completed through the FAT.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .bitmap import AllocationBitmap
from .direntry import FileEntrySet
from .fat import FatTable
from .findings import Finding, cluster_ref
from .recovery import FillPolicy, recover_chained
from .tree import DirectoryTree
from .volume import VolumeGeometry, VolumeImage

CATALOG_ENV = "EXFAT_FORENSICS_SIGNATURES"
CLUSTER = "cluster"
SECTOR = "sector"


@dataclass(frozen=True)
class Signature:
    name: str
    header: bytes
    footer: bytes | None = None
    granularity: str = CLUSTER

    def __post_init__(self):
        if not self.header:
            raise ValueError(f"signature {self.name!r} has an empty header")


JPEG = Signature("jpeg", b"\xFF\xD8", b"\xFF\xD9")
BUILTIN_SIGNATURES = (JPEG,)


def load_catalog(path: str | os.PathLike) -> list[Signature]:
    """Parse ``name, header-hex, footer-hex`` lines; footer optional, ``#`` comments."""
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) not in (2, 3) or not parts[0]:
            raise ValueError(f"{path}:{lineno}: expected 'name, header-hex[, footer-hex]'")
        try:
            header = bytes.fromhex(parts[1])
            footer = bytes.fromhex(parts[2]) if len(parts) == 3 and parts[2] else None
            out.append(Signature(parts[0], header, footer))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out


def default_signatures() -> list[Signature]:
    """The catalog named by the environment, else the built-in JPEG signature."""
    path = os.environ.get(CATALOG_ENV)
    if path:
        return load_catalog(path)
    return list(BUILTIN_SIGNATURES)


@dataclass(frozen=True)
class ScanHit:
    signature: Signature
    cluster: int | None
    sector: int | None = None
    # Byte offset of the hit inside its cluster; 0 for cluster-start hits.
    offset_in_cluster: int = 0

    @property
    def aligned(self) -> bool:
        return self.cluster is not None and self.offset_in_cluster == 0


def _match(data: bytes, signatures: Iterable[Signature]) -> Signature | None:
    for sig in signatures:
        if data.startswith(sig.header):
            return sig
    return None


def scan_unallocated(image: VolumeImage, geom: VolumeGeometry | None, bm: AllocationBitmap | None,
                     signatures: Iterable[Signature] | None = None,
                     granularity: str = CLUSTER) -> list[ScanHit]:
    """Header hits at the start of unallocated clusters, or of every sector.

    Sector mode without a bitmap scans the whole image from sector 0, which
    is the fallback for volumes whose boot record cannot be trusted.
    """
    sigs = list(signatures) if signatures is not None else default_signatures()
    if not sigs:
        return []
    width = max(len(s.header) for s in sigs)
    hits: list[ScanHit] = []
    if granularity == CLUSTER:
        if geom is None or bm is None:
            raise ValueError("cluster-start scanning needs geometry and a bitmap")
        for start, length in bm.unallocated_runs():
            for cn in range(start, start + length):
                sig = _match(image.read(geom.cluster_to_offset(cn), width), sigs)
                if sig is not None:
                    hits.append(ScanHit(sig, cn, geom.cluster_to_sector(cn)))
        return hits
    if granularity != SECTOR:
        raise ValueError(f"unknown granularity {granularity!r}")
    ss = geom.sector_size_bytes if geom is not None else 512
    if geom is not None and bm is not None:
        spc = geom.sectors_per_cluster
        sectors = (
            geom.cluster_to_sector(cn) + k
            for start, length in bm.unallocated_runs()
            for cn in range(start, start + length)
            for k in range(spc)
        )
    else:
        sectors = range(image.length // ss)
    for sector in sectors:
        sig = _match(image.read(sector * ss, min(width, image.length - sector * ss)), sigs)
        if sig is None:
            continue
        cn = geom.sector_to_cluster(sector) if geom is not None else None
        offset = sector * ss - geom.cluster_to_offset(cn) if cn is not None else 0
        hits.append(ScanHit(sig, cn, sector, offset))
    return hits


class ScanIndex:
    """First cluster -> non-live entry sets, built once per volume.

    Sets that are still active but sit in a deleted folder are included;
    their folder is gone, so their content is as exposed as a deleted file's.
    """

    def __init__(self, tree: DirectoryTree):
        self._by_cluster: dict[int, list[FileEntrySet]] = {}
        for s in sorted(tree.sets, key=lambda s: s.location.image_offset):
            if not s.live and s.first_cluster >= 2 and not s.is_directory:
                self._by_cluster.setdefault(s.first_cluster, []).append(s)

    def lookup(self, cluster: int) -> list[FileEntrySet]:
        return list(self._by_cluster.get(cluster, ()))

    def to_dict(self) -> dict:
        return {str(cn): [s.set_id for s in sets] for cn, sets in sorted(self._by_cluster.items())}


def match_entries(start_cluster: int, tree: DirectoryTree | ScanIndex) -> list[FileEntrySet]:
    index = tree if isinstance(tree, ScanIndex) else ScanIndex(tree)
    return index.lookup(start_cluster)


def select_most_recent(candidates: list[FileEntrySet]) -> FileEntrySet | None:
    """Latest by (modified, accessed, created); an exact tie chooses nothing."""
    if not candidates:
        return None
    best = max(s.recency_key() for s in candidates)
    top = [s for s in candidates if s.recency_key() == best]
    return top[0] if len(top) == 1 else None


@dataclass
class CarveHit:
    signature: str
    start_cluster: int | None
    sector: int | None
    candidates: list[FileEntrySet] = field(default_factory=list)
    chosen: FileEntrySet | None = None
    length: int = 0
    length_source: str = "run-end"      # footer | entry-file-size | run-end
    clusters: list[int] = field(default_factory=list)
    findings: list[Finding] = field(default_factory=list)
    content: bytes = field(default=b"", repr=False)

    @property
    def metadata(self) -> dict | None:
        if self.chosen is None:
            return None
        s = self.chosen
        return {
            "name": s.name,
            "path": s.path,
            "created": s.created.to_dict(),
            "modified": s.modified.to_dict(),
            "accessed": s.accessed.to_dict(),
            "attributes": s.attributes,
            "file_size": s.file_size,
        }

    def to_dict(self) -> dict:
        return {
            "signature": self.signature,
            "start_cluster": self.start_cluster,
            "sector": self.sector,
            "candidates": [s.set_id for s in self.candidates],
            "chosen": self.chosen.set_id if self.chosen else None,
            "length": self.length,
            "length_source": self.length_source,
            "clusters": list(self.clusters),
            "metadata": self.metadata,
            "findings": [f.to_dict() for f in self.findings],
        }


def carve(hit: ScanHit, image: VolumeImage, geom: VolumeGeometry, bm: AllocationBitmap,
          fat: FatTable, index: ScanIndex, tree: DirectoryTree | None = None) -> CarveHit:
    out = CarveHit(hit.signature.name, hit.cluster, hit.sector)
    cs = geom.cluster_size_bytes
    if hit.cluster is None:
        out.findings.append(Finding("alignment", "outside heap", (f"sector:{hit.sector}",),
                                    "no cluster alignment guarantee"))
        return out
    run = bm.run_containing(hit.cluster)
    if run is None:
        out.findings.append(Finding("bitmap", "allocated", (cluster_ref(hit.cluster),),
                                    "hit lies in an allocated cluster; nothing carved"))
        return out
    run_start, run_len = run
    run_end = run_start + run_len            # exclusive
    start = geom.cluster_to_offset(hit.cluster) + hit.offset_in_cluster
    available = (run_end - hit.cluster) * cs - hit.offset_in_cluster

    if not hit.aligned:
        out.findings.append(Finding("alignment", "unaligned", (f"sector:{hit.sector}",),
                                    "no cluster alignment guarantee; entry matching skipped"))
    else:
        out.candidates = index.lookup(hit.cluster)
        out.chosen = select_most_recent(out.candidates)
        if out.candidates and out.chosen is None:
            out.findings.append(Finding(
                "most-recent-entry", "tie", tuple(f"set:{s.set_id}" for s in out.candidates),
                "identical timestamps; update order is not recorded on disk",
            ))
        elif len(out.candidates) > 1:
            out.findings.append(Finding(
                "most-recent-entry", f"chose {out.chosen.set_id}",
                tuple(f"set:{s.set_id}" for s in out.candidates),
                "latest by modification, access, then creation time",
            ))

    chosen = out.chosen
    if chosen is not None:
        want = chosen.file_size
        carved = min(want, available)
        out.length_source = "entry-file-size"
        if carved != want and not chosen.no_fat_chain:
            out.findings.append(Finding(
                "size-mismatch", f"carved {carved} of {want} bytes",
                (cluster_ref(hit.cluster), f"set:{chosen.set_id}"),
                "explained: 'do not use FAT' flag bit is 0, the file continues along its FAT chain",
            ))
        if not chosen.no_fat_chain:
            rec = recover_chained(chosen, image, geom, fat, bm, FillPolicy.SUBSTITUTE, tree)
            out.content = rec.content
            out.clusters = rec.cluster_numbers
            out.length = len(rec.content)
            out.findings.append(Finding("fat-completion", rec.integrity.value,
                                        (cluster_ref(hit.cluster),),
                                        f"chain walk: {rec.terminated_by.value if rec.terminated_by else 'n/a'}"))
            out.findings.extend(rec.findings)
            return out
        if carved != want:
            out.findings.append(Finding(
                "size-mismatch", f"carved {carved} of {want} bytes",
                (cluster_ref(hit.cluster), f"set:{chosen.set_id}"),
                "contiguous file runs into allocated clusters; remainder not carved",
            ))
        out.content = image.read(start, carved)
    else:
        data = image.read(start, available)
        footer = hit.signature.footer
        pos = data.find(footer, len(hit.signature.header)) if footer else -1
        if pos >= 0:
            out.content = data[:pos + len(footer)]
            out.length_source = "footer"
        else:
            out.content = data
            out.length_source = "run-end"
    out.length = len(out.content)
    first = hit.cluster
    last = hit.cluster + (hit.offset_in_cluster + out.length - 1) // cs if out.length else first - 1
    out.clusters = list(range(first, last + 1))
    return out


@dataclass
class CarveResult:
    hits: list[CarveHit]
    index: ScanIndex
    granularity: str

    def to_dict(self) -> dict:
        return {
            "granularity": self.granularity,
            "alignment": "cluster-start" if self.granularity == CLUSTER else "no cluster alignment guarantee",
            "hits": [h.to_dict() for h in self.hits],
            "index": self.index.to_dict(),
        }


def carve_volume(volume, signatures: Iterable[Signature] | None = None,
                 granularity: str = CLUSTER) -> CarveResult:
    """Scan, match and carve a whole :class:`~exfat_forensics.analysis.ExfatVolume`."""
    index = ScanIndex(volume.tree)
    scan = scan_unallocated(volume.image, volume.geometry, volume.bitmap, signatures, granularity)
    hits = [carve(h, volume.image, volume.geometry, volume.bitmap, volume.fat, index, volume.tree)
            for h in scan]
    hits.sort(key=lambda h: (h.start_cluster if h.start_cluster is not None else -1, h.sector or 0))
    return CarveResult(hits, index, granularity)
