"""Allocation bitmap: one bit per heap cluster, cluster 2 in bit 0 of byte 0."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from .direntry import SpecialKind, SpecialRecord
from .errors import BitmapEntryMissingError, BitmapSizeInconsistentError, ClusterOutOfRangeError
from .fat import FatTable, walk_chain
from .volume import VolumeGeometry, VolumeImage, read_clusters

_FULL = 0xFF


def bit_position(cn: int) -> tuple[int, int]:
    """(byte index, bit index) of the allocation flag for cluster ``cn``.

    Bit 0 is the least significant bit, so clusters 2 and 10 both land on
    bit 0 (of bytes 0 and 1).
    """
    if cn < 2:
        raise ClusterOutOfRangeError(f"cluster {cn} has no allocation bit")
    return divmod(cn - 2, 8)


@dataclass(frozen=True)
class BitmapLocation:
    first_cluster: int
    size_bytes: int
    record_offset: int = 0


def locate_bitmap(root_records: Iterable, cluster_count: int | None = None) -> BitmapLocation:
    """Find the active 0x81 record among the root directory's records."""
    for rec in root_records:
        if isinstance(rec, SpecialRecord) and rec.special is SpecialKind.BITMAP and rec.active:
            if cluster_count is not None and rec.size < math.ceil(cluster_count / 8):
                raise BitmapSizeInconsistentError(
                    f"bitmap holds {rec.size} bytes, {cluster_count} clusters need {math.ceil(cluster_count / 8)}"
                )
            return BitmapLocation(rec.first_cluster, rec.size, rec.raw.offset)
    raise BitmapEntryMissingError("root directory has no 0x81 allocation bitmap record")


@dataclass(frozen=True)
class AllocationBitmap:
    data: bytes = field(repr=False)
    cluster_count: int
    first_cluster: int = 0
    size_bytes: int = 0

    def __post_init__(self):
        if len(self.data) < math.ceil(self.cluster_count / 8):
            raise BitmapSizeInconsistentError(
                f"{len(self.data)} bitmap bytes cannot cover {self.cluster_count} clusters"
            )

    @classmethod
    def from_flags(cls, flags: Iterable[int | bool], first_cn: int = 2, cluster_count: int | None = None):
        """Build from per-cluster flags beginning at ``first_cn``; the rest read as unallocated."""
        flags = list(flags)
        if cluster_count is None:
            cluster_count = first_cn - 2 + len(flags)
        buf = bytearray(math.ceil(cluster_count / 8))
        for i, flag in enumerate(flags):
            if flag:
                byte_index, bit_index = bit_position(first_cn + i)
                buf[byte_index] |= 1 << bit_index
        return cls(bytes(buf), cluster_count, size_bytes=len(buf))

    def is_allocated(self, cn: int) -> bool:
        if not 2 <= cn < self.cluster_count + 2:
            raise ClusterOutOfRangeError(f"cluster {cn} outside [2, {self.cluster_count + 2})")
        byte_index, bit_index = bit_position(cn)
        return bool(self.data[byte_index] >> bit_index & 1)

    @property
    def trailing_bits(self) -> int:
        """Bits past the last cluster, kept for reporting only."""
        tail = len(self.data) * 8 - self.cluster_count
        if tail <= 0:
            return 0
        value = int.from_bytes(self.data, "little") >> self.cluster_count
        return value & ((1 << tail) - 1)

    def allocated_count(self) -> int:
        full, rest = divmod(self.cluster_count, 8)
        count = sum(bin(b).count("1") for b in self.data[:full])
        if rest:
            count += bin(self.data[full] & ((1 << rest) - 1)).count("1")
        return count

    def unallocated_runs(self) -> list[tuple[int, int]]:
        return unallocated_runs(self)

    def runs(self, allocated: bool) -> list[tuple[int, int]]:
        """Maximal runs of clusters whose flag equals ``allocated``."""
        skip = _FULL if not allocated else 0x00
        out: list[tuple[int, int]] = []
        start = None
        limit = self.cluster_count
        data = self.data
        idx = 0
        while idx < limit:
            byte_index, bit_index = divmod(idx, 8)
            if bit_index == 0 and idx + 8 <= limit and data[byte_index] == skip:
                if start is not None:
                    out.append((start + 2, idx - start))
                    start = None
                idx += 8
                continue
            if bit_index == 0 and idx + 8 <= limit and data[byte_index] == (_FULL ^ skip):
                if start is None:
                    start = idx
                idx += 8
                continue
            bit = bool(data[byte_index] >> bit_index & 1)
            if bit == allocated:
                if start is None:
                    start = idx
            elif start is not None:
                out.append((start + 2, idx - start))
                start = None
            idx += 1
        if start is not None:
            out.append((start + 2, limit - start))
        return out

    def run_containing(self, cn: int) -> tuple[int, int] | None:
        """The maximal unallocated run holding ``cn``, or None when allocated."""
        if self.is_allocated(cn):
            return None
        lo = cn
        while lo > 2 and not self.is_allocated(lo - 1):
            lo -= 1
        hi = cn
        while hi + 1 < self.cluster_count + 2 and not self.is_allocated(hi + 1):
            hi += 1
        return lo, hi - lo + 1


def is_allocated(bm: AllocationBitmap, cn: int) -> bool:
    return bm.is_allocated(cn)


def unallocated_runs(bm: AllocationBitmap) -> list[tuple[int, int]]:
    """Ascending, non-overlapping maximal runs of free clusters as (start, length)."""
    return bm.runs(allocated=False)


def load_bitmap(image: VolumeImage, geom: VolumeGeometry, fat: FatTable,
                root_records: Iterable) -> AllocationBitmap:
    loc = locate_bitmap(root_records, geom.cluster_count)
    span = math.ceil(loc.size_bytes / geom.cluster_size_bytes)
    chain = walk_chain(fat, loc.first_cluster, span)
    if len(chain) == span and list(chain.clusters) != list(range(loc.first_cluster, loc.first_cluster + span)):
        data = b"".join(read_clusters(image, geom, cn, 1) for cn in chain.clusters)
    else:
        data = read_clusters(image, geom, loc.first_cluster, span)
    return AllocationBitmap(data[:loc.size_bytes], geom.cluster_count, loc.first_cluster, loc.size_bytes)
