"""The single exFAT FAT: 32-bit little-endian chaining cells.

In exFAT the FAT says nothing about allocation. A zero cell may belong to a
contiguous live file, and a non-zero cell may be left over from a deleted
one, so chain walks report why they stopped instead of raising.
"""
from __future__ import annotations

import sys
from array import array
from dataclasses import dataclass
from enum import Enum

from .errors import ClusterOutOfRangeError, FatTooShortError
from .volume import VolumeGeometry, VolumeImage

END_OF_CHAIN = 0xFFFFFFFF
CELL_SIZE = 4


class Termination(str, Enum):
    END_OF_CHAIN = "end-of-chain-marker"
    ZERO_CELL = "zero-cell"
    OUT_OF_RANGE = "out-of-range-cell"
    CYCLE = "cycle-detected"
    LENGTH_LIMIT = "length-limit"


@dataclass(frozen=True)
class ClusterChain:
    clusters: tuple[int, ...]
    terminated_by: Termination
    # Cell value that stopped the walk (None for a length limit).
    final_value: int | None = None

    def __len__(self) -> int:
        return len(self.clusters)

    def to_dict(self) -> dict:
        return {
            "clusters": list(self.clusters),
            "terminated_by": self.terminated_by.value,
            "final_value": self.final_value,
        }


class FatTable:
    def __init__(self, cells: array, cluster_count: int):
        if len(cells) < cluster_count + 2:
            raise FatTooShortError(f"{len(cells)} cells for {cluster_count} clusters")
        self._cells = cells
        self.cluster_count = cluster_count

    @classmethod
    def from_bytes(cls, data: bytes, cluster_count: int | None = None) -> "FatTable":
        usable = len(data) - len(data) % CELL_SIZE
        cells = array("I")
        assert cells.itemsize == CELL_SIZE
        cells.frombytes(bytes(data[:usable]))
        if sys.byteorder != "little":
            cells.byteswap()
        if cluster_count is None:
            cluster_count = len(cells) - 2
        return cls(cells, cluster_count)

    @property
    def cell_count(self) -> int:
        return len(self._cells)

    @staticmethod
    def cell_offset(cn: int) -> int:
        """Byte offset of the cell for ``cn`` relative to the FAT start."""
        return CELL_SIZE * cn

    def cell(self, cn: int) -> int:
        if not 0 <= cn < len(self._cells):
            raise ClusterOutOfRangeError(f"no FAT cell for cluster {cn}")
        return self._cells[cn]

    def is_chain_target(self, value: int) -> bool:
        return 2 <= value < self.cluster_count + 2

    def walk_chain(self, start_cn: int, max_clusters: int | None = None) -> ClusterChain:
        return walk_chain(self, start_cn, max_clusters)


def load_fat(image: VolumeImage, geom: VolumeGeometry) -> FatTable:
    needed = (geom.cluster_count + 2) * CELL_SIZE
    if geom.fat_length_sectors * geom.sector_size_bytes < needed:
        raise FatTooShortError("FAT length in VBR cannot hold every cluster")
    try:
        data = image.read(geom.fat_offset_bytes, needed)
    except ClusterOutOfRangeError as exc:
        raise FatTooShortError(f"image ends inside the FAT: {exc}") from exc
    return FatTable.from_bytes(data, geom.cluster_count)


def walk_chain(fat: FatTable, start_cn: int, max_clusters: int | None = None) -> ClusterChain:
    """Follow cells from ``start_cn`` until a terminator or ``max_clusters``.

    Reserved cells 0 and 1 are never followed: reaching them is reported as
    an out-of-range cell.
    """
    if max_clusters is None:
        max_clusters = fat.cluster_count
    if not fat.is_chain_target(start_cn):
        return ClusterChain((), Termination.OUT_OF_RANGE, start_cn)
    if max_clusters <= 0:
        return ClusterChain((), Termination.LENGTH_LIMIT)

    clusters = [start_cn]
    seen = {start_cn}
    while True:
        value = fat.cell(clusters[-1])
        if value == END_OF_CHAIN:
            return ClusterChain(tuple(clusters), Termination.END_OF_CHAIN, value)
        if value == 0:
            return ClusterChain(tuple(clusters), Termination.ZERO_CELL, value)
        if not fat.is_chain_target(value):
            return ClusterChain(tuple(clusters), Termination.OUT_OF_RANGE, value)
        if len(clusters) >= max_clusters:
            return ClusterChain(tuple(clusters), Termination.LENGTH_LIMIT)
        if value in seen:
            return ClusterChain(tuple(clusters), Termination.CYCLE, value)
        clusters.append(value)
        seen.add(value)
