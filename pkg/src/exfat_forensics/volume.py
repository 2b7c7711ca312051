"""Evidence image access and Volume Boot Record decoding.

The image is mapped read-only; nothing in this package ever opens evidence
for writing. Cluster numbering starts at 2 for the first heap cluster.
"""
from __future__ import annotations

import hashlib
import mmap
import os
import struct
from dataclasses import dataclass, field, replace

from .errors import (
    ClusterOutOfRangeError,
    ImageError,
    ImageNotFoundError,
    ImageTooShortError,
    InconsistentGeometryError,
    NotExfatError,
)

EXFAT_NAME = b"EXFAT   "
BOOT_SIGNATURE = 0xAA55
MIN_SECTOR = 512

# Byte offsets inside the main boot sector.
VBR_PARTITION_OFFSET = 0x40
VBR_VOLUME_LENGTH = 0x48
VBR_FAT_OFFSET = 0x50
VBR_FAT_LENGTH = 0x54
VBR_HEAP_OFFSET = 0x58
VBR_CLUSTER_COUNT = 0x5C
VBR_ROOT_CLUSTER = 0x60
VBR_SERIAL = 0x64
VBR_REVISION = 0x68
VBR_SECTOR_SHIFT = 0x6C
VBR_CLUSTER_SHIFT = 0x6D
VBR_NUMBER_OF_FATS = 0x6E


class VolumeImage:
    """Immutable, bounds-checked view over a raw image or a partition slice.

    Reads go through ``read`` which slices the underlying buffer without any
    seek state, so a single instance can be shared between threads.
    """

    def __init__(self, buffer, source: str | None = None, partition_offset: int = 0):
        if partition_offset < 0:
            raise ImageTooShortError("negative partition offset")
        self._buffer = buffer
        self._mmap = buffer if isinstance(buffer, mmap.mmap) else None
        self._file = None
        self.source = source
        self.partition_offset = partition_offset
        total = len(buffer)
        if total - partition_offset < MIN_SECTOR:
            raise ImageTooShortError(
                f"image has {total} bytes, need at least {MIN_SECTOR} past offset {partition_offset}"
            )
        self.length = total - partition_offset

    @classmethod
    def from_bytes(cls, data: bytes, partition_offset: int = 0, source: str | None = None) -> "VolumeImage":
        return cls(bytes(data), source=source, partition_offset=partition_offset)

    def read(self, offset: int, length: int) -> bytes:
        if offset < 0 or length < 0 or offset + length > self.length:
            raise ClusterOutOfRangeError(
                f"read of {length} bytes at {offset} outside volume of {self.length} bytes"
            )
        start = self.partition_offset + offset
        return bytes(self._buffer[start:start + length])

    def digest(self) -> str:
        """SHA-256 of the whole underlying image (not only the partition slice)."""
        h = hashlib.sha256()
        view = memoryview(self._buffer)
        step = 1 << 22
        for pos in range(0, len(self._buffer), step):
            h.update(view[pos:pos + step])
        view.release()
        return h.hexdigest()

    def close(self) -> None:
        if self._mmap is not None:
            self._mmap.close()
            self._mmap = None
        if self._file is not None:
            self._file.close()
            self._file = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def open_image(path: str | os.PathLike, partition_offset_bytes: int = 0) -> VolumeImage:
    """Map ``path`` read-only. No lock is taken, other readers are unaffected."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise ImageNotFoundError(f"no such image: {path}")
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise ImageError(f"cannot open {path}: {exc}") from exc
    try:
        size = os.fstat(fh.fileno()).st_size
        if size - partition_offset_bytes < MIN_SECTOR:
            raise ImageTooShortError(
                f"{path}: {size} bytes, need {MIN_SECTOR} past offset {partition_offset_bytes}"
            )
        buffer = mmap.mmap(fh.fileno(), 0, access=mmap.ACCESS_READ)
    except ImageTooShortError:
        fh.close()
        raise
    except (OSError, ValueError) as exc:
        fh.close()
        raise ImageError(f"cannot map {path}: {exc}") from exc
    image = VolumeImage(buffer, source=path, partition_offset=partition_offset_bytes)
    image._file = fh
    return image


@dataclass(frozen=True)
class VolumeGeometry:
    sector_size_bytes: int
    sectors_per_cluster: int
    fat_offset_sectors: int
    fat_length_sectors: int
    heap_offset_sectors: int
    cluster_count: int
    root_first_cluster: int
    volume_length_sectors: int = 0
    partition_offset_sectors: int = 0
    serial_number: int = 0
    revision: int = 0
    number_of_fats: int = 1
    volume_label: str | None = None
    raw_vbr: bytes = field(default=b"", repr=False, compare=False)

    @property
    def cluster_size_bytes(self) -> int:
        return self.sector_size_bytes * self.sectors_per_cluster

    @property
    def heap_offset_bytes(self) -> int:
        return self.heap_offset_sectors * self.sector_size_bytes

    @property
    def fat_offset_bytes(self) -> int:
        return self.fat_offset_sectors * self.sector_size_bytes

    @property
    def last_cluster(self) -> int:
        return self.cluster_count + 1

    def in_range(self, cn: int) -> bool:
        return 2 <= cn < self.cluster_count + 2

    def check_cluster(self, cn: int) -> None:
        if not self.in_range(cn):
            raise ClusterOutOfRangeError(
                f"cluster {cn} outside [2, {self.cluster_count + 2})"
            )

    def cluster_to_offset(self, cn: int) -> int:
        self.check_cluster(cn)
        return (self.heap_offset_sectors + (cn - 2) * self.sectors_per_cluster) * self.sector_size_bytes

    def sector_to_cluster(self, sector: int) -> int | None:
        """Cluster holding volume-relative ``sector``; None inside the system area."""
        rel = sector - self.heap_offset_sectors
        if rel < 0:
            return None
        cn = rel // self.sectors_per_cluster + 2
        return cn if self.in_range(cn) else None

    def cluster_to_sector(self, cn: int) -> int:
        return self.cluster_to_offset(cn) // self.sector_size_bytes

    def to_dict(self) -> dict:
        return {
            "sector_size_bytes": self.sector_size_bytes,
            "sectors_per_cluster": self.sectors_per_cluster,
            "cluster_size_bytes": self.cluster_size_bytes,
            "fat_offset_sectors": self.fat_offset_sectors,
            "fat_length_sectors": self.fat_length_sectors,
            "heap_offset_sectors": self.heap_offset_sectors,
            "cluster_count": self.cluster_count,
            "root_first_cluster": self.root_first_cluster,
            "volume_length_sectors": self.volume_length_sectors,
            "serial_number": self.serial_number,
            "volume_label": self.volume_label,
            "raw_vbr_hex": self.raw_vbr.hex(),
        }


def parse_vbr(image: VolumeImage, read_label: bool = True) -> VolumeGeometry:
    """Decode sector 0. The exFAT name and boot signature are verified first."""
    sector = image.read(0, MIN_SECTOR)
    if sector[3:11] != EXFAT_NAME:
        raise NotExfatError(f"file system name is {sector[3:11]!r}, not {EXFAT_NAME!r}")
    if struct.unpack_from("<H", sector, 510)[0] != BOOT_SIGNATURE:
        raise NotExfatError("boot signature 0x55AA missing")

    (part_off, vol_len) = struct.unpack_from("<QQ", sector, VBR_PARTITION_OFFSET)
    fat_off, fat_len, heap_off, count, root = struct.unpack_from("<5I", sector, VBR_FAT_OFFSET)
    serial, revision = struct.unpack_from("<IH", sector, VBR_SERIAL)
    sector_shift = sector[VBR_SECTOR_SHIFT]
    cluster_shift = sector[VBR_CLUSTER_SHIFT]
    nfats = sector[VBR_NUMBER_OF_FATS]

    if not 9 <= sector_shift <= 12:
        raise InconsistentGeometryError(f"bytes-per-sector shift {sector_shift} outside 9..12")
    if cluster_shift > 25 - sector_shift:
        raise InconsistentGeometryError(f"sectors-per-cluster shift {cluster_shift} too large")
    ssize = 1 << sector_shift
    raw = image.read(0, ssize) if ssize <= image.length else sector

    geom = VolumeGeometry(
        sector_size_bytes=ssize,
        sectors_per_cluster=1 << cluster_shift,
        fat_offset_sectors=fat_off,
        fat_length_sectors=fat_len,
        heap_offset_sectors=heap_off,
        cluster_count=count,
        root_first_cluster=root,
        volume_length_sectors=vol_len,
        partition_offset_sectors=part_off,
        serial_number=serial,
        revision=revision,
        number_of_fats=nfats,
        raw_vbr=raw,
    )
    _check_geometry(geom)
    if read_label:
        geom = replace(geom, volume_label=_read_label(image, geom))
    return geom


def _check_geometry(geom: VolumeGeometry) -> None:
    problems = []
    if geom.fat_offset_sectors == 0:
        problems.append("FAT offset is zero")
    if geom.heap_offset_sectors <= geom.fat_offset_sectors:
        problems.append("cluster heap does not follow the FAT")
    if geom.fat_length_sectors * geom.sector_size_bytes < (geom.cluster_count + 2) * 4:
        problems.append("FAT too short for cluster count")
    if geom.cluster_count == 0:
        problems.append("cluster count is zero")
    if not 2 <= geom.root_first_cluster < geom.cluster_count + 2:
        problems.append(f"root cluster {geom.root_first_cluster} out of range")
    if problems:
        raise InconsistentGeometryError("; ".join(problems))


def _read_label(image: VolumeImage, geom: VolumeGeometry) -> str | None:
    try:
        data = read_cluster(image, geom, geom.root_first_cluster)
    except ClusterOutOfRangeError:
        return None
    for pos in range(0, len(data), 32):
        kind = data[pos]
        if kind == 0x00:
            break
        if kind == 0x83:
            count = min(data[pos + 1], 11)
            return data[pos + 2:pos + 2 + 2 * count].decode("utf-16-le", errors="replace")
    return None


def cluster_to_offset(geom: VolumeGeometry, cn: int) -> int:
    return geom.cluster_to_offset(cn)


def read_cluster(image: VolumeImage, geom: VolumeGeometry, cn: int) -> bytes:
    return image.read(geom.cluster_to_offset(cn), geom.cluster_size_bytes)


def read_clusters(image: VolumeImage, geom: VolumeGeometry, first: int, count: int) -> bytes:
    """``count`` physically consecutive clusters starting at ``first``."""
    if count <= 0:
        return b""
    geom.check_cluster(first)
    geom.check_cluster(first + count - 1)
    return image.read(geom.cluster_to_offset(first), count * geom.cluster_size_bytes)
