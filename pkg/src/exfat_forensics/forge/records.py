"""Byte-exact writers for the on-disk structures the analyzer parses."""
from __future__ import annotations

import math
import struct

from ..direntry import (
    FLAG_ALLOCATION_POSSIBLE,
    FLAG_NO_FAT_CHAIN,
    NAME_CHARS_PER_RECORD,
    RECORD_SIZE,
    TYPE_BITMAP,
    TYPE_FILE,
    TYPE_LABEL,
    TYPE_NAME,
    TYPE_STREAM,
    TYPE_UPCASE,
    IN_USE,
)

BOOT_REGION_SECTORS = 12


def entry_set_checksum(set_bytes: bytes) -> int:
    """16-bit rotate-and-add over the whole set, skipping the checksum field itself."""
    checksum = 0
    for idx, byte in enumerate(set_bytes):
        if idx in (2, 3):
            continue
        checksum = ((checksum >> 1) | ((checksum & 1) << 15)) + byte
        checksum &= 0xFFFF
    return checksum


def name_hash(name: str) -> int:
    checksum = 0
    for byte in name.upper().encode("utf-16-le"):
        checksum = ((checksum >> 1) | ((checksum & 1) << 15)) + byte
        checksum &= 0xFFFF
    return checksum


def file_record(set_count: int, attributes: int, created: int, modified: int, accessed: int,
                checksum: int = 0, ten_ms: tuple[int, int] = (0, 0),
                utc_offsets: tuple[int, int, int] = (0, 0, 0)) -> bytes:
    rec = bytearray(RECORD_SIZE)
    struct.pack_into("<BBHH", rec, 0, TYPE_FILE, set_count, checksum, attributes)
    struct.pack_into("<III", rec, 0x08, created, modified, accessed)
    struct.pack_into("<5B", rec, 0x14, *ten_ms, *utc_offsets)
    return bytes(rec)


def stream_record(flags: int, name_length: int, hash_value: int, valid_data_length: int,
                  first_cluster: int, size: int) -> bytes:
    rec = bytearray(RECORD_SIZE)
    struct.pack_into("<BBxBHxxQ", rec, 0, TYPE_STREAM, flags, name_length, hash_value, valid_data_length)
    struct.pack_into("<IQ", rec, 0x14, first_cluster, size)
    return bytes(rec)


def name_record(chunk: str) -> bytes:
    if len(chunk) > NAME_CHARS_PER_RECORD:
        raise ValueError("a name record holds at most 15 UTF-16 units")
    rec = bytearray(RECORD_SIZE)
    rec[0] = TYPE_NAME
    encoded = chunk.encode("utf-16-le")
    rec[2:2 + len(encoded)] = encoded
    return bytes(rec)


def entry_set(name: str, attributes: int, created: int, modified: int, accessed: int,
              first_cluster: int, size: int, no_fat_chain: bool,
              ten_ms: tuple[int, int] = (0, 0), utc_offsets: tuple[int, int, int] = (0, 0, 0)) -> bytes:
    """A complete active set with its checksum filled in."""
    if not 1 <= len(name) <= 255:
        raise ValueError("file names hold 1..255 characters")
    chunks = [name[i:i + NAME_CHARS_PER_RECORD] for i in range(0, len(name), NAME_CHARS_PER_RECORD)]
    flags = 0
    if first_cluster:
        flags |= FLAG_ALLOCATION_POSSIBLE
        if no_fat_chain:
            flags |= FLAG_NO_FAT_CHAIN
    body = (
        file_record(1 + len(chunks), attributes, created, modified, accessed,
                    ten_ms=ten_ms, utc_offsets=utc_offsets)
        + stream_record(flags, len(name), name_hash(name), size, first_cluster, size)
        + b"".join(name_record(c) for c in chunks)
    )
    checksum = entry_set_checksum(body)
    return body[:2] + struct.pack("<H", checksum) + body[4:]


def deactivate(records: bytes) -> bytes:
    """Clear the in-use bit of every record's type byte, nothing else."""
    out = bytearray(records)
    for pos in range(0, len(out), RECORD_SIZE):
        out[pos] &= ~IN_USE & 0xFF
    return bytes(out)


def label_record(label: str) -> bytes:
    label = label[:11]
    rec = bytearray(RECORD_SIZE)
    rec[0] = TYPE_LABEL
    rec[1] = len(label)
    encoded = label.encode("utf-16-le")
    rec[2:2 + len(encoded)] = encoded
    return bytes(rec)


def bitmap_record(first_cluster: int, size: int) -> bytes:
    rec = bytearray(RECORD_SIZE)
    rec[0] = TYPE_BITMAP
    struct.pack_into("<IQ", rec, 0x14, first_cluster, size)
    return bytes(rec)


def upcase_table() -> bytes:
    """Placeholder up-case table: the first 128 code points, ASCII letters folded."""
    return b"".join(struct.pack("<H", ord(chr(c).upper()) if c < 128 else c) for c in range(128))


def upcase_checksum(table: bytes) -> int:
    checksum = 0
    for byte in table:
        checksum = (((checksum >> 1) | ((checksum & 1) << 31)) + byte) & 0xFFFFFFFF
    return checksum


def upcase_record(first_cluster: int, table: bytes) -> bytes:
    rec = bytearray(RECORD_SIZE)
    rec[0] = TYPE_UPCASE
    struct.pack_into("<I", rec, 0x04, upcase_checksum(table))
    struct.pack_into("<IQ", rec, 0x14, first_cluster, len(table))
    return bytes(rec)


def boot_checksum(region: bytes, sector_size: int) -> int:
    checksum = 0
    for idx, byte in enumerate(region[: 11 * sector_size]):
        if idx in (106, 107, 112):
            continue
        checksum = (((checksum >> 1) | ((checksum & 1) << 31)) + byte) & 0xFFFFFFFF
    return checksum


def boot_region(*, sector_size: int, sectors_per_cluster: int, volume_sectors: int,
                fat_offset: int, fat_length: int, heap_offset: int, cluster_count: int,
                root_cluster: int, serial: int, percent_in_use: int = 0xFF) -> bytes:
    """Main boot region: boot sector, 8 extended sectors, OEM, reserved, checksum."""
    ss = sector_size
    region = bytearray(BOOT_REGION_SECTORS * ss)
    region[0:3] = b"\xEB\x76\x90"
    region[3:11] = b"EXFAT   "
    struct.pack_into("<QQ", region, 0x40, 0, volume_sectors)
    struct.pack_into("<5I", region, 0x50, fat_offset, fat_length, heap_offset, cluster_count, root_cluster)
    struct.pack_into("<IH", region, 0x64, serial, 0x0100)
    region[0x6C] = int(math.log2(ss))
    region[0x6D] = int(math.log2(sectors_per_cluster))
    region[0x6E] = 1
    region[0x6F] = 0x80
    region[0x70] = percent_in_use
    struct.pack_into("<H", region, 510, 0xAA55)
    for sector in range(1, 9):
        struct.pack_into("<I", region, sector * ss + ss - 4, 0xAA550000)
    checksum = boot_checksum(bytes(region), ss)
    region[11 * ss:12 * ss] = struct.pack("<I", checksum) * (ss // 4)
    return bytes(region)
