"""32-byte directory records and their assembly into file entry sets.

Active records carry type bytes 0x85/0xC0/0xC1; the driver makes a set
inactive by clearing the top bit only (0x05/0x40/0x41), so every other byte
of an inactive set is still what the live set held.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum

RECORD_SIZE = 32
NAME_CHARS_PER_RECORD = 15
MAX_NAME_LENGTH = 255
IN_USE = 0x80

TYPE_FILE = 0x85
TYPE_STREAM = 0xC0
TYPE_NAME = 0xC1
TYPE_BITMAP = 0x81
TYPE_UPCASE = 0x82
TYPE_LABEL = 0x83

ATTR_READ_ONLY = 0x01
ATTR_HIDDEN = 0x02
ATTR_SYSTEM = 0x04
ATTR_DIRECTORY = 0x10
ATTR_ARCHIVE = 0x20

FLAG_ALLOCATION_POSSIBLE = 0x01
FLAG_NO_FAT_CHAIN = 0x02


class RecordKind(str, Enum):
    FILE = "file-entry"
    STREAM = "stream-ext"
    NAME = "name-ext"
    SPECIAL = "special"
    END = "end-marker"
    UNKNOWN = "unknown"


class SpecialKind(str, Enum):
    BITMAP = "bitmap"
    UPCASE = "upcase"
    VOLUME_LABEL = "volume_label"


_SPECIAL_BY_CODE = {
    TYPE_BITMAP & 0x7F: SpecialKind.BITMAP,
    TYPE_UPCASE & 0x7F: SpecialKind.UPCASE,
    TYPE_LABEL & 0x7F: SpecialKind.VOLUME_LABEL,
}


@dataclass(frozen=True)
class RawRecord:
    data: bytes
    offset: int = 0            # absolute byte offset in the image
    parent_cluster: int = 0    # first cluster of the directory holding it
    record_offset: int = 0     # byte offset within the directory stream

    def __post_init__(self):
        if len(self.data) != RECORD_SIZE:
            raise ValueError(f"directory record must be {RECORD_SIZE} bytes, got {len(self.data)}")


@dataclass(frozen=True)
class DosTimestamp:
    raw: int
    year: int
    month: int
    day: int
    hour: int
    minute: int
    second: int

    @property
    def plausible(self) -> bool:
        return (
            1 <= self.month <= 12
            and 1 <= self.day <= 31
            and self.hour < 24
            and self.minute < 60
            and self.second < 60
            and self.to_datetime() is not None
        )

    def to_datetime(self) -> datetime | None:
        try:
            return datetime(self.year, self.month, self.day, self.hour, self.minute, self.second)
        except ValueError:
            return None

    def isoformat(self) -> str:
        text = (
            f"{self.year:04d}-{self.month:02d}-{self.day:02d}T"
            f"{self.hour:02d}:{self.minute:02d}:{self.second:02d}"
        )
        return text if self.plausible else text + "?"

    def to_dict(self) -> dict:
        return {"raw": self.raw, "iso": self.isoformat(), "plausible": self.plausible}

    def __str__(self) -> str:
        return self.isoformat().replace("T", " ")


def decode_dos_timestamp(raw: int) -> DosTimestamp:
    """Time in the low 16 bits, date in the high 16 bits, 2-second resolution."""
    time_part = raw & 0xFFFF
    date_part = (raw >> 16) & 0xFFFF
    return DosTimestamp(
        raw=raw,
        year=1980 + (date_part >> 9),
        month=(date_part >> 5) & 0x0F,
        day=date_part & 0x1F,
        hour=time_part >> 11,
        minute=(time_part >> 5) & 0x3F,
        second=(time_part & 0x1F) * 2,
    )


def encode_dos_timestamp(moment: datetime) -> int:
    if not 1980 <= moment.year <= 2107:
        raise ValueError(f"year {moment.year} not representable in a DOS timestamp")
    date_part = ((moment.year - 1980) << 9) | (moment.month << 5) | moment.day
    time_part = (moment.hour << 11) | (moment.minute << 5) | (moment.second // 2)
    return (date_part << 16) | time_part


# -- typed records ---------------------------------------------------------

@dataclass(frozen=True)
class Record:
    raw: RawRecord

    kind = RecordKind.UNKNOWN

    @property
    def type_byte(self) -> int:
        return self.raw.data[0]

    @property
    def active(self) -> bool:
        return bool(self.type_byte & IN_USE)


@dataclass(frozen=True)
class FileRecord(Record):
    set_count: int = 0
    identity_word: int = 0
    attributes: int = 0
    created: int = 0
    modified: int = 0
    accessed: int = 0

    kind = RecordKind.FILE


@dataclass(frozen=True)
class StreamRecord(Record):
    flags: int = 0
    name_length: int = 0
    name_hash: int = 0
    valid_data_length: int = 0
    first_cluster: int = 0
    file_size: int = 0

    kind = RecordKind.STREAM

    @property
    def no_fat_chain(self) -> bool:
        return bool(self.flags & FLAG_NO_FAT_CHAIN)


@dataclass(frozen=True)
class NameRecord(Record):
    kind = RecordKind.NAME

    @property
    def utf16(self) -> bytes:
        return self.raw.data[2:32]


@dataclass(frozen=True)
class SpecialRecord(Record):
    special: SpecialKind = SpecialKind.BITMAP
    first_cluster: int = 0
    size: int = 0
    label: str | None = None

    kind = RecordKind.SPECIAL


@dataclass(frozen=True)
class EndRecord(Record):
    kind = RecordKind.END


@dataclass(frozen=True)
class UnknownRecord(Record):
    kind = RecordKind.UNKNOWN


def parse_record(raw: RawRecord | bytes) -> Record:
    """Type a record by its first byte; unrecognised bytes stay as raw data."""
    if not isinstance(raw, RawRecord):
        raw = RawRecord(bytes(raw))
    data = raw.data
    code = data[0] & 0x7F
    if data[0] == 0x00:
        return EndRecord(raw)
    if code == TYPE_FILE & 0x7F:
        set_count, identity, attributes = struct.unpack_from("<BHH", data, 1)
        created, modified, accessed = struct.unpack_from("<III", data, 0x08)
        return FileRecord(raw, set_count, identity, attributes, created, modified, accessed)
    if code == TYPE_STREAM & 0x7F:
        flags = data[1]
        name_length = data[3]
        name_hash, valid_length = struct.unpack_from("<HxxQ", data, 0x04)
        first_cluster, size = struct.unpack_from("<IQ", data, 0x14)
        return StreamRecord(raw, flags, name_length, name_hash, valid_length, first_cluster, size)
    if code == TYPE_NAME & 0x7F:
        return NameRecord(raw)
    if code in _SPECIAL_BY_CODE:
        special = _SPECIAL_BY_CODE[code]
        if special is SpecialKind.VOLUME_LABEL:
            count = min(data[1], 11)
            label = data[2:2 + 2 * count].decode("utf-16-le", errors="replace")
            return SpecialRecord(raw, special, label=label)
        first_cluster, size = struct.unpack_from("<IQ", data, 0x14)
        return SpecialRecord(raw, special, first_cluster, size)
    return UnknownRecord(raw)


# -- entry sets ------------------------------------------------------------

@dataclass(frozen=True)
class Location:
    parent_cluster: int
    record_offset: int
    image_offset: int

    @property
    def set_id(self) -> str:
        return f"{self.parent_cluster}:{self.record_offset}"


@dataclass(frozen=True)
class FileEntrySet:
    active: bool
    set_count: int
    identity_word: int
    attributes: int
    created: DosTimestamp
    modified: DosTimestamp
    accessed: DosTimestamp
    flags: int
    name_length: int
    name_hash: int
    first_cluster: int
    file_size: int
    valid_data_length: int
    name: str
    location: Location
    records: tuple[RawRecord, ...] = field(repr=False, default=())
    malformed: bool = False
    problems: tuple[str, ...] = ()
    parent_path: str = "/"
    from_inactive_directory: bool = False

    @property
    def no_fat_chain(self) -> bool:
        return bool(self.flags & FLAG_NO_FAT_CHAIN)

    @property
    def is_directory(self) -> bool:
        return bool(self.attributes & ATTR_DIRECTORY)

    @property
    def set_id(self) -> str:
        return self.location.set_id

    @property
    def path(self) -> str:
        base = self.parent_path.rstrip("/")
        return f"{base}/{self.name}"

    @property
    def live(self) -> bool:
        """Active and reachable through active directories only."""
        return self.active and not self.from_inactive_directory

    def cluster_span(self, cluster_size: int) -> int:
        return math.ceil(self.file_size / cluster_size) if self.file_size else 0

    def recency_key(self) -> tuple[int, int, int]:
        return (self.modified.raw, self.accessed.raw, self.created.raw)

    def to_dict(self) -> dict:
        return {
            "set_id": self.set_id,
            "active": self.active,
            "path": self.path,
            "name": self.name,
            "name_length": self.name_length,
            "set_count": self.set_count,
            "identity_word": self.identity_word,
            "name_hash": self.name_hash,
            "attributes": self.attributes,
            "is_directory": self.is_directory,
            "created": self.created.to_dict(),
            "modified": self.modified.to_dict(),
            "accessed": self.accessed.to_dict(),
            "flags": self.flags,
            "no_fat_chain": self.no_fat_chain,
            "first_cluster": self.first_cluster,
            "file_size": self.file_size,
            "valid_data_length": self.valid_data_length,
            "image_offset": self.location.image_offset,
            "malformed": self.malformed,
            "problems": list(self.problems),
            "from_inactive_directory": self.from_inactive_directory,
        }


@dataclass
class DirectoryListing:
    sets: list[FileEntrySet]
    specials: list[SpecialRecord]
    orphans: list[Record]


def decode_name(name_records: list[NameRecord], name_length: int) -> str:
    buf = b"".join(r.utf16 for r in name_records)
    return buf[: 2 * name_length].decode("utf-16-le", errors="replace")


def _build_set(primary: FileRecord, secondaries: list[Record], parent_path: str,
               from_inactive: bool) -> FileEntrySet:
    problems = []
    stream = secondaries[0] if secondaries and isinstance(secondaries[0], StreamRecord) else None
    names = [r for r in secondaries[1:] if isinstance(r, NameRecord)]
    if stream is None:
        problems.append("stream extension missing")
    if len(secondaries) != primary.set_count:
        problems.append(f"set count {primary.set_count} but {len(secondaries)} secondary records")
    if any(r.active != primary.active for r in secondaries):
        problems.append("mixed active and inactive type bytes")
    name_length = stream.name_length if stream else 0
    if stream is not None:
        expected = math.ceil(name_length / NAME_CHARS_PER_RECORD)
        if len(names) != expected:
            problems.append(f"name length {name_length} needs {expected} name records, found {len(names)}")
        if primary.set_count != 1 + len(names):
            problems.append("set count differs from 1 + name records")
    raw = primary.raw
    return FileEntrySet(
        active=primary.active,
        set_count=primary.set_count,
        identity_word=primary.identity_word,
        attributes=primary.attributes,
        created=decode_dos_timestamp(primary.created),
        modified=decode_dos_timestamp(primary.modified),
        accessed=decode_dos_timestamp(primary.accessed),
        flags=stream.flags if stream else 0,
        name_length=name_length,
        name_hash=stream.name_hash if stream else 0,
        first_cluster=stream.first_cluster if stream else 0,
        file_size=stream.file_size if stream else 0,
        valid_data_length=stream.valid_data_length if stream else 0,
        name=decode_name(names, name_length),
        location=Location(raw.parent_cluster, raw.record_offset, raw.offset),
        records=(raw,) + tuple(r.raw for r in secondaries),
        malformed=bool(problems),
        problems=tuple(problems),
        parent_path=parent_path,
        from_inactive_directory=from_inactive,
    )


def assemble_sets(records: list[Record], parent_path: str = "/",
                  from_inactive: bool = False) -> DirectoryListing:
    """Group one directory's records, in on-disk order, into entry sets.

    A set is a file record followed by up to ``set_count`` stream/name
    records. Collection stops early at anything that cannot belong to the
    set; such sets come back flagged malformed.
    """
    sets: list[FileEntrySet] = []
    specials: list[SpecialRecord] = []
    orphans: list[Record] = []
    i = 0
    n = len(records)
    while i < n:
        rec = records[i]
        if isinstance(rec, FileRecord):
            secondaries: list[Record] = []
            j = i + 1
            while j < n and len(secondaries) < rec.set_count:
                nxt = records[j]
                if not secondaries and not isinstance(nxt, StreamRecord):
                    break
                if secondaries and not isinstance(nxt, NameRecord):
                    break
                secondaries.append(nxt)
                j += 1
            sets.append(_build_set(rec, secondaries, parent_path, from_inactive))
            i = j
            continue
        if isinstance(rec, SpecialRecord):
            specials.append(rec)
        elif not isinstance(rec, EndRecord):
            orphans.append(rec)
        i += 1
    return DirectoryListing(sets, specials, orphans)


def iter_records(data: bytes, parent_cluster: int, image_offsets: list[int],
                 cluster_size: int, stop_at_end: bool = False) -> list[Record]:
    """Parse a directory stream; ``image_offsets`` gives each cluster's start."""
    out = []
    for pos in range(0, len(data) - RECORD_SIZE + 1, RECORD_SIZE):
        cluster_index, within = divmod(pos, cluster_size)
        raw = RawRecord(
            data[pos:pos + RECORD_SIZE],
            offset=image_offsets[cluster_index] + within,
            parent_cluster=parent_cluster,
            record_offset=pos,
        )
        rec = parse_record(raw)
        if stop_at_end and isinstance(rec, EndRecord):
            break
        out.append(rec)
    return out


def parse_entry_sets(data: bytes, parent_cluster: int = 0, image_offset: int = 0,
                     parent_path: str = "/") -> DirectoryListing:
    """Assemble sets from a bare run of 32-byte records, e.g. a hex dump."""
    usable = len(data) - len(data) % RECORD_SIZE
    records = iter_records(bytes(data[:usable]), parent_cluster, [image_offset], max(usable, RECORD_SIZE))
    return assemble_sets(records, parent_path)
