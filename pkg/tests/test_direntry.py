import math
from datetime import datetime

import pytest
from hypothesis import given, settings, strategies as st

from exfat_forensics.analysis import ExfatVolume
from exfat_forensics.direntry import (
    EndRecord,
    FileRecord,
    UnknownRecord,
    decode_dos_timestamp,
    encode_dos_timestamp,
    parse_entry_sets,
    parse_record,
)
from exfat_forensics.forge.records import deactivate, entry_set, entry_set_checksum, name_hash
from vectors import COLORS_SET, TARGET_EARTH_SET, SQUARE_INACTIVE_SET


def dos_oracle(raw: int) -> tuple[int, ...]:
    """Field split by reading the 32-bit value as a bit string, high bits first."""
    bits = f"{raw:032b}"
    date, time = bits[:16], bits[16:]
    return (
        1980 + int(date[0:7], 2), int(date[7:11], 2), int(date[11:16], 2),
        int(time[0:5], 2), int(time[5:11], 2), 2 * int(time[11:16], 2),
    )


def test_colors_primary_record():
    rec = parse_record(COLORS_SET[:32])
    assert isinstance(rec, FileRecord)
    assert rec.active
    assert rec.set_count == 2
    assert rec.identity_word == 0xE019
    assert rec.created == 0x493E4B27


def test_target_earth_primary_record():
    rec = parse_record(TARGET_EARTH_SET[:32])
    assert isinstance(rec, FileRecord)
    assert not rec.active
    assert rec.set_count == 3


def test_zero_record_is_end_marker():
    assert isinstance(parse_record(bytes(32)), EndRecord)


def test_unknown_record_is_preserved():
    data = bytes([0xA0]) + bytes(range(1, 32))
    rec = parse_record(data)
    assert isinstance(rec, UnknownRecord)
    assert rec.raw.data == data


def test_record_size_is_checked():
    with pytest.raises(ValueError):
        parse_record(bytes(31))


def test_colors_set():
    [s] = parse_entry_sets(COLORS_SET).sets
    assert (s.name, s.first_cluster, s.file_size, s.active) == ("colors.jpg", 11, 955_787, True)
    assert s.no_fat_chain
    assert not s.malformed


def test_target_earth_set():
    [s] = parse_entry_sets(TARGET_EARTH_SET).sets
    assert s.name == "target_earth.png"
    assert s.first_cluster == 9461
    assert s.file_size == 5_677_683
    assert not s.no_fat_chain
    assert not s.active
    assert not s.malformed


def test_square_set():
    [s] = parse_entry_sets(SQUARE_INACTIVE_SET).sets
    assert (s.name, s.first_cluster, s.file_size) == ("square.jpg", 759, 4_958_824)
    assert s.identity_word == 0x2B87
    assert not s.active


def test_timestamp_decodes_against_oracle():
    ts = decode_dos_timestamp(0x493E4B27)
    assert (ts.year, ts.month, ts.day, ts.hour, ts.minute, ts.second) == dos_oracle(0x493E4B27)
    assert ts.to_datetime() == datetime(2016, 9, 30, 9, 25, 14)
    assert ts.plausible


def test_timestamp_epoch():
    assert decode_dos_timestamp(0x00210000).to_datetime() == datetime(1980, 1, 1, 0, 0, 0)


def test_implausible_timestamp_is_flagged():
    ts = decode_dos_timestamp(0x00000000)
    assert not ts.plausible
    assert ts.to_dict()["iso"].endswith("?")
    ts = decode_dos_timestamp((0 << 16) | (30 << 11))
    assert not ts.plausible


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 0xFFFFFFFF))
def test_timestamp_fields_match_oracle(raw):
    ts = decode_dos_timestamp(raw)
    assert (ts.year, ts.month, ts.day, ts.hour, ts.minute, ts.second) == dos_oracle(raw)


@settings(max_examples=200, deadline=None)
@given(st.datetimes(min_value=datetime(1980, 1, 1), max_value=datetime(2107, 12, 31)))
def test_timestamp_round_trip(moment):
    moment = moment.replace(microsecond=0, second=moment.second - moment.second % 2)
    assert decode_dos_timestamp(encode_dos_timestamp(moment)).to_datetime() == moment


def test_forge_reproduces_colors_set_byte_for_byte():
    forged = entry_set("colors.jpg", 0x20, 0x493E4B27, 0x468665FD, 0x493E4B27, 11, 955_787, True,
                       ten_ms=(0x99, 0x00), utc_offsets=(0x88, 0x88, 0x88))
    assert forged == COLORS_SET
    assert entry_set_checksum(COLORS_SET) == 0xE019
    assert name_hash("colors.jpg") == 0x42B0


def test_inactive_checksum_still_matches_active_bytes():
    # The set checksum covers type bytes, so the inactive copy no longer matches.
    assert entry_set_checksum(TARGET_EARTH_SET) != 0x5604
    reactivated = bytes(b | 0x80 if i % 32 == 0 else b for i, b in enumerate(TARGET_EARTH_SET))
    assert entry_set_checksum(reactivated) == 0x5604


names = st.text(alphabet=st.characters(min_codepoint=0x20, max_codepoint=0x7E, blacklist_characters='"*/:<>?\\|'),
                min_size=1, max_size=255)


@settings(max_examples=150, deadline=None)
@given(names, st.integers(2, 0xFFFFFF), st.integers(0, 1 << 40), st.booleans(),
       st.integers(0, 0xFFFFFFFF), st.integers(0, 0xFFFFFFFF))
def test_entry_set_round_trip(name, first, size, contiguous, created, modified):
    raw = entry_set(name, 0x20, created, modified, created, first, size, contiguous)
    [s] = parse_entry_sets(raw, parent_cluster=7).sets
    assert (s.name, s.first_cluster, s.file_size, s.no_fat_chain) == (name, first, size, contiguous)
    assert (s.created.raw, s.modified.raw) == (created, modified)
    assert s.set_count == 1 + math.ceil(len(name) / 15)
    assert not s.malformed
    assert s.set_id == "7:0"


@settings(max_examples=100, deadline=None)
@given(names, st.integers(2, 0xFFFF), st.integers(0, 1 << 32))
def test_deactivation_changes_only_the_active_flag(name, first, size):
    raw = entry_set(name, 0x20, 0x493E4B27, 0x493E4B27, 0x493E4B27, first, size, True)
    [live] = parse_entry_sets(raw).sets
    [dead] = parse_entry_sets(deactivate(raw)).sets
    assert live.active and not dead.active
    assert dead.to_dict() | {"active": True} == live.to_dict()


def test_mixed_type_bytes_are_malformed():
    raw = bytearray(COLORS_SET)
    raw[64] &= 0x7F
    [s] = parse_entry_sets(bytes(raw)).sets
    assert s.malformed
    assert any("mixed" in p for p in s.problems)


def test_set_count_mismatch_is_malformed():
    raw = bytearray(COLORS_SET)
    raw[1] = 4
    [s] = parse_entry_sets(bytes(raw)).sets
    assert s.malformed


def test_walk_tree_after_folder_deletion(protocol_corpus):
    plan, result = protocol_corpus[1]
    final = ExfatVolume.from_bytes(result.snapshots[-1].image)
    stage2 = ExfatVolume.from_bytes(result.snapshots[1].image)
    assert not any(s.malformed for s in stage2.tree.sets)
    assert {s.path for s in stage2.tree.live_sets()} == set(result.snapshots[1].live_paths)
    assert {s.path for s in final.tree.live_sets()} == set(result.snapshots[-1].live_paths)
    moved_names = {dst.rsplit("/", 1)[1] for _, dst in plan.moved}
    orphaned = {s.name for s in final.tree.sets if s.from_inactive_directory}
    assert moved_names <= orphaned
    sub = final.tree.directory("/subfolder")
    assert sub is not None and sub.from_inactive


def test_set_ids_are_unique_and_positional(protocol_corpus):
    _, result = protocol_corpus[0]
    vol = ExfatVolume.from_bytes(result.image)
    ids = [s.set_id for s in vol.tree.sets]
    assert len(ids) == len(set(ids))
    for s in vol.tree.sets:
        parent, offset = map(int, s.set_id.split(":"))
        assert offset % 32 == 0
        assert parent == s.location.parent_cluster
