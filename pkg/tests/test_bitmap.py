import math

import pytest
from hypothesis import given, settings, strategies as st

from exfat_forensics.analysis import ExfatVolume
from exfat_forensics.bitmap import AllocationBitmap, bit_position, locate_bitmap
from exfat_forensics.errors import BitmapEntryMissingError, ClusterOutOfRangeError
from exfat_forensics.forge import format_volume


def naive_runs(flags, first_cn=2):
    runs = []
    for i, flag in enumerate(flags):
        cn = first_cn + i
        if flag:
            continue
        if runs and runs[-1][0] + runs[-1][1] == cn:
            runs[-1] = (runs[-1][0], runs[-1][1] + 1)
        else:
            runs.append((cn, 1))
    return runs


def test_bit_position_anchors():
    assert bit_position(2) == (0, 0)
    assert bit_position(9) == (0, 7)
    assert bit_position(10) == (1, 0)
    assert bit_position(530) == (66, 0)
    with pytest.raises(ClusterOutOfRangeError):
        bit_position(1)


def test_worked_example_byte_pattern():
    # Clusters 530..537 read 1 1 0 0 0 0 1 1, least significant bit first.
    data = bytearray(68)
    data[66] = 0b11000011
    bm = AllocationBitmap(bytes(data), 536)
    assert [int(bm.is_allocated(cn)) for cn in range(530, 538)] == [1, 1, 0, 0, 0, 0, 1, 1]
    inside = [(s, n) for s, n in bm.unallocated_runs() if s >= 530]
    assert inside == [(532, 4)]


def test_all_zero_and_all_one():
    empty = AllocationBitmap(bytes(4), 32)
    assert not any(empty.is_allocated(cn) for cn in range(2, 34))
    assert empty.unallocated_runs() == [(2, 32)]
    full = AllocationBitmap(b"\xFF" * 4, 32)
    assert full.unallocated_runs() == []
    assert full.allocated_count() == 32


def test_out_of_range_query():
    bm = AllocationBitmap(bytes(4), 32)
    with pytest.raises(ClusterOutOfRangeError):
        bm.is_allocated(34)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=300))
def test_runs_match_naive_scan(flags):
    bm = AllocationBitmap.from_flags(flags)
    assert bm.unallocated_runs() == naive_runs(flags)
    covered = set()
    for allocated in (True, False):
        for start, length in bm.runs(allocated):
            span = set(range(start, start + length))
            assert not covered & span
            covered |= span
            assert all(bm.is_allocated(cn) == allocated for cn in span)
    assert covered == set(range(2, 2 + len(flags)))


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 1 << 20))
def test_bit_position_is_a_bijection(cn):
    byte_index, bit_index = bit_position(cn)
    assert 0 <= bit_index < 8
    assert 8 * byte_index + bit_index + 2 == cn


def test_run_containing():
    bm = AllocationBitmap.from_flags([1, 0, 0, 1, 0])
    assert bm.run_containing(3) == (3, 2)
    assert bm.run_containing(2) is None
    assert bm.run_containing(6) == (6, 1)


def test_locate_bitmap_on_forged_volume():
    forged = format_volume(8 * 1024 * 1024, 1024)
    vol = ExfatVolume.from_bytes(forged.snapshot())
    loc = locate_bitmap(vol.root_records(), vol.geometry.cluster_count)
    assert loc.size_bytes == math.ceil(vol.geometry.cluster_count / 8)
    assert loc.first_cluster == forged.bitmap_first
    assert vol.geometry.cluster_to_offset(loc.first_cluster) == vol.geometry.heap_offset_bytes


def test_missing_bitmap_record():
    with pytest.raises(BitmapEntryMissingError):
        locate_bitmap([])


def test_loaded_bitmap_agrees_with_forge():
    forged = format_volume(4 * 1024 * 1024, 1024)
    forged.create_file("/a.bin", bytes(5000))
    vol = ExfatVolume.from_bytes(forged.snapshot())
    for cn in range(2, vol.geometry.cluster_count + 2):
        assert vol.bitmap.is_allocated(cn) == forged.is_allocated(cn)


def test_delete_clears_bits():
    forged = format_volume(4 * 1024 * 1024, 1024)
    clusters = list(forged.create_file("/a.bin", bytes(5000)).clusters)
    before = ExfatVolume.from_bytes(forged.snapshot()).bitmap
    forged.delete("/a.bin")
    after = ExfatVolume.from_bytes(forged.snapshot()).bitmap
    assert all(before.is_allocated(cn) for cn in clusters)
    assert not any(after.is_allocated(cn) for cn in clusters)
