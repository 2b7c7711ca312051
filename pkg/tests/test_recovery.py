import struct

import pytest
from hypothesis import given, settings, strategies as st

from exfat_forensics.analysis import ExfatVolume
from exfat_forensics.bitmap import AllocationBitmap
from exfat_forensics.errors import ClusterOutOfRangeError, FileSizeExceedsVolumeError
from exfat_forensics.fat import END_OF_CHAIN, FatTable, Termination
from exfat_forensics.forge import format_volume, make_content
from exfat_forensics.recovery import (
    FillPolicy,
    Integrity,
    chain_sanity,
    recover_chained,
    recover_contiguous,
    recover_file,
    recover_shortened_tail,
)
from exfat_forensics.direntry import parse_entry_sets
from exfat_forensics.fat import walk_chain
from exfat_forensics.forge.records import entry_set
from vectors import target_earth_fat

CS = 1024


def inactive(vol: ExfatVolume, name: str):
    [s] = [s for s in vol.tree.sets if s.name == name and not s.live]
    return s


def pad_to(forged, cn, name="/pad.bin"):
    first_free = forged.free_runs()[0][0]
    forged.create_file(name, bytes((cn - first_free) * forged.cluster_size))


@pytest.fixture(scope="module")
def deleted_at_50():
    forged = format_volume(4 * 1024 * 1024, CS)
    pad_to(forged, 50)
    original = make_content("random", 3000, 50)
    assert forged.create_file("/f.bin", original).clusters == [50, 51, 52]
    forged.delete("/f.bin")
    clean = forged.snapshot()
    # Refill 50 and 52 with the bytes they already held, so only 51 changes.
    forged.create_file("/a.bin", original[:CS])
    forged.create_file("/b.bin", bytes(CS))
    forged.create_file("/c.bin", original[2 * CS:])
    forged.delete("/a.bin")
    forged.delete("/c.bin")
    return original, ExfatVolume.from_bytes(clean), ExfatVolume.from_bytes(forged.snapshot())


def test_contiguous_recovery_of_deleted_file(deleted_at_50):
    original, vol, _ = deleted_at_50
    entry = inactive(vol, "f.bin")
    rec = recover_contiguous(entry, vol.image, vol.geometry, vol.bitmap)
    assert rec.cluster_numbers == [50, 51, 52]
    assert [c.length for c in rec.clusters] == [1024, 1024, 952]
    assert rec.content == original
    assert rec.integrity is Integrity.COMPLETE
    assert rec.provenance == ["clean", "clean", "clean"]


def test_overwritten_middle_cluster(deleted_at_50):
    original, _, vol = deleted_at_50
    entry = inactive(vol, "f.bin")
    rec = recover_contiguous(entry, vol.image, vol.geometry, vol.bitmap)
    assert rec.provenance == ["clean", "overwritten", "clean"]
    assert rec.integrity is Integrity.PARTIAL
    assert rec.content == original[:CS] + bytes(CS) + original[2 * CS:]


def test_fill_policies(deleted_at_50):
    _, _, vol = deleted_at_50
    entry = inactive(vol, "f.bin")
    lengths = {}
    for policy in FillPolicy:
        rec = recover_contiguous(entry, vol.image, vol.geometry, vol.bitmap, policy)
        lengths[policy] = len(rec.content)
        overwritten = [c for c in rec.clusters if c.provenance == "overwritten"]
        assert [c.cluster for c in overwritten] == [51]
    assert lengths[FillPolicy.SUBSTITUTE] == 3000
    assert lengths[FillPolicy.INCLUDE] == 3000
    assert lengths[FillPolicy.SKIP] == 3000 - CS


def test_policy_aliases():
    assert FillPolicy.parse("substitute") is FillPolicy.SUBSTITUTE
    assert FillPolicy.parse("skip") is FillPolicy.SKIP
    assert FillPolicy.parse("include") is FillPolicy.INCLUDE
    with pytest.raises(ValueError):
        FillPolicy.parse("guess")


def test_zero_length_file():
    forged = format_volume(2 * 1024 * 1024, CS)
    forged.create_file("/empty.txt", b"")
    forged.delete("/empty.txt")
    vol = ExfatVolume.from_bytes(forged.snapshot())
    rec = recover_file(inactive(vol, "empty.txt"), vol.image, vol.geometry, vol.fat, vol.bitmap)
    assert rec.content == b""
    assert rec.integrity is Integrity.COMPLETE
    assert rec.clusters == []


def _hand_set(vol, first, size, contiguous=True):
    raw = entry_set("hand.bin", 0x20, 0x493E4B27, 0x493E4B27, 0x493E4B27, first, size, contiguous)
    [s] = parse_entry_sets(raw, vol.geometry.root_first_cluster).sets
    return s


def test_out_of_range_first_cluster(deleted_at_50):
    _, vol, _ = deleted_at_50
    with pytest.raises(ClusterOutOfRangeError):
        recover_contiguous(_hand_set(vol, vol.geometry.cluster_count + 2, 10),
                           vol.image, vol.geometry, vol.bitmap)


def test_size_beyond_volume(deleted_at_50):
    _, vol, _ = deleted_at_50
    entry = _hand_set(vol, vol.geometry.cluster_count, 10 * CS)
    with pytest.raises(FileSizeExceedsVolumeError):
        recover_contiguous(entry, vol.image, vol.geometry, vol.bitmap)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 400), st.integers(1, 60 * CS))
def test_contiguous_reads_only_its_range(first, size):
    forged = _scratch()
    vol = ExfatVolume.from_bytes(forged)
    entry = _hand_set(vol, first, size)
    rec = recover_contiguous(entry, vol.image, vol.geometry, vol.bitmap, FillPolicy.INCLUDE)
    start = vol.geometry.cluster_to_offset(first)
    assert rec.content == forged[start:start + size]
    assert rec.cluster_numbers == list(range(first, first + -(-size // CS)))


_SCRATCH = {}


def _scratch() -> bytes:
    if not _SCRATCH:
        forged = format_volume(1024 * 1024, CS)
        forged.create_file("/noise.bin", make_content("random", 400 * CS, 9))
        _SCRATCH["image"] = forged.snapshot()
    return _SCRATCH["image"]


def test_replica_chain_recovery(replica):
    forged, content = replica
    vol = ExfatVolume.from_bytes(forged.snapshot())
    entry = inactive(vol, "target_earth.png")
    rec = recover_chained(entry, vol.image, vol.geometry, vol.fat, vol.bitmap, tree=vol.tree)
    assert rec.cluster_numbers[:4] == [0x24F5, 0x24F6, 0x24F7, 0x24F8]
    assert rec.content == content
    assert rec.integrity is Integrity.COMPLETE
    assert rec.terminated_by is Termination.END_OF_CHAIN


def test_replica_fat_matches_published_cells(replica):
    forged, _ = replica
    vol = ExfatVolume.from_bytes(forged.snapshot())
    published = FatTable.from_bytes(target_earth_fat(vol.geometry.cluster_count), vol.geometry.cluster_count)
    for cn in range(9460, 9476):
        assert vol.fat.cell(cn) == published.cell(cn)


@pytest.fixture(scope="module")
def broken_chain():
    forged = format_volume(4 * 1024 * 1024, CS)
    forged.create_file("/hole1.bin", bytes(4 * CS))
    forged.create_file("/wall1.bin", bytes(CS))
    forged.create_file("/hole2.bin", bytes(8 * CS))
    forged.create_file("/wall2.bin", bytes(CS))
    forged.fill_free_space(b"\x00", 64)
    forged.delete("/hole1.bin")
    forged.delete("/hole2.bin")
    content = make_content("random", 12 * CS, 12)
    clusters = forged.create_file("/frag.bin", content).clusters
    forged.delete("/frag.bin")
    reused = forged.create_file("/new.bin", bytes(6 * CS)).clusters
    return clusters, reused, ExfatVolume.from_bytes(forged.snapshot())


def test_chain_broken_by_reuse(broken_chain):
    clusters, reused, vol = broken_chain
    assert reused[0] == clusters[4]
    entry = inactive(vol, "frag.bin")
    rec = recover_chained(entry, vol.image, vol.geometry, vol.fat, vol.bitmap, tree=vol.tree)
    assert rec.integrity is Integrity.PARTIAL
    assert rec.terminated_by is Termination.ZERO_CELL
    assert rec.cluster_numbers == clusters[:5]
    checks = {f.check for f in rec.findings}
    assert {"chain-short", "reused-by-active"} <= checks


def test_single_cluster_chain():
    vol = ExfatVolume.from_bytes(_scratch())
    noise = next(s for s in vol.tree.live_sets() if s.name == "noise.bin")
    entry = _hand_set(vol, noise.first_cluster + 3, 100, contiguous=False)
    cells = bytearray(4 * (vol.geometry.cluster_count + 2))
    struct.pack_into("<I", cells, 4 * entry.first_cluster, END_OF_CHAIN)
    fat = FatTable.from_bytes(bytes(cells), vol.geometry.cluster_count)
    bm = AllocationBitmap(bytes(vol.bitmap.size_bytes or len(vol.bitmap.data)), vol.geometry.cluster_count)
    rec = recover_chained(entry, vol.image, vol.geometry, fat, bm)
    start = vol.geometry.cluster_to_offset(entry.first_cluster)
    assert rec.cluster_numbers == [entry.first_cluster]
    assert rec.content == vol.image.read(start, 100)
    assert rec.terminated_by is Termination.END_OF_CHAIN
    assert rec.integrity is Integrity.COMPLETE


def test_chain_sanity_consistent(replica):
    forged, _ = replica
    vol = ExfatVolume.from_bytes(forged.snapshot())
    entry = inactive(vol, "target_earth.png")
    chain = walk_chain(vol.fat, entry.first_cluster, entry.cluster_span(CS))
    checks = {f.check for f in chain_sanity(entry, chain, vol.tree, vol.fat, vol.bitmap, CS)}
    assert not checks & {"chain-short", "chain-long", "reused-by-active"}


def test_tail_of_worked_example(tail_volume):
    forged, original = tail_volume
    vol = ExfatVolume.from_bytes(forged.snapshot())
    [a] = [s for s in vol.tree.live_sets() if s.name == "a.txt"]
    rec = recover_shortened_tail(a, vol.image, vol.geometry, vol.fat, vol.bitmap, vol.tree)
    assert rec.cluster_numbers == [532, 533, 534, 535]
    assert rec.integrity is Integrity.TAIL_SPECULATIVE
    assert rec.content.startswith(original[a.file_size:2 * CS])
    assert original[a.file_size:] in rec.content


def test_tail_with_no_room():
    forged = format_volume(2 * 1024 * 1024, CS)
    forged.create_file("/a.txt", make_content("text", 3 * CS, 1))
    forged.create_file("/b.bin", bytes(CS))
    vol = ExfatVolume.from_bytes(forged.snapshot())
    [a] = [s for s in vol.tree.live_sets() if s.name == "a.txt"]
    rec = recover_shortened_tail(a, vol.image, vol.geometry, vol.fat, vol.bitmap, vol.tree)
    assert rec.content == b""
    assert any(f.check == "no-candidate-run" for f in rec.findings)


def test_tail_never_returns_allocated_clusters(protocol_corpus):
    for _, result in protocol_corpus[:4]:
        vol = ExfatVolume.from_bytes(result.image)
        for s in vol.tree.live_sets():
            if s.is_directory or not s.file_size:
                continue
            rec = recover_shortened_tail(s, vol.image, vol.geometry, vol.fat, vol.bitmap, vol.tree)
            assert not any(vol.bitmap.is_allocated(cn) for cn in rec.cluster_numbers)


def test_skip_shrinks_by_overwritten_lengths(protocol_corpus):
    for _, result in protocol_corpus[:4]:
        vol = ExfatVolume.from_bytes(result.image)
        for s in vol.tree.inactive_sets():
            if s.is_directory or not vol.geometry.in_range(s.first_cluster):
                continue
            full = recover_file(s, vol.image, vol.geometry, vol.fat, vol.bitmap, FillPolicy.SUBSTITUTE)
            skipped = recover_file(s, vol.image, vol.geometry, vol.fat, vol.bitmap, FillPolicy.SKIP)
            lost = sum(c.length for c in full.clusters if c.provenance == "overwritten")
            assert len(skipped.content) == len(full.content) - lost
