"""The eight acceptance criteria, each at its stated tolerance."""
import hashlib
import random
import time

import pytest

from builders import carving_fixture, protocol_variants
from exfat_forensics.analysis import ExfatVolume
from exfat_forensics.bitmap import AllocationBitmap, bit_position
from exfat_forensics.carver import JPEG, carve_volume
from exfat_forensics.classifier import Verdict, classify_all
from exfat_forensics.cli import main
from exfat_forensics.direntry import parse_entry_sets
from exfat_forensics.fat import FatTable, walk_chain
from exfat_forensics.recovery import Integrity, recover_file, recover_shortened_tail
from vectors import COLORS_SET, TARGET_EARTH_SET, SQUARE_INACTIVE_SET, target_earth_fat


@pytest.mark.criterion(1, "golden-vector parsing of the colors, target_earth and square sets")
def test_golden_vectors():
    start = time.perf_counter()
    [f1] = parse_entry_sets(COLORS_SET).sets
    [f2] = parse_entry_sets(TARGET_EARTH_SET).sets
    [f4] = parse_entry_sets(SQUARE_INACTIVE_SET).sets
    elapsed = time.perf_counter() - start
    assert (f1.name, f1.name_length, f1.first_cluster, f1.file_size, f1.no_fat_chain) == \
        ("colors.jpg", 10, 11, 955_787, True)
    assert (f2.name, f2.first_cluster, f2.file_size, f2.no_fat_chain) == \
        ("target_earth.png", 9461, 5_677_683, False)
    assert (f4.first_cluster, f4.file_size) == (0x02F7, 0x4BAA68)
    assert elapsed < 1.0


@pytest.mark.criterion(2, "FAT cell offset of 9461 and the target_earth chain")
def test_fat_addressing():
    assert FatTable.cell_offset(9461) == 37_844
    chain = walk_chain(FatTable.from_bytes(target_earth_fat()), 0x24F5, 4)
    assert chain.clusters == (0x24F5, 0x24F6, 0x24F7, 0x24F8)


@pytest.mark.criterion(3, "bitmap bit positions against a brute-force oracle over 1M clusters")
def test_bitmap_formula():
    assert bit_position(2) == (0, 0)
    assert bit_position(10) == (1, 0)
    count = 1 << 20
    rng = random.Random(3)
    data = rng.randbytes(count // 8)
    start = time.perf_counter()
    bm = AllocationBitmap(data, count)
    # Oracle: walk every bit of every byte in storage order, least significant first.
    byte_index = bit_index = 0
    bits = "".join(format(b, "08b")[::-1] for b in data)
    for cn in range(2, count + 2):
        assert bit_position(cn) == (byte_index, bit_index)
        assert bm.is_allocated(cn) == (bits[cn - 2] == "1")
        bit_index += 1
        if bit_index == 8:
            byte_index, bit_index = byte_index + 1, 0
    assert time.perf_counter() - start < 5.0


@pytest.mark.criterion(4, "shortened-file tail over clusters 530-537 is exactly 532-535")
def test_worked_tail(tail_volume):
    forged, _ = tail_volume
    vol = ExfatVolume.from_bytes(forged.snapshot())
    assert [int(vol.bitmap.is_allocated(cn)) for cn in range(530, 538)] == [1, 1, 0, 0, 0, 0, 1, 1]
    [a] = [s for s in vol.tree.live_sets() if s.name == "a.txt"]
    [b] = [s for s in vol.tree.live_sets() if s.name == "b.bin"]
    assert (a.first_cluster, a.cluster_span(1024), b.first_cluster) == (530, 2, 536)
    rec = recover_shortened_tail(a, vol.image, vol.geometry, vol.fat, vol.bitmap, vol.tree)
    assert rec.cluster_numbers == [532, 533, 534, 535]
    assert rec.integrity is Integrity.TAIL_SPECULATIVE


def _deleted_recovered(plan, result):
    vol = ExfatVolume.from_bytes(result.image)
    verdicts = {v.set_id: v for v in classify_all(vol.tree, vol.fat, vol.bitmap)}
    fragmented = 0
    for path in plan.deleted:
        [entry] = [s for s in vol.tree.inactive_sets()
                   if s.path == path and verdicts[s.set_id].verdict is Verdict.DELETED]
        truth = [f for f in result.manifest.find(entry.name) if not f.live and f.path == path][0]
        rec = recover_file(entry, vol.image, vol.geometry, vol.fat, vol.bitmap, tree=vol.tree)
        assert rec.content == truth.current_content, path
        assert rec.integrity is Integrity.COMPLETE, path
        if rec.strategy == "fat-chain":
            fragmented += 1
    return fragmented


def _moves_and_renames(plan, result):
    checked = 0
    for snap in result.snapshots[3:6]:
        vol = ExfatVolume.from_bytes(snap.image)
        for v in classify_all(vol.tree, vol.fat, vol.bitmap):
            expected = snap.expected_verdicts.get(v.set_id)
            if expected in ("moved", "renamed"):
                assert v.verdict.value == expected, (snap.name, v.entry.path)
                checked += 1
    return checked


def _tail_recovered(plan, result):
    vol = ExfatVolume.from_bytes(result.image)
    [entry] = [s for s in vol.tree.live_sets() if s.path == plan.shortened]
    truth = result.manifest.live_file(plan.shortened)
    rec = recover_shortened_tail(entry, vol.image, vol.geometry, vol.fat, vol.bitmap, vol.tree)
    former = truth.content[entry.file_size:]
    assert rec.strategy == "stale-fat-chain"
    assert rec.content[:len(former)] == former


@pytest.mark.criterion(5, "protocol replay closure over 20 forged variants")
def test_protocol_closure():
    start = time.perf_counter()
    corpus = protocol_variants(20)
    moves = 0
    for plan, result in corpus:
        assert _deleted_recovered(plan, result) == 2
        moves += _moves_and_renames(plan, result)
        _tail_recovered(plan, result)
    elapsed = time.perf_counter() - start
    assert moves >= 20 * 4
    assert elapsed < 60.0


@pytest.mark.criterion(6, "carving re-attaches names and timestamps; fragmented hit completed via FAT")
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_carving_pipeline(seed):
    plan, result = carving_fixture(seed)
    vol = ExfatVolume.from_bytes(result.image)
    assert len(plan.deleted_jpegs) >= 5
    found = carve_volume(vol, [JPEG])
    attached = {}
    for hit in found.hits:
        assert not any(vol.bitmap.is_allocated(cn) for cn in hit.clusters)
        if hit.chosen is None:
            continue
        truth = result.manifest.find(hit.chosen.name)[0]
        assert hit.content == truth.content
        ts = truth.timestamps
        assert (hit.chosen.created.raw, hit.chosen.modified.raw, hit.chosen.accessed.raw) == \
            (ts["created"], ts["modified"], ts["accessed"])
        attached[hit.chosen.path] = hit
    assert set(attached) == set(plan.deleted_jpegs)
    frag = attached[plan.fragmented]
    mismatch = [f for f in frag.findings if f.check == "size-mismatch"]
    assert mismatch and mismatch[0].detail.startswith("explained")
    assert any(f.check == "fat-completion" for f in frag.findings)


@pytest.mark.criterion(7, "image digest unchanged across info, ls, classify, recover and carve")
def test_evidence_immutability(tmp_path, carving, capsys):
    path = tmp_path / "evidence.img"
    path.write_bytes(carving[1].image)
    before = hashlib.sha256(path.read_bytes()).hexdigest()
    runs = (["info"], ["ls", "--include-inactive"], ["classify"],
            ["recover", "--all-deleted", "--out", str(tmp_path / "rec")],
            ["carve", "--out", str(tmp_path / "carve")])
    for argv in runs:
        assert main([argv[0], str(path), *argv[1:]]) == 0
    capsys.readouterr()
    assert hashlib.sha256(path.read_bytes()).hexdigest() == before


@pytest.mark.criterion(8, "two --deterministic --json runs are byte-identical")
def test_determinism(tmp_path, carving, capsys):
    path = tmp_path / "evidence.img"
    path.write_bytes(carving[1].image)
    for argv in (["info"], ["ls", "--include-inactive"], ["classify"],
                 ["recover", "--all-deleted", "--out", str(tmp_path / "rec")],
                 ["carve", "--out", str(tmp_path / "carve")]):
        outputs = []
        for _ in range(2):
            assert main(["--json", "--deterministic", argv[0], str(path), *argv[1:]]) == 0
            outputs.append(capsys.readouterr().out)
        assert outputs[0] == outputs[1], argv[0]
        assert outputs[0].strip()
