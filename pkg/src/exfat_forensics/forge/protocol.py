"""Seeded generator for the seven-stage evidence protocol.

Stage 1 formats, stage 2 adds evidence files, a folder and dummy fill,
stage 3 punches holes and adds large files that must fragment, stage 4
renames and moves, stage 5 shortens the fragmented text file, stage 6
deletes, stage 7 removes the folder.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .scenario import (
    CreateDir,
    CreateFile,
    Delete,
    FillFreeSpace,
    Move,
    Rename,
    Scenario,
    Shorten,
    make_content,
)

FOLDER = "/subfolder"


@dataclass
class ProtocolPlan:
    scenario: Scenario
    renamed: list[tuple[str, str]] = field(default_factory=list)
    moved: list[tuple[str, str]] = field(default_factory=list)
    deleted: list[str] = field(default_factory=list)
    fragmented: list[str] = field(default_factory=list)
    shortened: str = ""


def protocol_scenario(seed: int = 0, size: int = 16 * 1024 * 1024, cluster_size: int = 1024,
                      evidence_files: int = 8) -> ProtocolPlan:
    rng = random.Random(seed)
    cs = cluster_size
    clusters = size // cs
    chunk = max(8, clusters // 48)
    sc = Scenario(size=size, cluster_size=cs, label="EVIDENCE")
    plan = ProtocolPlan(sc)

    def nbytes(lo: float, hi: float) -> int:
        return max(8, int(rng.uniform(lo, hi) * cs) - rng.randrange(0, cs // 2))

    stage2 = sc.stage("Stage 2: adding files and folder")
    stage2.operations.append(CreateDir(FOLDER))
    evidence = []
    for i in range(evidence_files):
        kind, ext = ("jpeg", "jpg") if i % 3 != 2 else ("pdf", "pdf")
        path = f"/{'photo' if ext == 'jpg' else 'doc'}{i:02d}.{ext}"
        stage2.operations.append(CreateFile(path, make_content(kind, nbytes(1.2, 20), seed * 1000 + i)))
        evidence.append(path)
    for i in range(6):
        stage2.operations.append(CreateFile(f"/small{i}.jpg", make_content("jpeg", nbytes(1.6, 4), seed * 1000 + 100 + i)))
        stage2.operations.append(CreateFile(f"/spacer{i}.bin", bytes(nbytes(1, 3))))
    stage2.operations.append(FillFreeSpace(b"\x00", chunk))

    stage3 = sc.stage("Stage 3: adding fragmented files")
    stage3.operations.append(Delete("/small*.jpg"))
    stage3.operations.append(Delete("/dummy*[13579].bin"))
    big = [
        ("/big.txt", "text"),
        ("/large1.jpg", "jpeg"),
        ("/large2.pdf", "pdf"),
    ]
    for j, (path, kind) in enumerate(big):
        length = int(chunk * cs * rng.uniform(1.3, 2.6))
        stage3.operations.append(CreateFile(path, make_content(kind, length, seed * 1000 + 200 + j)))
    plan.fragmented = [p for p, _ in big]

    order = evidence[:]
    rng.shuffle(order)
    to_rename, to_move, to_delete = order[:2], order[2:4], order[4:7]

    stage4 = sc.stage("Stage 4: renaming and moving")
    for k, path in enumerate(to_rename):
        stem, ext = path[1:].rsplit(".", 1)
        new_name = f"renamed_{stem}_with_long_name_{k}.{ext}"
        stage4.operations.append(Rename(path, new_name))
        plan.renamed.append((path, "/" + new_name))
    for path in to_move:
        stage4.operations.append(Move(path, FOLDER))
        plan.moved.append((path, FOLDER + path))

    stage5 = sc.stage("Stage 5: shortening")
    stage5.operations.append(Shorten("/big.txt", "first-fragment"))
    plan.shortened = "/big.txt"

    stage6 = sc.stage("Stage 6: deleting files")
    for path in to_delete + ["/large1.jpg", "/large2.pdf"]:
        stage6.operations.append(Delete(path))
        plan.deleted.append(path)

    stage7 = sc.stage("Stage 7: deleting the folder")
    stage7.operations.append(Delete(FOLDER))
    return plan


@dataclass
class CarvingPlan:
    scenario: Scenario
    deleted_jpegs: list[str] = field(default_factory=list)   # final paths before deletion
    fragmented: str = ""
    renamed: tuple[str, str] = ("", "")
    embedded: str = ""


def carving_scenario(seed: int = 0, size: int = 8 * 1024 * 1024, cluster_size: int = 1024,
                     contiguous_jpegs: int = 4) -> CarvingPlan:
    """Deleted JPEGs for carving: contiguous ones, one fragmented, one renamed first.

    Also deletes a file carrying a JPEG in its middle, which cluster-start
    scanning must not report.
    """
    rng = random.Random(seed)
    cs = cluster_size
    chunk = 64
    hole = 24
    sc = Scenario(size=size, cluster_size=cs, label="CARVING")
    plan = CarvingPlan(sc)

    setup = sc.stage("setup")
    ops = setup.operations
    for i in range(contiguous_jpegs):
        path = f"/img{i:02d}.jpg"
        length = rng.randrange(2 * cs, 20 * cs)
        ops.append(CreateFile(path, make_content("jpeg", length, seed * 100 + i)))
        ops.append(CreateFile(f"/keep{i:02d}.bin", bytes(rng.randrange(1, 3 * cs))))
        plan.deleted_jpegs.append(path)
    ops.append(CreateFile("/rn.jpg", make_content("jpeg", rng.randrange(2 * cs, 10 * cs), seed * 100 + 50)))
    ops.append(CreateFile("/keep_rn.bin", bytes(cs)))
    inner = make_content("jpeg", 3 * cs, seed * 100 + 60)
    ops.append(CreateFile("/container.bin", bytes(100) + inner + bytes(cs)))
    ops.append(CreateFile("/keep_container.bin", bytes(cs)))
    for k in (1, 2):
        ops.append(CreateFile(f"/hole{k}.bin", bytes(hole * cs)))
        ops.append(CreateFile(f"/wall{k}.bin", bytes(cs)))
    ops.append(FillFreeSpace(b"\x00", chunk))

    reshape = sc.stage("fragment and rename")
    reshape.operations += [Delete("/hole1.bin"), Delete("/hole2.bin"), Delete("/dummy00003.bin")]
    frag_len = (2 * hole + chunk // 2) * cs - rng.randrange(1, cs)
    reshape.operations.append(CreateFile("/fragmented.jpg", make_content("jpeg", frag_len, seed * 100 + 70)))
    reshape.operations.append(Rename("/rn.jpg", "renamed_then_deleted.jpg"))
    plan.fragmented = "/fragmented.jpg"
    plan.renamed = ("/rn.jpg", "/renamed_then_deleted.jpg")
    plan.embedded = "/container.bin"

    wipe = sc.stage("delete")
    plan.deleted_jpegs += [plan.fragmented, plan.renamed[1]]
    for path in plan.deleted_jpegs + [plan.embedded]:
        wipe.operations.append(Delete(path))
    return plan
