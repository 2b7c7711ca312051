"""Forged fixtures shared by several test modules."""
from __future__ import annotations

from exfat_forensics.forge import format_volume, make_content
from exfat_forensics.forge.protocol import carving_scenario, protocol_scenario
from exfat_forensics.forge.scenario import replay

TARGET_NAME = "target_earth.png"
TARGET_SIZE = 5_677_683
TARGET_FIRST = 9461


def target_replica():
    """16 MiB, 1 KiB clusters: a deleted, fragmented target_earth.png starting at 9461."""
    vol = format_volume(16 * 1024 * 1024, 1024, "REPLICA")
    cs = vol.cluster_size
    first_free = vol.free_runs()[0][0]
    vol.create_file("/pad.bin", bytes((TARGET_FIRST - first_free) * cs))
    vol.create_file("/x.bin", bytes(3000 * cs))
    vol.create_file("/blocker.bin", bytes(cs))
    vol.fill_free_space(b"\x00", 10_000)
    vol.delete("/x.bin")
    for path in vol.glob("/dummy*"):
        vol.delete(path)
    content = make_content("random", TARGET_SIZE, 2016)
    vol.create_file("/" + TARGET_NAME, content)
    vol.delete("/" + TARGET_NAME)
    return vol, content


def tail_fixture():
    """File A at 530 shortened from six clusters to two, file B at 536."""
    vol = format_volume(4 * 1024 * 1024, 1024, "TAIL")
    cs = vol.cluster_size
    first_free = vol.free_runs()[0][0]
    vol.create_file("/pad.bin", bytes((530 - first_free) * cs))
    original = make_content("text", 6 * cs - 200, 530)
    vol.create_file("/a.txt", original)
    vol.create_file("/b.bin", make_content("random", 4 * cs, 536))
    vol.shorten("/a.txt", 2 * cs - 300)
    return vol, original


def protocol_variants(count: int = 20):
    """Seeded variants of the seven-stage protocol across sizes and cluster sizes."""
    sizes = (8 * 1024 * 1024, 16 * 1024 * 1024)
    clusters = (512, 1024, 2048, 4096)
    out = []
    for seed in range(count):
        plan = protocol_scenario(seed, sizes[seed % 2], clusters[seed % 4])
        out.append((plan, replay(plan.scenario)))
    return out


def carving_fixture(seed: int = 0):
    plan = carving_scenario(seed)
    return plan, replay(plan.scenario)
