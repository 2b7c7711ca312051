"""exfat-forensics command line.

Exit codes: 0 success, 1 usage error, 2 image unreadable or not exFAT.
The evidence image is only ever opened read-only; output goes to ``--out``.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from . import __version__
from .analysis import ExfatVolume
from .carver import CLUSTER, SECTOR, carve_volume, default_signatures, load_catalog
from .classifier import classify_all
from .direntry import FileEntrySet
from .errors import ExfatError, ForgeError
from .fat import walk_chain
from .recovery import FillPolicy, recover_file, recover_shortened_tail
from .report import dumps, new_report, tree_summary

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IMAGE = 2

FILL_CHOICES = {"substitute": FillPolicy.SUBSTITUTE, "skip": FillPolicy.SKIP, "include": FillPolicy.INCLUDE}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # Shared by the top-level parser and every subcommand, so global flags
    # work before or after the subcommand name. Subcommand copies suppress
    # their defaults so they never overwrite a flag given earlier.
    def default(value):
        return argparse.SUPPRESS if suppress else value

    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--json", action="store_true", default=default(False),
                   help="emit the report as one JSON document")
    p.add_argument("--deterministic", action="store_true", default=default(False),
                   help="omit run-dependent fields so reports diff cleanly")
    p.add_argument("--offset", type=_int, default=default(0),
                   help="partition byte offset inside the image (default 0)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="exfat-forensics", description=__doc__.splitlines()[0],
                     parents=[_global_flags(False)])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    common = [_global_flags(True)]

    p = sub.add_parser("info", parents=common, help="volume geometry")
    p.add_argument("image")

    p = sub.add_parser("ls", parents=common, help="directory listing")
    p.add_argument("image")
    p.add_argument("--include-inactive", action="store_true", help="list inactive sets with verdicts")
    p.add_argument("--dir", default=None, help="only this directory")

    p = sub.add_parser("classify", parents=common, help="verdicts for inactive entry sets")
    p.add_argument("image")

    p = sub.add_parser("recover", parents=common, help="recover deleted file content")
    p.add_argument("image")
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--target", help="set id (cluster:offset) or first cluster number")
    target.add_argument("--all-deleted", action="store_true", help="every set classified deleted")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--fill", choices=sorted(FILL_CHOICES), default="substitute",
                   help="handling of clusters now allocated to other files")

    p = sub.add_parser("tail", parents=common, help="former tail of a shortened file")
    p.add_argument("image")
    p.add_argument("--target", required=True, help="set id of the live file")
    p.add_argument("--out", required=True)

    p = sub.add_parser("carve", parents=common, help="signature carving over unallocated clusters")
    p.add_argument("image")
    p.add_argument("--out", required=True)
    p.add_argument("--signatures", default=None, help="catalog file: name, header-hex, footer-hex")
    p.add_argument("--granularity", choices=(CLUSTER, SECTOR), default=CLUSTER)

    p = sub.add_parser("fatchain", parents=common, help="follow a FAT chain")
    p.add_argument("image")
    p.add_argument("--cluster", type=_int, required=True)
    p.add_argument("--max", type=_int, default=None, help="stop after this many clusters")

    p = sub.add_parser("bitmap", parents=common, help="allocation bitmap queries")
    p.add_argument("image")
    what = p.add_mutually_exclusive_group()
    what.add_argument("--cluster", type=_int)
    what.add_argument("--runs", action="store_true", help="list unallocated runs")

    p = sub.add_parser("forge", parents=common, help="build a synthetic volume from a scenario")
    p.add_argument("scenario", help="scenario file, or 'protocol' / 'carving' for the built-ins")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=_int, default=0, help="seed for the built-in scenarios")
    return parser


# -- helpers ---------------------------------------------------------------

def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name).strip("._") or "unnamed"


def _out_dir(path: str, image: str | None = None) -> Path:
    out = Path(path)
    if image is not None and out.resolve() == Path(image).resolve():
        raise UsageError("--out must not be the evidence image")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_pair(out: Path, stem: str, content: bytes, sidecar: dict) -> Path:
    data_path = out / f"{stem}.bin"
    data_path.write_bytes(content)
    (out / f"{stem}.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return data_path


def _resolve_targets(volume: ExfatVolume, target: str) -> list[FileEntrySet]:
    tree = volume.tree
    if ":" in target:
        try:
            return [tree.get(target)]
        except KeyError:
            raise UsageError(f"no entry set {target!r}")
    try:
        cn = int(target, 0)
    except ValueError:
        raise UsageError(f"target must be a set id or a cluster number, got {target!r}")
    sets = [s for s in tree.sets if s.first_cluster == cn]
    dead = [s for s in sets if not s.live]
    if not sets:
        raise UsageError(f"no entry set starts at cluster {cn}")
    return dead or sets


def _ranges(clusters: list[int]) -> str:
    parts = []
    for cn in clusters:
        if parts and parts[-1][1] + 1 == cn:
            parts[-1][1] = cn
        else:
            parts.append([cn, cn])
    return ", ".join(f"{a}" if a == b else f"{a}-{b}" for a, b in parts) or "none"


def _emit(args, report: dict, lines: list[str]) -> None:
    if args.json:
        sys.stdout.write(dumps(report))
    else:
        for line in lines:
            print(line)


def _verdicts(volume: ExfatVolume):
    return classify_all(volume.tree, volume.fat, volume.bitmap)


# -- subcommands -----------------------------------------------------------

def cmd_info(args, volume: ExfatVolume, report: dict) -> int:
    g = volume.geometry
    bm = volume.bitmap
    report["bitmap"] = {
        "first_cluster": bm.first_cluster,
        "size_bytes": bm.size_bytes,
        "allocated_clusters": bm.allocated_count(),
        "trailing_bits": bm.trailing_bits,
    }
    lines = [f"{k}: {v}" for k, v in g.to_dict().items() if k != "raw_vbr_hex"]
    lines.append(f"allocated_clusters: {bm.allocated_count()} of {g.cluster_count}")
    _emit(args, report, lines)
    return EXIT_OK


def cmd_ls(args, volume: ExfatVolume, report: dict) -> int:
    tree = volume.tree
    sets = tree.sets if args.include_inactive else tree.live_sets()
    if args.dir is not None:
        node = tree.directory(args.dir)
        if node is None:
            raise UsageError(f"no directory {args.dir!r}")
        sets = [s for s in sets if s.location.parent_cluster == node.first_cluster]
    verdicts = {v.set_id: v for v in _verdicts(volume)} if args.include_inactive else {}
    summary = tree_summary(tree, include_sets=False)
    summary["sets"] = []
    lines = []
    for s in sets:
        item = s.to_dict()
        v = verdicts.get(s.set_id)
        item["verdict"] = v.verdict.value if v else None
        summary["sets"].append(item)
        state = "live" if s.live else ("inactive" if not s.active else "orphaned")
        kind = "d" if s.is_directory else "-"
        tag = f"  [{v.verdict.value}]" if v else ""
        lines.append(f"{kind} {state:<8} {s.set_id:>12} {s.first_cluster:>8} {s.file_size:>12} "
                     f"{s.modified}  {s.path}{tag}")
    report["tree"] = summary
    _emit(args, report, lines)
    return EXIT_OK


def cmd_classify(args, volume: ExfatVolume, report: dict) -> int:
    verdicts = _verdicts(volume)
    report["verdicts"] = [v.to_dict() for v in verdicts]
    lines = []
    for v in verdicts:
        match = f" -> {v.matched_set.path}" if v.matched_set else ""
        lines.append(f"{v.set_id:>12} {v.verdict.value:<13} {v.entry.path}{match}")
    _emit(args, report, lines)
    return EXIT_OK


def cmd_recover(args, volume: ExfatVolume, report: dict) -> int:
    out = _out_dir(args.out, args.image)
    verdicts = {v.set_id: v for v in _verdicts(volume)}
    if args.all_deleted:
        targets = [v.entry for v in verdicts.values() if v.verdict.value == "deleted" and not v.entry.is_directory]
    else:
        targets = _resolve_targets(volume, args.target)
    records, lines = [], []
    for entry in targets:
        if entry.is_directory:
            continue
        rec = recover_file(entry, volume.image, volume.geometry, volume.fat, volume.bitmap,
                           FILL_CHOICES[args.fill], volume.tree)
        verdict = verdicts[entry.set_id].verdict.value if entry.set_id in verdicts else "live"
        stem = f"{verdict}_{entry.set_id.replace(':', '-')}_{_safe(entry.name)}"
        sidecar = rec.to_dict()
        sidecar["verdict"] = verdict
        path = _write_pair(out, stem, rec.content, sidecar)
        sidecar["output"] = path.name
        records.append(sidecar)
        lines.append(f"{entry.set_id:>12} {rec.integrity.value:<16} {len(rec.content):>12} {path}")
    report["recoveries"] = records
    _emit(args, report, lines)
    return EXIT_OK


def cmd_tail(args, volume: ExfatVolume, report: dict) -> int:
    out = _out_dir(args.out, args.image)
    entry = _resolve_targets(volume, args.target)[0]
    if not entry.live:
        raise UsageError(f"{entry.set_id} is not a live file; tail recovery needs the current version")
    rec = recover_shortened_tail(entry, volume.image, volume.geometry, volume.fat, volume.bitmap, volume.tree)
    sidecar = rec.to_dict()
    lines = [f"{entry.path}: {rec.strategy}, clusters {_ranges(rec.cluster_numbers)}, {rec.integrity.value}"]
    if rec.clusters:
        path = _write_pair(out, f"tail_{entry.set_id.replace(':', '-')}_{_safe(entry.name)}", rec.content, sidecar)
        sidecar["output"] = path.name
        lines.append(str(path))
    lines += [f"  {f.check}: {f.result} {' '.join(f.locations)}" for f in rec.findings]
    report["recoveries"] = [sidecar]
    _emit(args, report, lines)
    return EXIT_OK


def cmd_carve(args, volume: ExfatVolume, report: dict) -> int:
    out = _out_dir(args.out, args.image)
    signatures = load_catalog(args.signatures) if args.signatures else default_signatures()
    result = carve_volume(volume, signatures, args.granularity)
    report["carve"] = result.to_dict()
    lines = []
    for hit, item in zip(result.hits, report["carve"]["hits"]):
        if not hit.content:
            continue
        label = hit.chosen.name if hit.chosen else hit.signature
        stem = f"carve_{hit.start_cluster:08d}_{_safe(label)}"
        path = _write_pair(out, stem, hit.content, item)
        item["output"] = path.name
        lines.append(f"{hit.start_cluster:>8} {hit.length:>12} {hit.length_source:<16} {label}")
    _emit(args, report, lines)
    return EXIT_OK


def cmd_fatchain(args, volume: ExfatVolume, report: dict) -> int:
    if not volume.geometry.in_range(args.cluster):
        raise UsageError(f"cluster {args.cluster} is outside the heap")
    limit = args.max if args.max is not None else volume.geometry.cluster_count
    chain = walk_chain(volume.fat, args.cluster, limit)
    report["chain"] = chain.to_dict() | {"start": args.cluster}
    lines = [" ".join(f"0x{cn:04X}" for cn in chain.clusters), f"terminated_by: {chain.terminated_by.value}"]
    _emit(args, report, lines)
    return EXIT_OK


def cmd_bitmap(args, volume: ExfatVolume, report: dict) -> int:
    bm = volume.bitmap
    if args.cluster is not None:
        if not volume.geometry.in_range(args.cluster):
            raise UsageError(f"cluster {args.cluster} is outside the heap")
        state = "allocated" if bm.is_allocated(args.cluster) else "unallocated"
        report["bitmap"] = {"cluster": args.cluster, "state": state}
        lines = [state]
    elif args.runs:
        runs = bm.unallocated_runs()
        report["bitmap"] = {"unallocated_runs": [{"start": s, "length": n} for s, n in runs]}
        lines = [f"{s} {n}" for s, n in runs]
    else:
        report["bitmap"] = {"allocated_clusters": bm.allocated_count(),
                            "cluster_count": volume.geometry.cluster_count}
        lines = [f"{bm.allocated_count()} of {volume.geometry.cluster_count} clusters allocated"]
    _emit(args, report, lines)
    return EXIT_OK


def cmd_forge(args) -> int:
    from .forge import carving_scenario, load_scenario, protocol_scenario, replay

    out = _out_dir(args.out)
    source = Path(args.scenario)
    if source.is_file():
        scenario = load_scenario(source)
    elif args.scenario == "protocol":
        scenario = protocol_scenario(args.seed).scenario
    elif args.scenario == "carving":
        scenario = carving_scenario(args.seed).scenario
    else:
        raise UsageError(f"scenario file not found: {args.scenario}")
    result = replay(scenario)
    snapshots = []
    for i, snap in enumerate(result.snapshots):
        name = f"stage{i:02d}.img"
        (out / name).write_bytes(snap.image)
        snapshots.append({"file": name, "stage": snap.name, "sha256": snap.digest,
                          "expected_verdicts": snap.expected_verdicts})
    (out / "image.img").write_bytes(result.image)
    manifest = result.manifest.to_dict()
    manifest["snapshots"] = snapshots
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    report = new_report("forge", deterministic=args.deterministic)
    report["forge"] = {"out": str(out), "snapshots": snapshots}
    _emit(args, report, [f"{s['file']}  {s['stage']}" for s in snapshots] + [str(out / "image.img")])
    return EXIT_OK


COMMANDS = {
    "info": cmd_info,
    "ls": cmd_ls,
    "classify": cmd_classify,
    "recover": cmd_recover,
    "tail": cmd_tail,
    "carve": cmd_carve,
    "fatchain": cmd_fatchain,
    "bitmap": cmd_bitmap,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "forge":
            return cmd_forge(args)
        try:
            volume = ExfatVolume.open(args.image, args.offset)
        except (ExfatError, OSError) as exc:
            code = getattr(exc, "code", "unreadable")
            print(f"exfat-forensics: {code}: {exc}", file=sys.stderr)
            return EXIT_IMAGE
        with volume:
            report = new_report(args.command, volume, args.image, args.deterministic)
            try:
                return COMMANDS[args.command](args, volume, report)
            except ExfatError as exc:
                if isinstance(exc, ForgeError):
                    raise
                code = getattr(exc, "code", "unreadable")
                print(f"exfat-forensics: {code}: {exc}", file=sys.stderr)
                return EXIT_IMAGE
    except (UsageError, ForgeError, ValueError) as exc:
        print(f"exfat-forensics: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
