"""Interpret inactive entry sets: deleted, moved, renamed, or undecidable.

A set left inactive by the driver can mean three different things. Before
calling a file deleted, every other folder is searched for a live set that
still points at the same first cluster; the first cluster is the most
trustworthy field because it survives renames, moves and size changes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .bitmap import AllocationBitmap
from .direntry import FileEntrySet
from .fat import FatTable
from .findings import Finding, bitmap_ref, cluster_ref
from .tree import DirectoryTree


class Verdict(str, Enum):
    DELETED = "deleted"
    MOVED = "moved"
    RENAMED = "renamed"
    INDETERMINATE = "indeterminate"


@dataclass
class InactiveVerdict:
    entry: FileEntrySet
    verdict: Verdict
    evidence: list[Finding] = field(default_factory=list)
    matched_set: FileEntrySet | None = None
    # Other non-live sets sharing the first cluster, oldest first.
    related: list[FileEntrySet] = field(default_factory=list)

    @property
    def set_id(self) -> str:
        return self.entry.set_id

    def to_dict(self) -> dict:
        return {
            "set_id": self.entry.set_id,
            "path": self.entry.path,
            "verdict": self.verdict.value,
            "matched_set": self.matched_set.set_id if self.matched_set else None,
            "matched_path": self.matched_set.path if self.matched_set else None,
            "related": [s.set_id for s in self.related],
            "evidence": [f.to_dict() for f in self.evidence],
        }


def _ref(entry: FileEntrySet) -> str:
    return f"set:{entry.set_id}"


def _order(sets: Iterable[FileEntrySet]) -> list[FileEntrySet]:
    return sorted(sets, key=lambda s: s.location.image_offset)


def _related(entry: FileEntrySet, tree: DirectoryTree) -> list[FileEntrySet]:
    others = [
        s for s in tree.sets
        if s is not entry and not s.live and s.first_cluster == entry.first_cluster
    ]
    return sorted(others, key=lambda s: (s.recency_key(), s.location.image_offset))


def classify(entry: FileEntrySet, tree: DirectoryTree, fat: FatTable | None = None,
             bm: AllocationBitmap | None = None) -> InactiveVerdict:
    """Verdict for one non-live set, with the findings that support it."""
    evidence: list[Finding] = []
    result = InactiveVerdict(entry, Verdict.INDETERMINATE, evidence)
    if entry.first_cluster < 2:
        evidence.append(Finding("first-cluster", "absent", (_ref(entry),),
                                "set records no first cluster; nothing to cross-check"))
        return result
    result.related = _related(entry, tree)
    if result.related:
        evidence.append(Finding(
            "shared-first-cluster", "history",
            tuple(_ref(s) for s in result.related),
            "other inactive sets point at the same first cluster; ordered by timestamps",
        ))

    matches = _order(
        s for s in tree.live_sets() if s is not entry and s.first_cluster == entry.first_cluster
    )
    evidence.append(Finding(
        "first-cluster-search", f"{len(matches)} live match(es)",
        (cluster_ref(entry.first_cluster),) + tuple(_ref(s) for s in matches),
    ))

    parent = entry.location.parent_cluster
    moved = [
        s for s in matches
        if s.location.parent_cluster != parent
        and s.identity_word == entry.identity_word
        and s.created.raw == entry.created.raw
    ]
    renamed = [
        s for s in matches
        if s.location.parent_cluster == parent
        and (s.name != entry.name or s.name_length != entry.name_length)
        and s.created.raw == entry.created.raw
    ]

    if matches:
        if moved and renamed:
            evidence.append(Finding(
                "conflicting-matches", "moved-and-renamed",
                tuple(_ref(s) for s in moved + renamed),
                "both a cross-folder and a same-folder match exist; no tie-break is defined",
            ))
            return result
        candidates, verdict = (moved, Verdict.MOVED) if moved else (renamed, Verdict.RENAMED)
        if len(candidates) != 1:
            detail = ("live sets share the first cluster but none repeats the creation time"
                      if not candidates else "several live sets qualify equally")
            evidence.append(Finding("match-pattern", "no-unique-match",
                                    tuple(_ref(s) for s in matches), detail))
            return result
        match = candidates[0]
        evidence.append(Finding("creation-time", "equal", (_ref(entry), _ref(match)),
                                entry.created.isoformat()))
        if verdict is Verdict.MOVED:
            evidence.append(Finding("identity-word", "equal", (_ref(entry), _ref(match)),
                                    f"0x{entry.identity_word:04X}"))
            recency = "consistent" if match.modified.raw >= entry.modified.raw else "inconsistent"
            evidence.append(Finding("modification-recency", recency, (_ref(entry), _ref(match)),
                                    "the new location is expected to carry the newer modification time"))
            evidence.append(Finding("folder", "different", (_ref(entry), _ref(match)),
                                    f"{entry.parent_path} -> {match.parent_path}"))
        else:
            evidence.append(Finding("folder", "same", (_ref(entry), _ref(match)), entry.parent_path))
            evidence.append(Finding("name", "changed", (_ref(entry), _ref(match)),
                                    f"{entry.name!r} -> {match.name!r}"))
        result.verdict = verdict
        result.matched_set = match
        return result

    if bm is None:
        evidence.append(Finding("bitmap", "unavailable", (), "cannot tell deleted from reused"))
        return result
    try:
        allocated = bm.is_allocated(entry.first_cluster)
    except IndexError:
        evidence.append(Finding("first-cluster", "out-of-range", (cluster_ref(entry.first_cluster),)))
        return result
    locs = (cluster_ref(entry.first_cluster), bitmap_ref(entry.first_cluster))
    if allocated:
        owner = None
        if fat is not None and tree.cluster_size:
            owner = tree.cluster_owners(fat).get(entry.first_cluster)
        detail = f"now held by {owner.path}" if owner is not None else "allocated to another object"
        evidence.append(Finding("cluster-reused", "allocated", locs + ((_ref(owner),) if owner else ()), detail))
        return result
    evidence.append(Finding("bitmap", "unallocated", locs,
                            "no live set references the first cluster and its allocation bit is clear"))
    result.verdict = Verdict.DELETED
    return result


def classify_all(tree: DirectoryTree, fat: FatTable | None = None,
                 bm: AllocationBitmap | None = None) -> list[InactiveVerdict]:
    """Verdicts for every set that is not live, in on-disk order."""
    return [classify(s, tree, fat, bm) for s in tree.sets if not s.live]


@dataclass(frozen=True)
class SimilarCandidate:
    entry: FileEntrySet
    matched: tuple[str, ...]
    rank: int

    def to_dict(self) -> dict:
        return {"set_id": self.entry.set_id, "path": self.entry.path,
                "matched": list(self.matched), "rank": self.rank}


CRITERIA = ("first_cluster", "identity_word", "file_size", "name")


def find_similar(entry: FileEntrySet, tree: DirectoryTree,
                 criteria: Iterable[str] = CRITERIA) -> list[SimilarCandidate]:
    """Sets sharing properties with ``entry``, best match first.

    Ranking weighs first-cluster equality above identity word, file size and
    name, in that order. Rank 1 is the best candidate.
    """
    wanted = [c for c in CRITERIA if c in set(criteria)]
    unknown = set(criteria) - set(CRITERIA)
    if unknown:
        raise ValueError(f"unknown criteria: {sorted(unknown)}")
    scored = []
    for s in tree.sets:
        if s is entry or s.set_id == entry.set_id:
            continue
        hits = tuple(c for c in wanted if getattr(s, c) == getattr(entry, c))
        if hits:
            key = tuple(c in hits for c in CRITERIA)
            scored.append((key, s, hits))
    scored.sort(key=lambda t: (tuple(not k for k in t[0]), t[1].location.image_offset))
    return [SimilarCandidate(s, hits, i) for i, (_, s, hits) in enumerate(scored, 1)]
