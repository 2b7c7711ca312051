from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Finding:
    """One machine-readable observation backing a verdict or a recovery.

    ``locations`` cite artefacts in a form reproducible from the image alone,
    e.g. ``cluster:530``, ``set:5:96``, ``fat:37844`` or ``bitmap:66.0``.
    """

    check: str
    result: str
    locations: tuple[str, ...] = ()
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "result": self.result,
            "locations": list(self.locations),
            "detail": self.detail,
        }


def cluster_ref(cn: int) -> str:
    return f"cluster:{cn}"


def fat_ref(cn: int) -> str:
    return f"fat:{4 * cn}"


def bitmap_ref(cn: int) -> str:
    byte_index, bit_index = divmod(cn - 2, 8)
    return f"bitmap:{byte_index}.{bit_index}"


@dataclass
class FindingLog:
    items: list[Finding] = field(default_factory=list)

    def add(self, check: str, result: str, *locations: str, detail: str = "") -> Finding:
        finding = Finding(check, result, tuple(locations), detail)
        self.items.append(finding)
        return finding
