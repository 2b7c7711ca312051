"""One-stop loader tying the layers of a volume together."""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

from .bitmap import AllocationBitmap, load_bitmap
from .direntry import iter_records
from .fat import FatTable, load_fat, walk_chain
from .tree import DirectoryTree, walk_tree
from .volume import VolumeGeometry, VolumeImage, open_image, parse_vbr, read_cluster


@dataclass
class ExfatVolume:
    image: VolumeImage
    geometry: VolumeGeometry
    fat: FatTable

    @classmethod
    def open(cls, path: str | os.PathLike, partition_offset: int = 0) -> "ExfatVolume":
        image = open_image(path, partition_offset)
        try:
            return cls.from_image(image)
        except Exception:
            image.close()
            raise

    @classmethod
    def from_bytes(cls, data: bytes, partition_offset: int = 0) -> "ExfatVolume":
        return cls.from_image(VolumeImage.from_bytes(data, partition_offset))

    @classmethod
    def from_image(cls, image: VolumeImage) -> "ExfatVolume":
        geom = parse_vbr(image)
        return cls(image, geom, load_fat(image, geom))

    def root_records(self):
        geom = self.geometry
        chain = walk_chain(self.fat, geom.root_first_cluster, geom.cluster_count)
        data = b"".join(read_cluster(self.image, geom, cn) for cn in chain.clusters)
        offsets = [geom.cluster_to_offset(cn) for cn in chain.clusters]
        return iter_records(data, geom.root_first_cluster, offsets, geom.cluster_size_bytes)

    @cached_property
    def bitmap(self) -> AllocationBitmap:
        return load_bitmap(self.image, self.geometry, self.fat, self.root_records())

    @cached_property
    def tree(self) -> DirectoryTree:
        return walk_tree(self.image, self.geometry, self.fat, self.bitmap)

    def close(self) -> None:
        self.image.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
