"""Exception hierarchy shared by the analyzer and the forge."""


class ExfatError(Exception):
    """Base class for every error raised by this package."""

    code = "error"


class ImageError(ExfatError):
    code = "unreadable"


class ImageNotFoundError(ImageError):
    code = "not-found"


class ImageTooShortError(ImageError):
    code = "too-short"


class NotExfatError(ExfatError):
    code = "not-exfat"


class InconsistentGeometryError(ExfatError):
    code = "inconsistent-geometry"


class ClusterOutOfRangeError(ExfatError, IndexError):
    code = "cluster-out-of-range"


class FatTooShortError(ExfatError):
    code = "fat-too-short"


class BitmapEntryMissingError(ExfatError):
    code = "bitmap-entry-missing"


class BitmapSizeInconsistentError(ExfatError):
    code = "bitmap-size-inconsistent"


class FileSizeExceedsVolumeError(ExfatError):
    code = "file-size-exceeds-volume"


class ForgeError(ExfatError):
    code = "forge-error"


class SizeTooSmallError(ForgeError):
    code = "size-too-small"


class NoSpaceError(ForgeError):
    code = "no-space"


class PathNotFoundError(ForgeError):
    code = "path-not-found"


class ScenarioSyntaxError(ForgeError):
    code = "scenario-syntax"
