"""Exception hierarchy shared by all courtaug modules."""


class CourtAugError(Exception):
    """Base class for all toolkit errors."""


class MalformedDocument(CourtAugError):
    """Annotation document is not parseable (bad JSON, missing arrays, duplicate ids)."""


class BrokenReference(CourtAugError):
    """A record points at an image or category id that does not exist."""


class GeometryError(CourtAugError):
    """A bbox or image carries a negative or otherwise impossible extent."""


class IdOverflow(CourtAugError):
    """Reindexing would push an identifier past the 64-bit signed range."""


class DegeneratePolygon(CourtAugError):
    """Polygon with fewer than 3 vertices."""


class LengthMismatch(CourtAugError):
    """RLE counts do not sum to width * height."""


class DimensionMismatch(CourtAugError):
    """Two rasters that must share a frame have different dimensions."""


class EmptyAfterClip(CourtAugError):
    """A pasted patch has no visible foreground after clipping to the canvas."""


class SamplingExhausted(CourtAugError):
    """No acceptable paste position found within the resample budget."""


class EmptyBank(CourtAugError):
    """The object bank holds no patch of a requested category."""


class ImageLoadFailure(CourtAugError):
    """An image could not be read from its source."""


class ManifestMissing(CourtAugError):
    """A bank directory has no manifest file."""


class CorruptEntry(CourtAugError):
    """A bank entry fails to decode or disagrees with its manifest record."""


class IoFailure(CourtAugError):
    """A file could not be read or written."""
