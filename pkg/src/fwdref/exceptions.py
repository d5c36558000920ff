"""Exception hierarchy shared by the codec, readers and CLI."""


class FwdRefError(Exception):
    """Base class for all errors raised by this package."""


class PoseRangeError(FwdRefError, ValueError):
    """A pose coordinate is non-finite or outside the 16.8 fixed-point domain."""


class PoseCountError(FwdRefError, ValueError):
    """Wrong number of joints or poses."""


class DimensionMismatchError(FwdRefError, ValueError):
    pass


class MissingFrameError(FwdRefError, KeyError):
    pass


class CorruptStreamError(FwdRefError):
    """The bitstream cannot be parsed.

    ``frame_index`` is the 1-based frame being decoded when parsing failed,
    or ``None`` when the failure is outside any frame.
    """

    def __init__(self, message, frame_index=None):
        if frame_index is not None:
            message = f"frame {frame_index}: {message}"
        super().__init__(message)
        self.frame_index = frame_index


class TruncatedStreamError(CorruptStreamError):
    pass


class ChecksumMismatchError(CorruptStreamError):
    pass


class HeaderError(CorruptStreamError):
    """Bad magic, unsupported version or inconsistent header fields."""


class FormatError(FwdRefError, ValueError):
    """Malformed Y4M / PGM / pose JSON input."""


class BadSignatureError(FormatError):
    pass


class UnsupportedFormatError(FormatError):
    pass


class TruncatedFrameError(FormatError):
    def __init__(self, message, frame_index=None):
        super().__init__(message)
        self.frame_index = frame_index
