"""Block-based video codec with pose-driven forward reference frames."""

from .codec import (
    DecodedSequence,
    EncodedSequence,
    decode_sequence,
    decode_sequence_detailed,
    encode_sequence,
)
from .estimator import ForwardReferenceCodec
from .exceptions import (
    CorruptStreamError,
    DimensionMismatchError,
    FormatError,
    FwdRefError,
    MissingFrameError,
    PoseCountError,
    PoseRangeError,
)
from .model import (
    ChromaFormat,
    EncoderConfig,
    ForwardRefMode,
    Frame,
    ModeDecision,
    Pose,
    QuantizedPose,
    dequantize_pose,
    quantize_pose,
)

__version__ = "0.1.0"
