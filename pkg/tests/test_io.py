import io
import json

import numpy as np
import pytest

from conftest import random_frame
from fwdref.exceptions import (
    BadSignatureError,
    FormatError,
    PoseCountError,
    PoseRangeError,
    TruncatedFrameError,
    UnsupportedFormatError,
)
from fwdref.io import (
    PoseDocument,
    read_pgm,
    read_pose_json,
    read_y4m,
    write_pgm,
    write_pose_json,
    write_y4m,
)
from fwdref.model import ChromaFormat, Pose


def test_y4m_round_trip_420(rng):
    frames = [random_frame(rng, 11, 7, chroma=True) for _ in range(3)]
    buf = io.BytesIO()
    write_y4m(buf, frames)
    data = buf.getvalue()
    assert data.startswith(b"YUV4MPEG2 W11 H7 ")
    # 11x7 luma + two 6x4 chroma planes per frame
    assert data.count(b"FRAME\n") == 3
    back, info = read_y4m(io.BytesIO(data))
    assert back == frames and info.chroma_format is ChromaFormat.C420
    assert info.frame_rate == "30:1"
    out = io.BytesIO()
    write_y4m(out, back, info)
    assert out.getvalue() == data


def test_y4m_mono_and_frame_params(rng):
    frames = [random_frame(rng, 8, 8)]
    raw = b"YUV4MPEG2 W8 H8 F25:1 Cmono XYSCSS=MONO\nFRAME Ixyz\n" + frames[0].tobytes()
    back, info = read_y4m(io.BytesIO(raw))
    assert back == frames and info.frame_params == [["Ixyz"]]
    out = io.BytesIO()
    write_y4m(out, back, info)
    assert out.getvalue() == raw


@pytest.mark.parametrize("raw, err, msg", [
    (b"YUV4MPEG W8 H8\n", BadSignatureError, "signature"),
    (b"YUV4MPEG2 W8 H8 C444\n", UnsupportedFormatError, "C444"),
    (b"YUV4MPEG2 H8\n", FormatError, "W/H"),
    (b"YUV4MPEG2 W8 H8 Cmono\nFRAME\n" + bytes(64) + b"FRAME\n" + bytes(10), TruncatedFrameError, "frame 2"),
    (b"YUV4MPEG2 W8 H8 Cmono\nFRAMX\n" + bytes(64), FormatError, "frame 1"),
])
def test_y4m_errors(raw, err, msg):
    with pytest.raises(err, match=msg):
        read_y4m(io.BytesIO(raw))


def test_truncated_frame_index():
    raw = b"YUV4MPEG2 W8 H8 Cmono\nFRAME\n" + bytes(64) + b"FRAME\n" + bytes(3)
    with pytest.raises(TruncatedFrameError) as info:
        read_y4m(io.BytesIO(raw))
    assert info.value.frame_index == 2


def test_pgm_round_trip_and_comments(rng):
    f = random_frame(rng, 5, 3)
    buf = io.BytesIO()
    write_pgm(buf, f)
    assert read_pgm(io.BytesIO(buf.getvalue())) == f
    raw = b"P5\n# comment\n5 3\n255\n" + f.luma.tobytes()
    assert read_pgm(io.BytesIO(raw)) == f


@pytest.mark.parametrize("raw, err", [
    (b"P2\n1 1\n255\n0", UnsupportedFormatError),
    (b"P6\n1 1\n255\n\x00\x00\x00", BadSignatureError),
    (b"P5\n2 2\n65535\n" + bytes(8), UnsupportedFormatError),
    (b"P5\n2 2\n255\n\x00", TruncatedFrameError),
    (b"P5\n2 x\n255\n\x00", FormatError),
])
def test_pgm_errors(raw, err):
    with pytest.raises(err):
        read_pgm(io.BytesIO(raw))


def _doc_json(frames):
    return json.dumps({"name": "s", "width": 64, "height": 64, "frames": frames})


def test_pose_json_round_trip():
    pose = Pose(tuple((float(j), float(2 * j) + 0.25) for j in range(13)))
    doc = PoseDocument("walk", 64, 64, [pose, pose])
    buf = io.StringIO()
    write_pose_json(buf, doc)
    back = read_pose_json(io.StringIO(buf.getvalue()))
    assert back == doc


@pytest.mark.parametrize("frames, err, msg", [
    ([{"joints": [[1, 1]] * 13}, {"joints": [[1, 1]] * 12}], PoseCountError, "frame 2"),
    ([{"joints": [[1, 1]] * 12 + [[-1, 1]]}], PoseRangeError, "frame 1"),
    ([{"joints": [[1, 1]] * 12 + [[1, "a"]]}], FormatError, "frame 1"),
    ([{"joints": [[1, 1]] * 12 + [[1, 1, 1]]}], PoseCountError, "frame 1"),
    ([{"joints": [[1, 1]] * 13}, {}], FormatError, "frame 2"),
])
def test_pose_json_errors(frames, err, msg):
    with pytest.raises(err, match=msg):
        read_pose_json(io.StringIO(_doc_json(frames)))


def test_pose_json_structure_errors():
    with pytest.raises(FormatError):
        read_pose_json(io.StringIO("{"))
    with pytest.raises(FormatError):
        read_pose_json(io.StringIO("[]"))
    with pytest.raises(FormatError):
        read_pose_json(io.StringIO(json.dumps({"name": "x", "width": 1, "height": 1})))
    with pytest.raises(PoseRangeError):
        read_pose_json(io.StringIO('{"name":"x","width":1,"height":1,"frames":[{"joints":['
                                   + "[1, 1]," * 12 + '[1, NaN]]}]}'))
