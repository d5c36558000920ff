"""Command line: encode, decode, synth, sweep and gen-synthetic.

Exit status is 0 on success, 1 for bad input (flags, files, streams) and 2
for internal errors. Failures print one ``fwdref: error: ...`` line.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codec import decode_sequence, encode_sequence
from .exceptions import FwdRefError
from .io import read_pgm, read_pose_json, read_y4m, write_pgm, write_pose_json, write_y4m
from .metrics import (
    RdCurve,
    RdPoint,
    RunLog,
    bd_psnr,
    bd_rate,
    per_frame_gain,
    write_gain_csv,
    write_rd_csv,
)
from .model import EncoderConfig, ForwardRefMode, parse_forward_mode
from .synth import FrameStore, SynthInputs, load_external_forward_frame, synthesize
from .synthetic import MOTION_SPEED, generate_sequence

PROG = "fwdref"
DEFAULT_QPS = (24, 28, 34, 38)


class UsageError(Exception):
    """Bad flags; reported with exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _forward_arg(text):
    """``off|linear|patchwarp|external[:dir]`` -> ``(mode, dir or None)``."""
    name, _, where = text.partition(":")
    try:
        mode = parse_forward_mode(name)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown forward mode {text!r}") from None
    if where and mode is not ForwardRefMode.EXTERNAL:
        raise argparse.ArgumentTypeError(f"only external takes a directory: {text!r}")
    return mode, where or None


def _qp_arg(text):
    qp = int(text)
    if not 0 <= qp <= 51:
        raise argparse.ArgumentTypeError(f"qp {qp} outside [0, 51]")
    return qp


def _qp_list(text):
    qps = [_qp_arg(t) for t in text.split(",") if t.strip()]
    if len(qps) < 4:
        raise argparse.ArgumentTypeError("a sweep needs at least 4 QPs")
    if len(set(qps)) != len(qps):
        raise argparse.ArgumentTypeError("sweep QPs must be distinct")
    return qps


def _mode_list(text):
    return [_forward_arg(t.strip()) for t in text.split(",") if t.strip()]


def _positive(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _read_frames(path):
    with open(path, "rb") as fh:
        head = fh.read(2)
        fh.seek(0)
        if head in (b"P5", b"P2"):
            return [read_pgm(fh)], None
        return read_y4m(fh)


def _write_frames(path, frames, info=None):
    with open(path, "wb") as fh:
        if Path(path).suffix.lower() == ".pgm":
            if len(frames) != 1:
                raise UsageError("PGM output holds a single frame")
            write_pgm(fh, frames[0])
        else:
            write_y4m(fh, frames, info)


def _read_poses(path):
    with open(path, encoding="utf-8") as fh:
        return read_pose_json(fh)


def _mode_label(mode, where):
    return mode.name.lower() + (f":{where}" if where else "")


def cmd_encode(args):
    mode, where = args.forward
    frames, _ = _read_frames(args.input)
    if mode.needs_poses and args.poses is None:
        raise UsageError(f"--forward {mode.name.lower()} requires --poses")
    if mode is ForwardRefMode.EXTERNAL and where is None:
        raise UsageError("--forward external needs a directory: external:<dir>")
    poses = _read_poses(args.poses).poses if args.poses else None
    cfg = EncoderConfig(qp=args.qp, gop_size=args.gop, search_range=args.search_range,
                        forward_ref_mode=mode, mode_decision=args.mode_decision)
    enc = encode_sequence(frames, poses, cfg, external=FrameStore(where) if where else None)
    Path(args.out).write_bytes(enc.data)
    if args.recon:
        _write_frames(args.recon, enc.reconstruction)
    print(f"{args.out}: {len(frames)} frames, {enc.total_bits} bits")
    return 0


def cmd_decode(args):
    data = Path(args.inp).read_bytes()
    external = FrameStore(args.external) if args.external else None
    frames = decode_sequence(data, external=external)
    _write_frames(args.out, frames)
    return 0


def cmd_synth(args):
    mode, where = args.mode
    frames, _ = _read_frames(args.iframe)
    i_frame = frames[0]
    if mode is ForwardRefMode.OFF:
        raise UsageError("--mode must be linear, patchwarp or external")
    if mode is ForwardRefMode.EXTERNAL:
        if where is None:
            raise UsageError("--mode external needs a directory: external:<dir>")
        out = load_external_forward_frame(FrameStore(where), args.t, i_frame.size)
    else:
        if args.poses is None:
            raise UsageError(f"--mode {mode.name.lower()} requires --poses")
        doc = _read_poses(args.poses)
        n = len(doc.poses)
        for flag, idx in (("--t", args.t), ("--i-index", args.i_index)):
            if not 1 <= idx <= n:
                raise UsageError(f"{flag} {idx} out of range 1..{n}")
        inputs = SynthInputs(i_frame, doc.poses[args.i_index - 1], doc.poses[args.t - 1])
        out = synthesize(inputs, mode)
    _write_frames(args.out, [out])
    return 0


@dataclass(frozen=True)
class SweepSpec:
    input: str
    poses: str | None
    qps: tuple = DEFAULT_QPS
    gop_size: int = 32
    modes: tuple = ((ForwardRefMode.OFF, None), (ForwardRefMode.PATCHWARP, None))
    search_range: int = 8

    def __post_init__(self):
        if len(self.qps) < 4:
            raise ValueError("a sweep needs at least 4 QPs")
        if len(set(self.qps)) != len(self.qps):
            raise ValueError("sweep QPs must be distinct")


@dataclass(frozen=True)
class SweepCell:
    mode: str
    point: RdPoint
    log: RunLog


def run_cell(frames, poses, mode, where, qp, gop_size, search_range=8, out_dir=None):
    """Encode and decode one (mode, qp) cell; returns a :class:`SweepCell`."""
    label = _mode_label(mode, where)
    try:
        cfg = EncoderConfig(qp=qp, gop_size=gop_size, search_range=search_range,
                            forward_ref_mode=mode)
        external = FrameStore(where) if where else None
        enc = encode_sequence(frames, poses if mode.needs_poses else None, cfg, external=external)
        if out_dir is not None:
            path = Path(out_dir) / f"{label.replace(':', '_').replace(os.sep, '_')}_qp{qp}.drf"
            path.write_bytes(enc.data)
            data = path.read_bytes()
        else:
            data = enc.data
        decoded = decode_sequence(data, external=external)
    except (FwdRefError, ValueError, OSError) as exc:
        raise FwdRefError(f"mode {label}, qp {qp}: {exc}") from exc
    except Exception as exc:
        raise RuntimeError(f"mode {label}, qp {qp}: {exc}") from exc
    if decoded != enc.reconstruction:
        raise RuntimeError(f"mode {label}, qp {qp}: decoder drifted from the encoder")
    log = RunLog.from_frames(frames, decoded, enc.frame_bits)
    w, h = frames[0].size
    point = RdPoint.from_run(qp, 8 * len(data), w, h, len(frames), float(np.mean(log.psnr)))
    return SweepCell(label, point, log)


def run_sweep(spec: SweepSpec, jobs=1, out_dir=None):
    """Run every (mode, qp) cell; results are ordered by mode, then QP as given."""
    frames, _ = _read_frames(spec.input)
    needs = any(m.needs_poses for m, _ in spec.modes)
    if needs and spec.poses is None:
        raise UsageError("the requested forward modes require --poses")
    poses = _read_poses(spec.poses).poses if spec.poses else None
    cells = [(m, w, qp) for m, w in spec.modes for qp in spec.qps]
    args = [(frames, poses, m, w, qp, spec.gop_size, spec.search_range, out_dir) for m, w, qp in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_cell, *a) for a in args]
            return [f.result() for f in futures]
    return [run_cell(*a) for a in args]


def _anchor_index(labels):
    return labels.index("off") if "off" in labels else 0


def bd_summary(results, n_qps):
    """One line per non-anchor mode comparing it with the anchor curve."""
    groups = [results[i:i + n_qps] for i in range(0, len(results), n_qps)]
    labels = [g[0].mode for g in groups]
    a = _anchor_index(labels)
    lines = []
    for i, g in enumerate(groups):
        if i == a:
            continue
        prefix = f"BD {labels[i]} vs {labels[a]}:"
        try:
            anchor = RdCurve([c.point for c in groups[a]])
            test = RdCurve([c.point for c in g])
        except ValueError as exc:
            lines.append(f"{prefix} unavailable ({exc})")
            continue
        r, d = bd_rate(anchor, test), bd_psnr(anchor, test)
        lines.append(f"{prefix} BD-rate {r:+.4f}% BD-PSNR {d:+.4f} dB")
    return lines


def cmd_sweep(args):
    spec = SweepSpec(args.input, args.poses, tuple(args.qps), args.gop, tuple(args.modes),
                     args.search_range)
    if args.keep:
        Path(args.keep).mkdir(parents=True, exist_ok=True)
        results = run_sweep(spec, args.jobs, args.keep)
    else:
        with tempfile.TemporaryDirectory() as tmp:
            results = run_sweep(spec, args.jobs, tmp)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        write_rd_csv(fh, [c.point for c in results], [c.mode for c in results])
    n = len(spec.qps)
    for line in bd_summary(results, n):
        print(line)
    if args.gain_dir:
        gdir = Path(args.gain_dir)
        gdir.mkdir(parents=True, exist_ok=True)
        groups = [results[i:i + n] for i in range(0, len(results), n)]
        a = _anchor_index([g[0].mode for g in groups])
        for i, g in enumerate(groups):
            if i == a:
                continue
            for base, cell in zip(groups[a], g):
                table = per_frame_gain(base.log, cell.log)
                name = f"gain_{cell.mode.replace(':', '_').replace(os.sep, '_')}_qp{cell.point.qp}.csv"
                with open(gdir / name, "w", newline="", encoding="utf-8") as fh:
                    write_gain_csv(fh, table)
    return 0


def cmd_gen_synthetic(args):
    frames, doc = generate_sequence(args.width, args.height, args.frames, args.motion, args.seed)
    _write_frames(args.out_y4m, frames)
    with open(args.out_poses, "w", encoding="utf-8") as fh:
        write_pose_json(fh, doc)
    return 0


def build_parser():
    p = _Parser(prog=PROG, description="Forward-referencing block video codec toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("encode", help="encode a Y4M sequence to a .drf stream")
    e.add_argument("--input", required=True)
    e.add_argument("--poses")
    e.add_argument("--qp", type=_qp_arg, default=28)
    e.add_argument("--gop", type=int, default=32)
    e.add_argument("--forward", type=_forward_arg, default=(ForwardRefMode.OFF, None))
    e.add_argument("--search-range", type=int, default=8)
    e.add_argument("--mode-decision", choices=("sad", "lagrangian"), default="sad")
    e.add_argument("--recon", help="also write the encoder reconstruction (Y4M)")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="decode a .drf stream to Y4M")
    d.add_argument("--in", dest="inp", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--external", help="frame store for streams using external references")
    d.set_defaults(func=cmd_decode)

    s = sub.add_parser("synth", help="write one synthesized forward-reference frame")
    s.add_argument("--iframe", required=True, help="PGM or Y4M (first frame is used)")
    s.add_argument("--poses")
    s.add_argument("--t", type=int, required=True, help="1-based target frame index")
    s.add_argument("--i-index", type=int, default=1, help="1-based pose index of the I-frame")
    s.add_argument("--mode", type=_forward_arg, required=True)
    s.add_argument("--out", required=True, help=".pgm or .y4m")
    s.set_defaults(func=cmd_synth)

    w = sub.add_parser("sweep", help="RD sweep over QPs and forward modes")
    w.add_argument("--input", required=True)
    w.add_argument("--poses")
    w.add_argument("--qps", type=_qp_list, default=list(DEFAULT_QPS))
    w.add_argument("--gop", type=int, default=32)
    w.add_argument("--modes", type=_mode_list,
                   default=[(ForwardRefMode.OFF, None), (ForwardRefMode.PATCHWARP, None)])
    w.add_argument("--search-range", type=int, default=8)
    w.add_argument("--jobs", type=_positive, default=1)
    w.add_argument("--keep", help="directory to keep the produced .drf files in")
    w.add_argument("--gain-dir", help="directory for per-frame gain CSVs")
    w.add_argument("--out", required=True, help="RD CSV path")
    w.set_defaults(func=cmd_sweep)

    g = sub.add_parser("gen-synthetic", help="generate a synthetic test sequence")
    g.add_argument("--width", type=_positive, default=128)
    g.add_argument("--height", type=_positive, default=128)
    g.add_argument("--frames", type=_positive, default=32)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--motion", choices=sorted(MOTION_SPEED), default="fast")
    g.add_argument("--out-y4m", required=True)
    g.add_argument("--out-poses", required=True)
    g.set_defaults(func=cmd_gen_synthetic)
    return p


def _fail(message, code):
    text = " ".join(str(message).split())
    print(f"{PROG}: error: {text}", file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        return _fail(exc, 1)
    except (FwdRefError, ValueError, OSError, KeyError) as exc:
        return _fail(exc, 1)
    except Exception as exc:  # noqa: BLE001
        return _fail(f"internal error: {type(exc).__name__}: {exc}", 2)


if __name__ == "__main__":
    sys.exit(main())
