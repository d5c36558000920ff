"""Deterministic test sequences: a textured stick figure over a static scene.

The figure's 13 joints follow sinusoidal trajectories whose speed sets the
motion class. Ground-truth joint centres are returned alongside the frames.
"""

from __future__ import annotations

import math

import numpy as np

from .io import PoseDocument
from .model import JOINT_NAMES, POSE_SCALE, Frame, Pose

MOTION_SPEED = {"fast": 8.0, "moderate": 4.0, "slow": 1.0}  # max px per frame
PERIOD = 16  # frames per swing cycle

# normalized rest pose, JOINT_NAMES order
_REST = (
    (0.50, 0.16),
    (0.41, 0.30), (0.59, 0.30),
    (0.35, 0.44), (0.65, 0.44),
    (0.31, 0.57), (0.69, 0.57),
    (0.45, 0.58), (0.55, 0.58),
    (0.43, 0.74), (0.57, 0.74),
    (0.41, 0.89), (0.59, 0.89),
)

# swing direction per joint; |d| scales the joint's share of the speed
_SWING = (
    (0.0, -0.25),
    (-0.2, -0.2), (0.2, -0.2),
    (-0.5, -0.4), (0.5, -0.4),
    (-0.6, -0.8), (0.6, -0.8),
    (-0.15, 0.0), (0.15, 0.0),
    (-0.4, 0.2), (0.4, 0.2),
    (-0.8, 0.6), (0.8, 0.6),
)

BONES = (
    (0, 1), (0, 2), (1, 2),
    (1, 3), (3, 5), (2, 4), (4, 6),
    (1, 7), (2, 8), (7, 8),
    (7, 9), (9, 11), (8, 10), (10, 12),
)

DISC_RADIUS = 10
BAR_HALF_WIDTH = 6
STRIPE = 4
STRIPE_CONTRAST = 40


class LCG:
    """32-bit linear congruential generator (Numerical Recipes constants)."""

    def __init__(self, seed: int):
        self.state = seed & 0xFFFFFFFF

    def next(self) -> int:
        self.state = (self.state * 1664525 + 1013904223) & 0xFFFFFFFF
        return self.state

    def block(self, n: int) -> np.ndarray:
        return np.array([self.next() for _ in range(n)], dtype=np.uint64)


def _background(rng: LCG, width: int, height: int, cell=4):
    cw, ch = -(-width // cell), -(-height // cell)
    coarse = (rng.block(cw * ch) >> np.uint64(25)).astype(np.int64).reshape(ch, cw)
    coarse = 60 + coarse  # [60, 188)
    up = np.repeat(np.repeat(coarse, cell, axis=0), cell, axis=1)[:height, :width]
    # 3x3 box blur in integers, edge-replicated
    p = np.pad(up, 1, mode="edge")
    acc = sum(p[dy:dy + height, dx:dx + width] for dy in range(3) for dx in range(3))
    return ((acc + 4) // 9).astype(np.uint8)


def _disc_textures(rng: LCG, r):
    size = 2 * r + 1
    tex = []
    for j in range(len(JOINT_NAMES)):
        vals = (rng.block(size * size) >> np.uint64(30)).astype(np.int64).reshape(size, size)
        tex.append((120 + 40 * vals).astype(np.uint8))  # {120,160,200,240}
    return tex


def trajectory(width: int, height: int, n_frames: int, motion: str = "fast", seed: int = 0):
    """Ground-truth joint centres ``(n_frames, 13, 2)``, exact in 16.8 fixed point."""
    if motion not in MOTION_SPEED:
        raise ValueError(f"motion must be one of {sorted(MOTION_SPEED)}")
    omega = 2.0 * math.pi / PERIOD
    amp = MOTION_SPEED[motion] / omega
    rng = LCG(seed ^ 0x9E3779B9)
    sign = 1.0 if rng.next() & 1 else -1.0
    scale = min(width, height) / 128.0
    out = np.empty((n_frames, len(JOINT_NAMES), 2))
    for t in range(n_frames):
        s = math.sin(omega * t)
        for j, ((rx, ry), (sx, sy)) in enumerate(zip(_REST, _SWING)):
            x = rx * width + sign * sx * amp * scale * s
            y = ry * height + sy * amp * scale * s
            out[t, j] = (x, y)
    out = np.clip(out, 0.0, None)
    return np.round(out * POSE_SCALE) / POSE_SCALE


def _draw_bar(img, p0, p1, value, hw):
    h, w = img.shape
    x0, y0 = p0
    x1, y1 = p1
    xa = max(0, int(math.floor(min(x0, x1) - hw - 1)))
    xb = min(w, int(math.ceil(max(x0, x1) + hw + 2)))
    ya = max(0, int(math.floor(min(y0, y1) - hw - 1)))
    yb = min(h, int(math.ceil(max(y0, y1) + hw + 2)))
    if xa >= xb or ya >= yb:
        return
    yy, xx = np.mgrid[ya:yb, xa:xb].astype(np.float64)
    dx, dy = x1 - x0, y1 - y0
    L2 = dx * dx + dy * dy
    u = np.zeros_like(xx) if L2 == 0 else np.clip(((xx - x0) * dx + (yy - y0) * dy) / L2, 0, 1)
    d2 = (xx - x0 - u * dx) ** 2 + (yy - y0 - u * dy) ** 2
    # stripes across the bone, anchored at p0 so the texture moves with it
    stripes = np.floor(u * math.sqrt(L2) / STRIPE).astype(np.int64) % 2
    region = img[ya:yb, xa:xb]
    inside = d2 <= hw * hw
    region[inside] = (value + STRIPE_CONTRAST * stripes)[inside]


def _draw_disc(img, center, tex):
    h, w = img.shape
    r = tex.shape[0] // 2
    cx, cy = (int(math.floor(c + 0.5)) for c in center)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    mask = xx * xx + yy * yy <= r * r
    for (oy, ox), v, m in zip(np.ndindex(tex.shape), tex.ravel(), mask.ravel()):
        y, x = cy + oy - r, cx + ox - r
        if m and 0 <= y < h and 0 <= x < w:
            img[y, x] = v


def render_frame(background, joints, textures, bar_half_width=BAR_HALF_WIDTH):
    img = background.copy()
    for bi, (a, b) in enumerate(BONES):
        _draw_bar(img, joints[a], joints[b], 30 + 12 * bi, bar_half_width)
    for j, tex in enumerate(textures):
        _draw_disc(img, joints[j], tex)
    return img


def generate_sequence(width=128, height=128, n_frames=32, motion="fast", seed=0,
                      name=None, disc_radius=DISC_RADIUS, bar_half_width=BAR_HALF_WIDTH):
    """Return ``(frames, PoseDocument)`` for a synthetic sequence."""
    rng = LCG(seed)
    bg = _background(rng, width, height)
    textures = _disc_textures(rng, disc_radius)
    traj = trajectory(width, height, n_frames, motion, seed)
    frames, poses = [], []
    for t in range(n_frames):
        frames.append(Frame.from_luma(render_frame(bg, traj[t], textures, bar_half_width)))
        poses.append(Pose(tuple((float(x), float(y)) for x, y in traj[t])))
    doc = PoseDocument(name or f"synthetic-{motion}-{seed}", width, height, poses)
    return frames, doc


def max_step(doc: PoseDocument) -> float:
    """Largest per-frame joint displacement (Euclidean, px) in a document."""
    arr = np.array([p.joints for p in doc.poses])
    if len(arr) < 2:
        return 0.0
    return float(np.sqrt(((arr[1:] - arr[:-1]) ** 2).sum(axis=2)).max())


def displacement_from_first(doc: PoseDocument) -> np.ndarray:
    """Mean joint distance of every frame's pose from frame 1's pose."""
    arr = np.array([p.joints for p in doc.poses])
    return np.sqrt(((arr - arr[0]) ** 2).sum(axis=2)).mean(axis=1)
