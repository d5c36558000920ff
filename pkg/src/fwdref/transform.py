"""8x8 orthonormal DCT-II and the scalar quantizer."""

import numpy as np

from .model import round_half_away

N = 8


def _dct_matrix(n=N):
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    m = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    m[0, :] = np.sqrt(1.0 / n)
    return m


DCT_MATRIX = _dct_matrix()


def dct8x8(block):
    """Forward 2-D DCT of one ``(8, 8)`` block or a stack ``(..., 8, 8)``."""
    b = np.asarray(block, dtype=np.float64)
    return DCT_MATRIX @ b @ DCT_MATRIX.T


def idct8x8(coeffs):
    c = np.asarray(coeffs, dtype=np.float64)
    return DCT_MATRIX.T @ c @ DCT_MATRIX


def qstep(qp: int) -> float:
    if not 0 <= qp <= 51:
        raise ValueError(f"qp must be in [0, 51], got {qp}")
    return 2.0 ** ((qp - 4) / 6.0)


def quantize_block(coeffs, qp: int):
    return round_half_away(np.asarray(coeffs, dtype=np.float64) / qstep(qp))


def dequantize_block(levels, qp: int):
    return np.asarray(levels, dtype=np.float64) * qstep(qp)


def forward_code(residual_blocks, qp):
    """Residual sample blocks ``(n, 8, 8)`` -> integer levels."""
    return quantize_block(dct8x8(residual_blocks), qp)


def inverse_code(levels, qp):
    """Integer levels ``(n, 8, 8)`` -> reconstructed integer residual.

    Encoder and decoder both reconstruct through this function so their
    arithmetic is identical.
    """
    return round_half_away(idct8x8(dequantize_block(levels, qp)))


def to_blocks(plane, size=N):
    """``(H, W)`` plane -> ``(H/size * W/size, size, size)`` raster-order blocks."""
    h, w = plane.shape
    return (
        plane.reshape(h // size, size, w // size, size)
        .swapaxes(1, 2)
        .reshape(-1, size, size)
    )


def from_blocks(blocks, h, w):
    size = blocks.shape[-1]
    return (
        blocks.reshape(h // size, w // size, size, size)
        .swapaxes(1, 2)
        .reshape(h, w)
    )
