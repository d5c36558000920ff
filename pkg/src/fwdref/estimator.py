"""scikit-learn style wrapper around the sequence encoder."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .codec import decode_sequence, encode_sequence
from .metrics import psnr
from .model import EncoderConfig
from .validation import check_frames, check_poses


class ForwardReferenceCodec(TransformerMixin, BaseEstimator):
    """Encode a frame sequence and expose the stream and its reconstruction.

    ``X`` is a sequence of :class:`Frame` objects or a ``(n, height, width)``
    uint8 luma array. Poses, one per frame, may be passed as ``y`` or as the
    ``poses`` keyword; they are needed by the ``linear`` and ``patchwarp``
    forward modes.

    After :meth:`fit`: ``bitstream_`` (bytes), ``reconstruction_`` (frames),
    ``frame_bits_`` and ``stats_``.
    """

    def __init__(self, qp=28, gop_size=32, search_range=8, forward_ref_mode="off",
                 mode_decision="sad", patch_radius=24, bump_radius=4, external=None):
        self.qp = qp
        self.gop_size = gop_size
        self.search_range = search_range
        self.forward_ref_mode = forward_ref_mode
        self.mode_decision = mode_decision
        self.patch_radius = patch_radius
        self.bump_radius = bump_radius
        self.external = external

    def _config(self):
        return EncoderConfig(
            qp=self.qp, gop_size=self.gop_size, search_range=self.search_range,
            forward_ref_mode=self.forward_ref_mode, mode_decision=self.mode_decision,
            patch_radius=self.patch_radius, bump_radius=self.bump_radius,
        )

    def fit(self, X, y=None, poses=None):
        if y is not None and poses is not None:
            raise ValueError("pass poses either as y or as poses, not both")
        frames = check_frames(X)
        poses = check_poses(poses if poses is not None else y, len(frames))
        enc = encode_sequence(frames, poses, self._config(), external=self.external)
        self.bitstream_ = enc.data
        self.reconstruction_ = enc.reconstruction
        self.frame_bits_ = np.array(enc.frame_bits)
        self.stats_ = enc.stats
        self.n_frames_ = len(frames)
        self.frame_size_ = frames[0].size
        return self

    def transform(self, X, y=None, poses=None):
        """Encode ``X`` and return its decoded reconstruction in ``X``'s layout."""
        self.fit(X, y, poses)
        decoded = decode_sequence(self.bitstream_, external=self.external)
        if isinstance(X, np.ndarray):
            return np.stack([f.luma for f in decoded])
        return decoded

    def fit_transform(self, X, y=None, **fit_params):
        return self.transform(X, y, **fit_params)

    def decode(self):
        """Decode the fitted bitstream."""
        check_is_fitted(self, "bitstream_")
        return decode_sequence(self.bitstream_, external=self.external)

    def score(self, X, y=None):
        """Mean per-frame luma PSNR of the fitted reconstruction against ``X``."""
        check_is_fitted(self, "reconstruction_")
        frames = check_frames(X)
        if len(frames) != len(self.reconstruction_):
            raise ValueError(f"{len(frames)} frames given, {len(self.reconstruction_)} were encoded")
        return float(np.mean([psnr(a, b) for a, b in zip(frames, self.reconstruction_)]))

    @property
    def bits_per_pixel_(self):
        check_is_fitted(self, "bitstream_")
        w, h = self.frame_size_
        return 8 * len(self.bitstream_) / (w * h * self.n_frames_)

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.two_d_array = False
        tags.input_tags.three_d_array = True
        tags.requires_fit = True
        return tags

