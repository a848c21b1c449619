"""Framing and MFCC-family feature extraction.

The supported layouts are the three used by the verification experiments:
24-dim (12 MFCC + 12 deltas, c0 replaced by log energy), 39-dim
(13 + 13 + 13) and 60-dim (20 + 20 + 20). Per frame the pipeline is
pre-emphasis -> Hamming window -> |FFT|^2 -> triangular mel filterbank
(HTK scale) -> log -> orthonormal DCT-II, with delta coefficients appended
by linear regression over a +-W frame context (edges replicated).

No cepstral mean normalization or liftering is applied anywhere.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .audio import Utterance
from .exceptions import AudioFormatError, InvalidInputError, TooShortError

# Floor inside log() calls; keeps silent frames finite instead of -inf.
LOG_FLOOR = 1e-10

FEATURE_MAGIC = b"NIFSFEAT"
FEATURE_VERSION = 1


@dataclass
class FrameConfig:
    """Analysis framing: 25 ms Hamming windows shifted by 10 ms by default."""

    frame_len_ms: float = 25.0
    shift_ms: float = 10.0
    window: str = "hamming"

    def __post_init__(self):
        if not 0 < self.shift_ms <= self.frame_len_ms:
            raise InvalidInputError(
                f"need 0 < shift_ms <= frame_len_ms, got {self.shift_ms}/{self.frame_len_ms}"
            )
        if self.window != "hamming":
            raise InvalidInputError(f"unsupported window '{self.window}'")

    def frame_len(self, rate: int) -> int:
        return int(round(self.frame_len_ms * rate / 1000.0))

    def frame_shift(self, rate: int) -> int:
        return int(round(self.shift_ms * rate / 1000.0))


@dataclass
class MfccConfig:
    """Cepstral analysis parameters.

    ``n_cepstra`` in {12, 13, 20} reproduces the stock 24/39/60-dim layouts
    together with ``delta_order`` 1 or 2, but any value up to the filter
    count is accepted. ``mel_fmax=None`` means Nyquist.
    """

    n_cepstra: int = 12
    delta_order: int = 1
    replace_c0_with_log_energy: bool = True
    n_mel_filters: int = 26
    fft_size: int = 512
    pre_emphasis: float = 0.97
    mel_fmin: float = 0.0
    mel_fmax: float | None = None
    delta_window: int = 2

    def __post_init__(self):
        if self.n_cepstra < 1 or self.n_cepstra > self.n_mel_filters:
            raise InvalidInputError(
                f"need 1 <= n_cepstra <= n_mel_filters, got {self.n_cepstra}/{self.n_mel_filters}"
            )
        if self.delta_order not in (1, 2):
            raise InvalidInputError(f"delta_order must be 1 or 2, got {self.delta_order}")
        if self.fft_size < 2 or self.fft_size & (self.fft_size - 1):
            raise InvalidInputError(f"fft_size must be a power of two, got {self.fft_size}")
        if not 0.0 <= self.pre_emphasis < 1.0:
            raise InvalidInputError(f"pre_emphasis must be in [0, 1), got {self.pre_emphasis}")
        if self.delta_window < 1:
            raise InvalidInputError("delta_window must be >= 1")
        if self.mel_fmin < 0:
            raise InvalidInputError("mel_fmin must be >= 0")

    @property
    def dim(self) -> int:
        return self.n_cepstra * (1 + self.delta_order)


@dataclass
class FeatureMatrix:
    """N frames x D coefficients, with original frame positions attached.

    ``frame_indices`` track which frames of the source utterance each row
    came from, so selection can subset rows without losing provenance.
    """

    data: np.ndarray
    frame_indices: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        idx = np.asarray(self.frame_indices, dtype=np.int64)
        if data.ndim != 2:
            raise InvalidInputError(f"feature data must be 2-D, got shape {data.shape}")
        if idx.shape != (data.shape[0],):
            raise InvalidInputError("frame_indices must have one entry per feature row")
        if not np.all(np.isfinite(data)):
            raise InvalidInputError("feature matrix contains non-finite entries")
        if idx.size > 1 and not np.all(np.diff(idx) > 0):
            raise InvalidInputError("frame_indices must be strictly increasing")
        data = data.copy()
        data.flags.writeable = False
        idx = idx.copy()
        idx.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "frame_indices", idx)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def frame_count(n_samples: int, cfg: FrameConfig, rate: int) -> int:
    """Number of full analysis frames: floor((n - L) / S) + 1."""
    length = cfg.frame_len(rate)
    shift = cfg.frame_shift(rate)
    if n_samples < length:
        raise TooShortError(
            f"utterance of {n_samples} samples is shorter than one {length}-sample frame"
        )
    return (n_samples - length) // shift + 1


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_filters, fft_size, rate, fmin=0.0, fmax=None) -> np.ndarray:
    """Triangular mel filterbank, shape (n_filters, fft_size//2 + 1).

    Triangle corners sit at n_filters + 2 points equally spaced on the HTK
    mel scale; weights are evaluated at the continuous bin frequencies.
    """
    if fmax is None:
        fmax = rate / 2.0
    if not 0 <= fmin < fmax <= rate / 2.0 + 1e-9:
        raise InvalidInputError(f"need 0 <= fmin < fmax <= rate/2, got {fmin}/{fmax}")
    corners = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_filters + 2))
    bin_freqs = np.arange(fft_size // 2 + 1) * (rate / fft_size)
    bank = np.zeros((n_filters, bin_freqs.size))
    for j in range(n_filters):
        lo, mid, hi = corners[j], corners[j + 1], corners[j + 2]
        rising = (bin_freqs - lo) / (mid - lo)
        falling = (hi - bin_freqs) / (hi - mid)
        bank[j] = np.maximum(0.0, np.minimum(rising, falling))
    return bank


def compute_deltas(coeffs: np.ndarray, half_width: int = 2) -> np.ndarray:
    """Regression deltas over +-half_width frames with edge replication."""
    w = int(half_width)
    padded = np.pad(coeffs, ((w, w), (0, 0)), mode="edge")
    denom = 2.0 * sum(tau * tau for tau in range(1, w + 1))
    n = coeffs.shape[0]
    delta = np.zeros_like(coeffs)
    for tau in range(1, w + 1):
        delta += tau * (padded[w + tau : w + tau + n] - padded[w - tau : w - tau + n])
    return delta / denom


def extract_mfcc(utt: Utterance, fcfg: FrameConfig, mcfg: MfccConfig) -> FeatureMatrix:
    """MFCC-family features for one utterance.

    Raises :class:`TooShortError` if the signal yields fewer than
    ``1 + 2 * delta_window`` frames (deltas need that much context) and
    :class:`InvalidInputError` on non-finite samples.
    """
    x = utt.samples
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("utterance contains non-finite samples")
    rate = utt.sample_rate
    length = fcfg.frame_len(rate)
    shift = fcfg.frame_shift(rate)
    if mcfg.fft_size < length:
        raise InvalidInputError(
            f"fft_size {mcfg.fft_size} smaller than frame length {length} samples"
        )
    n_frames = frame_count(x.shape[0], fcfg, rate)
    min_frames = 1 + 2 * mcfg.delta_window
    if n_frames < min_frames:
        raise TooShortError(
            f"got {n_frames} frames but deltas need at least {min_frames}"
        )

    emphasized = np.concatenate(([x[0]], x[1:] - mcfg.pre_emphasis * x[:-1]))
    frames = np.lib.stride_tricks.sliding_window_view(emphasized, length)[::shift][:n_frames]
    windowed = frames * np.hamming(length)

    log_energy = np.log(np.sum(np.square(windowed), axis=1) + LOG_FLOOR)
    power = np.square(np.abs(np.fft.rfft(windowed, n=mcfg.fft_size, axis=1)))
    bank = mel_filterbank(mcfg.n_mel_filters, mcfg.fft_size, rate, mcfg.mel_fmin, mcfg.mel_fmax)
    log_mel = np.log(power @ bank.T + LOG_FLOOR)
    cepstra = dct(log_mel, type=2, norm="ortho", axis=1)[:, : mcfg.n_cepstra]
    if mcfg.replace_c0_with_log_energy:
        cepstra[:, 0] = log_energy

    blocks = [cepstra]
    for _ in range(mcfg.delta_order):
        blocks.append(compute_deltas(blocks[-1], mcfg.delta_window))
    data = np.hstack(blocks)
    return FeatureMatrix(data, np.arange(n_frames), source_id=utt.id)


def save_features(fm: FeatureMatrix, path) -> None:
    """Write the binary feature-cache format (f32 data + u32 frame indices)."""
    rows, cols = fm.data.shape
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<III", FEATURE_VERSION, rows, cols))
        fh.write(fm.data.astype("<f4").tobytes(order="C"))
        fh.write(fm.frame_indices.astype("<u4").tobytes(order="C"))


def load_features(path, source_id: str = "") -> FeatureMatrix:
    """Read a feature-cache file written by :func:`save_features`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != FEATURE_MAGIC:
        raise AudioFormatError(f"{path}: not a feature cache file (bad magic)")
    version, rows, cols = struct.unpack_from("<III", blob, 8)
    if version != FEATURE_VERSION:
        raise AudioFormatError(f"{path}: unsupported feature file version {version}")
    offset = 8 + 12
    data_bytes = rows * cols * 4
    expected = offset + data_bytes + rows * 4
    if len(blob) != expected:
        raise AudioFormatError(f"{path}: truncated feature file ({len(blob)} != {expected} bytes)")
    data = np.frombuffer(blob, dtype="<f4", count=rows * cols, offset=offset)
    idx = np.frombuffer(blob, dtype="<u4", count=rows, offset=offset + data_bytes)
    return FeatureMatrix(
        data.astype(np.float64).reshape(rows, cols),
        idx.astype(np.int64),
        source_id=source_id,
    )
