"""PCM audio I/O.

The reference format throughout the package is 16 kHz mono WAV. Files are
read as RIFF/WAVE with either 16-bit PCM or 32-bit IEEE float samples; any
other layout is rejected rather than silently converted, because resampling
or downmixing behind the caller's back would corrupt downstream SNR math.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile

from .exceptions import AudioFormatError, InvalidInputError, UnsupportedLayoutError

# 16-bit scaling uses 32768 (not 32767) so that -1.0 is exactly representable.
PCM16_SCALE = 32768.0


@dataclass
class Utterance:
    """A mono PCM signal: samples in nominal [-1, 1] plus its sample rate.

    Samples are stored as a read-only float64 array; treat instances as
    immutable so they can be shared freely across threads.
    """

    samples: np.ndarray
    sample_rate: int
    id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise InvalidInputError("utterance samples must be a non-empty 1-D sequence")
        if self.sample_rate <= 0:
            raise InvalidInputError(f"sample_rate must be positive, got {self.sample_rate}")
        samples = samples.copy()
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate

    def power(self) -> float:
        """Mean square amplitude over the full length."""
        return float(np.mean(np.square(self.samples)))

    def with_samples(self, samples, id=None) -> "Utterance":
        """New utterance sharing this one's rate (and id unless overridden)."""
        return Utterance(samples, self.sample_rate, self.id if id is None else id)


def read_wav(path, id: str | None = None) -> Utterance:
    """Read a mono WAV file into an :class:`Utterance`.

    16-bit PCM samples are scaled by 1/32768; 32-bit float samples are taken
    as-is. Raises :class:`AudioFormatError` for malformed or unsupported
    files and :class:`UnsupportedLayoutError` for multichannel audio.
    """
    path = str(path)
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:  # scipy raises plain ValueError on bad headers
        raise AudioFormatError(f"{path}: not a readable RIFF/WAVE file ({exc})") from exc
    if data.ndim != 1:
        raise UnsupportedLayoutError(
            f"{path}: expected mono audio, got {data.shape[1]} channels (no silent downmix)"
        )
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise AudioFormatError(
            f"{path}: unsupported sample format {data.dtype}; "
            "expected 16-bit PCM or 32-bit IEEE float"
        )
    return Utterance(samples, int(rate), id if id is not None else path)


def write_wav(utt: Utterance, path) -> int:
    """Write an utterance as 16-bit PCM mono WAV.

    Samples must be finite. Values outside [-1, 1] are clipped; the number
    of clipped samples is returned so callers can report it.
    """
    samples = np.asarray(utt.samples, dtype=np.float64)
    if not np.all(np.isfinite(samples)):
        raise InvalidInputError("cannot write non-finite samples")
    n_clipped = int(np.count_nonzero((samples < -1.0) | (samples > 1.0)))
    clipped = np.clip(samples, -1.0, 1.0)
    # round-half-away from zero is irrelevant here; banker's rounding via
    # np.round keeps the round-trip error within 1/32768 either way
    pcm = np.clip(np.round(clipped * PCM16_SCALE), -32768, 32767).astype(np.int16)
    wavfile.write(str(path), int(utt.sample_rate), pcm)
    return n_clipped


def wav_bytes(utt: Utterance) -> bytes:
    """Serialize to 16-bit PCM WAV bytes without touching disk."""
    samples = np.clip(utt.samples, -1.0, 1.0)
    pcm = np.clip(np.round(samples * PCM16_SCALE), -32768, 32767).astype(np.int16)
    buf = io.BytesIO()
    wavfile.write(buf, int(utt.sample_rate), pcm)
    return buf.getvalue()
