"""Deterministic synthetic signals: noise generators and a toy speaker corpus.

The corpus generator produces distinct "speakers" as white noise shaped by a
randomly drawn 4-pole resonator bank (one frequency draw per speaker, jittered
per utterance), amplitude-modulated at 4 Hz to mimic syllabic energy swings.
That keeps the repository self-contained and legally clean while still giving
the verification back-ends something speaker-like to model.

All generators are pure functions of their seeds; identical seeds produce
identical sample streams (and therefore identical WAV bytes on disk).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .audio import Utterance, write_wav
from .exceptions import InvalidInputError

# One frequency is drawn per band, giving every synthetic speaker four
# formant-like resonances. Bands overlap so speakers stay confusable.
SPEECH_BANDS = ((250.0, 900.0), (800.0, 2200.0), (1800.0, 3200.0), (2800.0, 4200.0))
RESONATOR_RADIUS = 0.98
AM_RATE_HZ = 4.0
AM_DEPTH = 0.85

# Classic pole/zero cascade approximating a 1/f magnitude response
# (about -3 dB/octave through the speech band at 16 kHz).
_PINK_ZEROS = (0.98443604, 0.83392334, 0.07568359)
_PINK_POLES = (0.99572754, 0.94790649, 0.53567505)
_PINK_BURN_IN = 2048


def derive_rng(*entropy) -> np.random.Generator:
    """Seeded generator from a tuple of integers; stable across runs."""
    return np.random.default_rng(np.random.SeedSequence(list(entropy)))


def child_seed(seed: int, *keys: int) -> int:
    """Derive a 64-bit child seed from a base seed and index keys."""
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def white_noise(rng: np.random.Generator, n_samples: int) -> np.ndarray:
    """I.i.d. uniform(-1, 1) samples."""
    return rng.uniform(-1.0, 1.0, n_samples)


def pink_noise(rng: np.random.Generator, n_samples: int) -> np.ndarray:
    """White noise through the standard pole/zero 1/f approximation."""
    b = np.poly(_PINK_ZEROS)
    a = np.poly(_PINK_POLES)
    x = white_noise(rng, n_samples + _PINK_BURN_IN)
    y = lfilter(b, a, x)
    return y[_PINK_BURN_IN:]


def draw_resonator_freqs(rng: np.random.Generator) -> np.ndarray:
    """One resonance frequency per speech band."""
    return np.array([rng.uniform(lo, hi) for lo, hi in SPEECH_BANDS])


def resonator_bank_noise(rng, n_samples, rate, freqs, radius=RESONATOR_RADIUS):
    """White noise through a parallel bank of 2nd-order resonators.

    Each resonator has poles at ``radius * exp(+-i * 2*pi*f/rate)``; their
    outputs are summed. No normalization is applied here.
    """
    x = white_noise(rng, n_samples)
    y = np.zeros(n_samples)
    for f in np.asarray(freqs, dtype=np.float64):
        if not 0.0 < f < rate / 2.0:
            raise InvalidInputError(f"resonator frequency {f} outside (0, rate/2)")
        omega = 2.0 * np.pi * f / rate
        a = np.array([1.0, -2.0 * radius * np.cos(omega), radius * radius])
        y += lfilter([1.0 - radius], a, x)
    return y


def speech_like_samples(rng, n_samples, rate, freqs, am_depth=AM_DEPTH, peak=0.9):
    """Resonator-bank noise with a 4 Hz amplitude modulation, peak-normalized.

    The modulation phase is drawn from ``rng`` so repeated calls give the
    same spectral identity but different energy contours.
    """
    y = resonator_bank_noise(rng, n_samples, rate, freqs)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    t = np.arange(n_samples) / rate
    y *= 1.0 + am_depth * np.sin(2.0 * np.pi * AM_RATE_HZ * t + phase)
    return y * (peak / np.max(np.abs(y)))


def babble_noise(rng, n_samples, rate, n_streams=8, target_rms=0.1):
    """Sum of independent speech-like streams, normalized to a fixed RMS."""
    total = np.zeros(n_samples)
    for _ in range(n_streams):
        freqs = draw_resonator_freqs(rng)
        stream = speech_like_samples(rng, n_samples, rate, freqs, peak=1.0)
        total += stream / np.sqrt(np.mean(np.square(stream)))
    return total * (target_rms / np.sqrt(np.mean(np.square(total))))


@dataclass
class SynthCorpusSpec:
    """Parameters of the deterministic synthetic speaker corpus."""

    n_speakers: int
    utterances_per_speaker: int
    duration_s: float
    sample_rate: int = 16000
    seed: int = 0

    def __post_init__(self):
        if self.n_speakers < 1 or self.utterances_per_speaker < 1:
            raise InvalidInputError("speaker and utterance counts must be >= 1")
        if self.duration_s <= 0:
            raise InvalidInputError("duration_s must be positive")
        if self.sample_rate <= 0:
            raise InvalidInputError("sample_rate must be positive")


# Per-utterance resonator frequencies wobble around the speaker's draw.
UTTERANCE_JITTER = 0.02


def speaker_id(index: int) -> str:
    return f"spk{index:03d}"


def generate_synth_corpus(spec: SynthCorpusSpec, out_dir) -> dict:
    """Generate WAV files plus a manifest for a synthetic speaker corpus.

    Returns the manifest dict (also written to ``out_dir/manifest.json``):
    ``{"speakers": [{"id", "utterances": [relative paths]}],
    "sample_rate": int, "seed": int}``.
    """
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    n_samples = int(round(spec.duration_s * spec.sample_rate))
    speakers = []
    for s in range(spec.n_speakers):
        sid = speaker_id(s)
        freqs = draw_resonator_freqs(derive_rng(spec.seed, s))
        (root / sid).mkdir(exist_ok=True)
        utts = []
        for u in range(spec.utterances_per_speaker):
            rng = derive_rng(spec.seed, s, u)
            jitter = rng.uniform(-UTTERANCE_JITTER, UTTERANCE_JITTER, freqs.shape)
            samples = speech_like_samples(
                rng, n_samples, spec.sample_rate, freqs * (1.0 + jitter)
            )
            rel = f"{sid}/utt{u:03d}.wav"
            write_wav(Utterance(samples, spec.sample_rate, id=f"{sid}/utt{u:03d}"), root / rel)
            utts.append(rel)
        speakers.append({"id": sid, "utterances": utts})
    manifest = {
        "speakers": speakers,
        "sample_rate": spec.sample_rate,
        "seed": spec.seed,
    }
    write_manifest(manifest, root / "manifest.json")
    return manifest


def write_manifest(manifest: dict, path) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    manifest = json.loads(Path(path).read_text())
    for key in ("speakers", "sample_rate", "seed"):
        if key not in manifest:
            raise InvalidInputError(f"corpus manifest missing '{key}' field")
    return manifest
