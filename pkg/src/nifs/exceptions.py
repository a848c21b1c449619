"""Exception types raised across the package.

Everything derives from :class:`NifsError` so callers can catch the whole
family; most classes also derive from ``ValueError`` because they signal a
problem with caller-supplied data rather than internal state.
"""


class NifsError(Exception):
    """Base class for all errors raised by this package."""


class AudioFormatError(NifsError, ValueError):
    """Malformed or unsupported audio file (bad header, wrong codec/depth)."""


class UnsupportedLayoutError(AudioFormatError):
    """Audio file has a channel layout we refuse to handle (e.g. stereo)."""


class TooShortError(NifsError, ValueError):
    """Utterance is too short for the requested framing."""


class InvalidInputError(NifsError, ValueError):
    """Input violates a basic precondition (NaNs, rate mismatch, bad shape)."""


class DegenerateInputError(NifsError, ValueError):
    """Input is degenerate for the operation (e.g. zero-power signal)."""


class LengthError(NifsError, ValueError):
    """Noise shorter than the signal and looping was disallowed."""


class FrameCorrespondenceError(NifsError, ValueError):
    """Original and noisy feature matrices disagree on frame layout.

    This always indicates a framing bug upstream: mixing preserves length,
    so matched utterances must produce matched frame grids.
    """


class EmptySelectionError(NifsError, ValueError):
    """Per-constraint intersection came out empty.

    Attributes
    ----------
    subset_sizes : list of int
        Size of each per-constraint ranked subset, so the caller can judge
        how far from feasible the requested threshold was.
    """

    def __init__(self, message, subset_sizes=None):
        super().__init__(message)
        self.subset_sizes = list(subset_sizes) if subset_sizes is not None else []


class InsufficientDataError(NifsError, ValueError):
    """Not enough frames to train the requested model size."""


class DegenerateDataError(NifsError, ValueError):
    """Training data is degenerate (e.g. a zero-variance dimension)."""


class DegenerateTrialsError(NifsError, ValueError):
    """Trial set contains only one class; error rates are undefined."""


class ConsistencyError(NifsError, ValueError):
    """Cross-referenced artifacts disagree (index out of range, bad id)."""


class ConfigError(NifsError, ValueError):
    """Experiment configuration failed validation.

    Attributes
    ----------
    errors : list of str
        One entry per violated field, each prefixed with its field path.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(self.errors))


class StageError(NifsError, RuntimeError):
    """A pipeline stage failed; carries the stage name and offending item."""

    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"stage '{stage}': {message}")
