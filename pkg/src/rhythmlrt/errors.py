"""Exception hierarchy shared across the package.

Everything raised on malformed input or impossible requests derives from
:class:`RhythmlrtError`, so callers (and the CLI) can separate domain errors
from genuine bugs.
"""


class RhythmlrtError(Exception):
    """Base class for all domain errors raised by this package."""


class MidiFormatError(RhythmlrtError):
    """Malformed Standard MIDI File. Carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnknownPitchError(RhythmlrtError):
    """A NOTE_ON pitch is absent from the pitch map (strict mode only)."""


class UnsupportedTimeSignatureError(RhythmlrtError):
    """Only 4/4 measure grids are supported."""


class TempoChangeError(RhythmlrtError):
    """A tempo change falls strictly inside a measure."""


class GrammarError(RhythmlrtError):
    """Base class for grammar problems."""


class GrammarParseError(GrammarError):
    """Malformed grammar text. Carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CyclicGrammarError(GrammarError):
    """The division graph contains a cycle, so derivations never bottom out."""


class UnparseableMeasureError(RhythmlrtError):
    """No derivation covers a measure. Carries the offending interval/onsets."""

    def __init__(self, message: str, interval=None, onsets=None, measure_index=None):
        super().__init__(message)
        self.interval = interval
        self.onsets = tuple(onsets) if onsets is not None else ()
        self.measure_index = measure_index


class TrackParseError(RhythmlrtError):
    """One or more measures of a track failed to parse. Carries the report."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class SimplificationError(RhythmlrtError):
    """A parse-tree node has no entry in the simplified rule vocabulary."""


class EncodingError(RhythmlrtError):
    """A representation could not be built from the given tree or track."""


class ExportError(RhythmlrtError):
    """A binary export container is malformed or fails its checksum."""


class DatasetError(RhythmlrtError):
    """Corpus metadata is missing or inconsistent."""
