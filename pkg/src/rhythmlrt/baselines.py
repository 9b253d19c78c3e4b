"""Baseline drum-track representations: piano roll, note tuples, MIDI-Like.

These encoders work straight off the event list. Drum note durations are
arbitrary, so events without a NOTE_OFF fall back to a fixed 100 ms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .midi import DEFAULT_NOTE_DURATION, PitchMap, Track, default_pitch_map


@dataclass(frozen=True)
class PianoRoll:
    """Time x instrument velocity matrix sampled at ``frequency`` Hz."""

    data: np.ndarray
    frequency: float

    def __len__(self) -> int:
        return self.data.shape[0]


def encode_piano_roll(track: Track, frequency: float, n_instruments: int = 22) -> PianoRoll:
    """Sample the track at ``frequency`` Hz.

    A note spans rows ``floor(onset * f)`` up to (excluding)
    ``floor((onset + duration) * f)``; overlapping notes keep the loudest
    velocity per cell.
    """
    if frequency <= 0:
        raise ValueError("frequency must be positive")
    end = track.duration
    for event in track.events:
        duration = event.duration if event.duration is not None else DEFAULT_NOTE_DURATION
        end = max(end, event.onset + duration)
    rows = math.ceil(end * frequency)
    data = np.zeros((rows, n_instruments))
    for event in track.events:
        duration = event.duration if event.duration is not None else DEFAULT_NOTE_DURATION
        first = math.floor(event.onset * frequency)
        last = math.floor((event.onset + duration) * frequency)
        span = slice(first, min(last, rows))
        data[span, event.instrument] = np.maximum(data[span, event.instrument], event.velocity)
    return PianoRoll(data, frequency)


def encode_note_tuples(track: Track, n_instruments: int = 22) -> np.ndarray:
    """One row per note: instrument one-hot, velocity, duration, time-shift.

    Times are plain seconds. The time-shift is the onset distance to the
    previous note (zero for simultaneous notes); the first row's time-shift
    is its onset from track start, so absolute position survives.
    """
    data = np.zeros((len(track.events), n_instruments + 3))
    previous_onset = 0.0
    for row, event in enumerate(track.events):
        duration = event.duration if event.duration is not None else DEFAULT_NOTE_DURATION
        data[row, event.instrument] = 1.0
        data[row, n_instruments] = event.velocity
        data[row, n_instruments + 1] = duration
        data[row, n_instruments + 2] = event.onset - previous_onset
        previous_onset = event.onset
    return data


@dataclass(frozen=True)
class MidiLikeConfig:
    """Quantization for the MIDI-Like token stream. The defaults (32
    velocity bins, 10 ms shift quantum, 1 s maximum single shift) are
    written into every export header for reproducibility."""

    velocity_bins: int = 32
    time_quantum: float = 0.01
    max_shift: float = 1.0

    @property
    def max_shift_ticks(self) -> int:
        return round(self.max_shift / self.time_quantum)

    def snapshot(self) -> dict:
        return {
            "velocity_bins": self.velocity_bins,
            "time_quantum": self.time_quantum,
            "max_shift": self.max_shift,
        }


@dataclass(frozen=True)
class MidiLikeVocabulary:
    """Fixed token table: NOTE_ON and NOTE_OFF per mapped pitch, TIME_SHIFT
    per quantum multiple, SET_VELOCITY per bin."""

    pitches: tuple[int, ...]
    config: MidiLikeConfig = field(default_factory=MidiLikeConfig)

    @property
    def size(self) -> int:
        return 2 * len(self.pitches) + self.max_shift_ticks + self.config.velocity_bins

    @property
    def max_shift_ticks(self) -> int:
        return self.config.max_shift_ticks

    def note_on(self, pitch: int) -> int:
        return self.pitches.index(pitch)

    def note_off(self, pitch: int) -> int:
        return len(self.pitches) + self.pitches.index(pitch)

    def time_shift(self, ticks: int) -> int:
        if not 1 <= ticks <= self.max_shift_ticks:
            raise ValueError(f"time shift of {ticks} ticks outside [1, {self.max_shift_ticks}]")
        return 2 * len(self.pitches) + ticks - 1

    def set_velocity(self, bin_index: int) -> int:
        return 2 * len(self.pitches) + self.max_shift_ticks + bin_index

    def describe(self, token: int) -> str:
        count = len(self.pitches)
        if token < count:
            return f"NOTE_ON({self.pitches[token]})"
        if token < 2 * count:
            return f"NOTE_OFF({self.pitches[token - count]})"
        if token < 2 * count + self.max_shift_ticks:
            ticks = token - 2 * count + 1
            return f"TIME_SHIFT({ticks * self.config.time_quantum:.2f}s)"
        if token < self.size:
            return f"SET_VELOCITY({token - 2 * count - self.max_shift_ticks})"
        raise ValueError(f"token {token} outside vocabulary of size {self.size}")


@dataclass(frozen=True)
class TokenSeq:
    tokens: np.ndarray  # int32
    vocabulary: MidiLikeVocabulary

    def __len__(self) -> int:
        return len(self.tokens)

    def describe(self) -> list[str]:
        return [self.vocabulary.describe(int(t)) for t in self.tokens]


def encode_midilike(
    track: Track,
    config: MidiLikeConfig | None = None,
    pitch_map: PitchMap | None = None,
) -> TokenSeq:
    """Event-stream tokenization of a track.

    Emits, in chronological order: TIME_SHIFT tokens covering each
    quantized gap (split at the maximum single shift), SET_VELOCITY when
    the velocity bin changes, then NOTE_ON; NOTE_OFF tokens are interleaved
    at ``onset + duration``. At equal times NOTE_OFFs precede NOTE_ONs.
    """
    config = config or MidiLikeConfig()
    if pitch_map is None:
        pitch_map = default_pitch_map()
    vocabulary = MidiLikeVocabulary(pitch_map.pitches, config)

    timeline = []  # (time, off-before-on order, pitch, velocity_raw or None)
    for event in track.events:
        duration = event.duration if event.duration is not None else DEFAULT_NOTE_DURATION
        timeline.append((event.onset, 1, event.pitch, event.velocity_raw))
        timeline.append((event.onset + duration, 0, event.pitch, None))
    timeline.sort(key=lambda item: (item[0], item[1]))

    tokens: list[int] = []
    current_tick = 0
    current_bin = None
    for time, _, pitch, velocity_raw in timeline:
        tick = round(time / config.time_quantum)
        gap = tick - current_tick
        while gap > 0:
            step = min(gap, vocabulary.max_shift_ticks)
            tokens.append(vocabulary.time_shift(step))
            gap -= step
        current_tick = tick
        if velocity_raw is None:
            tokens.append(vocabulary.note_off(pitch))
        else:
            bin_index = velocity_raw * config.velocity_bins // 128
            if bin_index != current_bin:
                tokens.append(vocabulary.set_velocity(bin_index))
                current_bin = bin_index
            tokens.append(vocabulary.note_on(pitch))
    return TokenSeq(np.asarray(tokens, dtype=np.int32), vocabulary)
