"""Drum MIDI ingestion.

Reads Standard MIDI Files (format 0 or 1) into timestamped drum events,
builds the measure grid from the tempo map, groups near-simultaneous hits
into clusters and assigns clusters to measures. A minimal writer is
provided so synthetic tracks can round-trip through real files.

Only onsets matter for rhythm parsing; NOTE_OFF events are kept as
per-note durations because the piano-roll and note-tuple encoders use
them.
"""

from __future__ import annotations

import bisect
import logging
import struct
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import (
    MidiFormatError,
    TempoChangeError,
    UnknownPitchError,
    UnsupportedTimeSignatureError,
)

log = logging.getLogger(__name__)

DEFAULT_CLUSTER_THRESHOLD = 0.030  # seconds; perceptual simultaneity limit
DEFAULT_NOTE_DURATION = 0.1  # seconds; drum note lengths are arbitrary
DEFAULT_TEMPO_USPQ = 500_000  # microseconds per quarter at 120 BPM

_MTHD = b"MThd"
_MTRK = b"MTrk"


@dataclass(frozen=True)
class DrumEvent:
    """One drum hit. ``velocity`` is ``velocity_raw / 127``; ``duration`` is
    the NOTE_OFF distance in seconds when the file provides one."""

    onset: float
    pitch: int
    instrument: int
    velocity_raw: int
    velocity: float
    duration: float | None = None

    @classmethod
    def from_raw(cls, onset, pitch, instrument, velocity_raw, duration=None):
        return cls(onset, pitch, instrument, velocity_raw, velocity_raw / 127.0, duration)


@dataclass(frozen=True)
class PitchMap:
    """Bijection from MIDI pitches to instrument indices ``[0, n)``."""

    entries: tuple[tuple[int, int, str], ...]  # (pitch, index, name)

    def __post_init__(self):
        indices = sorted(index for _, index, _ in self.entries)
        if indices != list(range(len(self.entries))):
            raise ValueError(f"pitch map indices must be a bijection onto [0, {len(self.entries)})")
        pitches = [pitch for pitch, _, _ in self.entries]
        if len(set(pitches)) != len(pitches):
            raise ValueError("duplicate pitch in pitch map")

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def by_pitch(self) -> dict[int, int]:
        return {pitch: index for pitch, index, _ in self.entries}

    def index_of(self, pitch: int) -> int | None:
        return self.by_pitch.get(pitch)

    def name_of(self, index: int) -> str:
        for _, idx, name in self.entries:
            if idx == index:
                return name
        raise KeyError(index)

    @property
    def pitches(self) -> tuple[int, ...]:
        return tuple(sorted(pitch for pitch, _, _ in self.entries))

    @classmethod
    def from_text(cls, text: str) -> "PitchMap":
        entries = []
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise ValueError(f"pitch map line {line_no}: expected 'pitch,index,name'")
            entries.append((int(parts[0]), int(parts[1]), parts[2]))
        return cls(tuple(entries))


def load_pitch_map(path) -> PitchMap:
    with open(path, "r", encoding="utf-8") as handle:
        return PitchMap.from_text(handle.read())


def default_pitch_map() -> PitchMap:
    """The 22-instrument Groove MIDI Dataset kit."""
    text = resources.files("rhythmlrt.data").joinpath("gmd_pitch_map.csv").read_text("utf-8")
    return PitchMap.from_text(text)


@dataclass(frozen=True)
class MeasureGrid:
    """Contiguous measures: ``start[k+1] == start[k] + duration[k]``."""

    measures: tuple[tuple[float, float], ...]  # (start, duration) in seconds
    time_signature: tuple[int, int]
    tempo_map: tuple[tuple[float, int], ...]  # (time in seconds, us per quarter)

    def __len__(self) -> int:
        return len(self.measures)

    @property
    def starts(self) -> tuple[float, ...]:
        return tuple(start for start, _ in self.measures)

    @property
    def end(self) -> float:
        start, duration = self.measures[-1]
        return start + duration

    def measure_of(self, time: float) -> int:
        """Index of the measure containing ``time`` (half-open intervals)."""
        index = bisect.bisect_right(self.starts, time) - 1
        if index < 0 or time >= self.end:
            raise ValueError(f"time {time} outside grid [0, {self.end})")
        return index


@dataclass(frozen=True)
class TrackMetadata:
    style: str | None = None
    bpm: float | None = None
    source: str = ""


@dataclass(frozen=True)
class Track:
    """Sorted drum events plus the measure grid they live on."""

    events: tuple[DrumEvent, ...]
    grid: MeasureGrid
    metadata: TrackMetadata = field(default_factory=TrackMetadata)

    def __post_init__(self):
        keys = [(e.onset, e.instrument) for e in self.events]
        if keys != sorted(keys):
            raise ValueError("track events must be sorted by (onset, instrument)")

    @property
    def duration(self) -> float:
        return self.grid.end

    @property
    def bpm(self) -> float:
        if self.metadata.bpm:
            return self.metadata.bpm
        return 60_000_000 / self.grid.tempo_map[0][1]


@dataclass(frozen=True)
class Cluster:
    """Hits within the simultaneity threshold, merged into one rhythm event.

    ``velocity_by_instrument[i]`` is the loudest velocity of instrument ``i``
    in the cluster, 0.0 where the instrument is absent.
    """

    onset: float
    members: tuple[DrumEvent, ...]
    velocity_by_instrument: np.ndarray

    def __post_init__(self):
        if not self.members:
            raise ValueError("cluster must have at least one member")


# ---------------------------------------------------------------------------
# Standard MIDI File reading


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def need(self, count: int, what: str):
        if self.pos + count > len(self.data):
            raise MidiFormatError(f"truncated file while reading {what}", self.pos)

    def read(self, count: int, what: str) -> bytes:
        self.need(count, what)
        chunk = self.data[self.pos:self.pos + count]
        self.pos += count
        return chunk

    def u8(self, what: str) -> int:
        return self.read(1, what)[0]

    def u16(self, what: str) -> int:
        return struct.unpack(">H", self.read(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack(">I", self.read(4, what))[0]

    def varlen(self, what: str) -> int:
        value = 0
        for _ in range(4):
            byte = self.u8(what)
            value = (value << 7) | (byte & 0x7F)
            if not byte & 0x80:
                return value
        raise MidiFormatError(f"variable-length {what} longer than 4 bytes", self.pos)


@dataclass
class _RawNote:
    tick: int
    pitch: int
    velocity: int
    off_tick: int | None = None


def _read_track_chunk(reader: _Reader, notes, tempos, timesigs):
    """Read one MTrk chunk, appending raw note on/offs and meta events."""
    magic = reader.read(4, "chunk id")
    if magic != _MTRK:
        raise MidiFormatError(f"expected MTrk chunk, found {magic!r}", reader.pos - 4)
    length = reader.u32("track length")
    end = reader.pos + length
    reader.need(length, "track data")
    tick = 0
    status = None
    open_notes: dict[int, list[_RawNote]] = {}
    while reader.pos < end:
        tick += reader.varlen("delta time")
        first = reader.u8("event status")
        if first < 0x80:
            if status is None:
                raise MidiFormatError("data byte with no running status", reader.pos - 1)
            reader.pos -= 1
        else:
            status = first
        if status == 0xFF:
            meta_type = reader.u8("meta type")
            meta_len = reader.varlen("meta length")
            payload = reader.read(meta_len, "meta payload")
            if meta_type == 0x51 and meta_len == 3:
                tempos.append((tick, int.from_bytes(payload, "big")))
            elif meta_type == 0x58 and meta_len >= 2:
                timesigs.append((tick, payload[0], 1 << payload[1]))
            status = None
        elif status in (0xF0, 0xF7):
            sysex_len = reader.varlen("sysex length")
            reader.read(sysex_len, "sysex payload")
            status = None
        else:
            kind = status & 0xF0
            if kind in (0x80, 0x90, 0xA0, 0xB0, 0xE0):
                d1 = reader.u8("event data")
                d2 = reader.u8("event data")
            elif kind in (0xC0, 0xD0):
                d1 = reader.u8("event data")
                d2 = 0
            else:
                raise MidiFormatError(f"unknown status byte 0x{status:02x}", reader.pos - 1)
            if kind == 0x90 and d2 > 0:
                note = _RawNote(tick, d1, d2)
                notes.append(note)
                open_notes.setdefault(d1, []).append(note)
            elif kind == 0x80 or (kind == 0x90 and d2 == 0):
                pending = open_notes.get(d1)
                if pending:
                    pending.pop(0).off_tick = tick
    if reader.pos != end:
        raise MidiFormatError("track events overran the declared chunk length", reader.pos)


def _ticks_to_seconds_table(tempos, ticks_per_quarter):
    """Cumulative (tick, seconds, us_per_quarter) conversion segments."""
    tempos = sorted(tempos)
    if not tempos or tempos[0][0] > 0:
        tempos = [(0, DEFAULT_TEMPO_USPQ)] + tempos
    segments = []
    seconds = 0.0
    prev_tick, prev_uspq = tempos[0]
    segments.append((prev_tick, seconds, prev_uspq))
    for tick, uspq in tempos[1:]:
        seconds += (tick - prev_tick) * prev_uspq / (ticks_per_quarter * 1e6)
        segments.append((tick, seconds, uspq))
        prev_tick, prev_uspq = tick, uspq
    return segments


def _tick_to_seconds(tick, segments, ticks_per_quarter):
    base_tick, base_sec, uspq = segments[0]
    for seg in segments:
        if seg[0] <= tick:
            base_tick, base_sec, uspq = seg
        else:
            break
    return base_sec + (tick - base_tick) * uspq / (ticks_per_quarter * 1e6)


def read_midi_file(
    data: bytes,
    pitch_map: PitchMap | None = None,
    *,
    unknown_pitch: str = "strict",
    default_tempo_bpm: float = 120.0,
    cluster_threshold: float = DEFAULT_CLUSTER_THRESHOLD,
    source: str = "",
    style: str | None = None,
) -> Track:
    """Parse a format 0/1 Standard MIDI File into a :class:`Track`.

    NOTE_ON events with positive velocity become drum events; their pitch is
    mapped to an instrument index through ``pitch_map``. ``unknown_pitch``
    selects what happens to unmapped pitches: ``"strict"`` raises,
    ``"drop"`` discards the event with a warning.
    """
    if pitch_map is None:
        pitch_map = default_pitch_map()
    if unknown_pitch not in ("strict", "drop"):
        raise ValueError("unknown_pitch must be 'strict' or 'drop'")
    reader = _Reader(data)
    magic = reader.read(4, "file header")
    if magic != _MTHD:
        raise MidiFormatError(f"not a Standard MIDI File (header {magic!r})", 0)
    header_len = reader.u32("header length")
    if header_len < 6:
        raise MidiFormatError(f"header chunk too short ({header_len} bytes)", reader.pos - 4)
    fmt = reader.u16("format")
    ntrks = reader.u16("track count")
    division = reader.u16("division")
    reader.read(header_len - 6, "header padding")
    if fmt not in (0, 1):
        raise MidiFormatError(f"unsupported SMF format {fmt}", 8)
    if division & 0x8000:
        raise MidiFormatError("SMPTE time division is not supported", 12)
    if division == 0:
        raise MidiFormatError("time division of zero", 12)

    notes: list[_RawNote] = []
    tempos: list[tuple[int, int]] = []
    timesigs: list[tuple[int, int, int]] = []
    for _ in range(ntrks):
        _read_track_chunk(reader, notes, tempos, timesigs)

    if not tempos:
        tempos = [(0, round(60_000_000 / default_tempo_bpm))]
    segments = _ticks_to_seconds_table(tempos, division)

    time_signature = (4, 4)
    if timesigs:
        _, num, den = sorted(timesigs)[0]
        time_signature = (num, den)

    events = []
    dropped = 0
    for note in notes:
        instrument = pitch_map.index_of(note.pitch)
        if instrument is None:
            if unknown_pitch == "strict":
                raise UnknownPitchError(f"pitch {note.pitch} is not in the pitch map")
            dropped += 1
            continue
        onset = _tick_to_seconds(note.tick, segments, division)
        duration = None
        if note.off_tick is not None:
            duration = _tick_to_seconds(note.off_tick, segments, division) - onset
        events.append(DrumEvent.from_raw(onset, note.pitch, instrument, note.velocity, duration))
    if dropped:
        log.warning("dropped %d events with unmapped pitches from %s", dropped, source or "<bytes>")
    events.sort(key=lambda e: (e.onset, e.instrument))

    tempo_map = tuple(
        (_tick_to_seconds(tick, segments, division), uspq) for tick, uspq in sorted(tempos)
    )
    grid = _build_grid(
        last_onset=events[-1].onset if events else None,
        tempo_map=tempo_map,
        time_signature=time_signature,
    )
    bpm = 60_000_000 / tempo_map[0][1]
    return Track(tuple(events), grid, TrackMetadata(style=style, bpm=bpm, source=source))


# ---------------------------------------------------------------------------
# Measure grid


def _build_grid(last_onset, tempo_map, time_signature) -> MeasureGrid:
    if time_signature != (4, 4):
        num, den = time_signature
        raise UnsupportedTimeSignatureError(f"only 4/4 is supported, got {num}/{den}")
    if not tempo_map:
        raise ValueError("tempo map must not be empty")
    boundary_eps = 1e-9
    measures = []
    start = 0.0
    while True:
        uspq = tempo_map[0][1]
        for time, value in tempo_map:
            if time <= start + boundary_eps:
                uspq = value
            else:
                break
        duration = 4 * uspq / 1e6
        for time, _ in tempo_map:
            if start + boundary_eps < time < start + duration - boundary_eps:
                raise TempoChangeError(
                    f"tempo change at {time:.6f}s falls inside measure [{start:.6f}, "
                    f"{start + duration:.6f})"
                )
        measures.append((start, duration))
        start = start + duration
        if last_onset is None or last_onset < start:
            break
    return MeasureGrid(tuple(measures), time_signature, tuple(tempo_map))


def build_measure_grid(track: Track, time_signature: tuple[int, int] = (4, 4)) -> MeasureGrid:
    """Measure grid covering every event of ``track`` (half-open measures,
    final partial measure padded to full length)."""
    last = track.events[-1].onset if track.events else None
    return _build_grid(last, track.grid.tempo_map, time_signature)


# ---------------------------------------------------------------------------
# Clustering and segmentation


def cluster_events(
    events,
    cluster_threshold: float = DEFAULT_CLUSTER_THRESHOLD,
    n_instruments: int | None = None,
) -> list[Cluster]:
    """Greedy left-to-right grouping of sorted events into clusters.

    An event joins the open cluster iff its onset lies within
    ``cluster_threshold`` of the cluster's earliest onset.
    """
    if cluster_threshold < 0:
        raise ValueError("cluster_threshold must be >= 0")
    events = list(events)
    if n_instruments is None:
        n_instruments = 1 + max((e.instrument for e in events), default=-1)
    clusters: list[Cluster] = []
    group: list[DrumEvent] = []
    for event in events:
        if group and event.onset - group[0].onset > cluster_threshold:
            clusters.append(_finish_cluster(group, n_instruments))
            group = []
        group.append(event)
    if group:
        clusters.append(_finish_cluster(group, n_instruments))
    return clusters


def _finish_cluster(group, n_instruments) -> Cluster:
    velocities = np.zeros(n_instruments)
    for event in group:
        if event.instrument >= n_instruments:
            raise ValueError(f"instrument {event.instrument} outside [0, {n_instruments})")
        velocities[event.instrument] = max(velocities[event.instrument], event.velocity)
    return Cluster(group[0].onset, tuple(group), velocities)


@dataclass(frozen=True)
class MeasureClusters:
    """Clusters of one measure with onsets re-expressed as bar fractions."""

    index: int
    clusters: tuple[Cluster, ...]
    fractions: tuple[float, ...]


def segment_into_measures(clusters, grid: MeasureGrid) -> list[MeasureClusters]:
    """Assign each cluster to its measure and compute onset fractions.

    Returns one entry per grid measure (empty measures included). Boundary
    onsets belong to the later measure.
    """
    per_measure: list[list[Cluster]] = [[] for _ in range(len(grid))]
    for cluster in clusters:
        per_measure[grid.measure_of(cluster.onset)].append(cluster)
    out = []
    limit = np.nextafter(1.0, 0.0)
    for index, (start, duration) in enumerate(grid.measures):
        members = per_measure[index]
        fractions = tuple(
            min((c.onset - start) / duration, limit) for c in members
        )
        out.append(MeasureClusters(index, tuple(members), fractions))
    return out


def track_measures(track: Track, cluster_threshold: float = DEFAULT_CLUSTER_THRESHOLD,
                   n_instruments: int | None = None) -> list[MeasureClusters]:
    """Cluster a track's events and segment them into measures."""
    clusters = cluster_events(track.events, cluster_threshold, n_instruments)
    return segment_into_measures(clusters, track.grid)


# ---------------------------------------------------------------------------
# Minimal writer (round-trip support for synthetic tracks)


def _encode_varlen(value: int) -> bytes:
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(chunks))


def write_midi_file(track: Track, ticks_per_quarter: int = 480) -> bytes:
    """Serialize a track as a minimal format-0 SMF.

    Onsets survive a write/read round trip to within one MIDI tick.
    """
    tempo_map = track.grid.tempo_map
    uspq = tempo_map[0][1]
    num, den = track.grid.time_signature

    def to_tick(seconds: float) -> int:
        return round(seconds * 1e6 * ticks_per_quarter / uspq)

    messages: list[tuple[int, int, bytes]] = []  # (tick, order, payload)
    messages.append((0, 0, bytes([0xFF, 0x58, 0x04, num, den.bit_length() - 1, 24, 8])))
    messages.append((0, 0, bytes([0xFF, 0x51, 0x03]) + uspq.to_bytes(3, "big")))
    for event in track.events:
        on_tick = to_tick(event.onset)
        duration = event.duration if event.duration is not None else DEFAULT_NOTE_DURATION
        off_tick = max(on_tick + 1, to_tick(event.onset + duration))
        messages.append((on_tick, 2, bytes([0x99, event.pitch, event.velocity_raw])))
        messages.append((off_tick, 1, bytes([0x89, event.pitch, 0])))
    messages.sort(key=lambda m: (m[0], m[1]))

    body = bytearray()
    previous = 0
    for tick, _, payload in messages:
        body += _encode_varlen(tick - previous)
        body += payload
        previous = tick
    body += _encode_varlen(0) + bytes([0xFF, 0x2F, 0x00])

    header = struct.pack(">4sIHHH", _MTHD, 6, 0, 1, ticks_per_quarter)
    chunk = struct.pack(">4sI", _MTRK, len(body)) + bytes(body)
    return header + chunk
