"""Corpus handling: metadata index, filters, chunking and synthetic fixtures.

The index format follows the Groove MIDI Dataset ``info.csv`` layout.
Filtering keeps metronome-played 4/4 beats in the four best-represented
styles; splits are always taken from the file, never recomputed.

Synthetic fixtures generate small multi-bar drum tracks from per-style
grid templates with bounded timing jitter, so the whole pipeline can be
exercised without the real corpus download.
"""

from __future__ import annotations

import csv
import io
import math
import random
import statistics
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from .errors import DatasetError
from .midi import (
    DrumEvent,
    MeasureGrid,
    PitchMap,
    Track,
    TrackMetadata,
    default_pitch_map,
    write_midi_file,
)

REQUIRED_COLUMNS = (
    "id",
    "style",
    "bpm",
    "beat_type",
    "time_signature",
    "midi_filename",
    "duration",
    "split",
)

DEFAULT_STYLES = ("funk", "jazz", "latin", "rock")


@dataclass(frozen=True)
class TrackRecord:
    track_id: str
    midi_path: str
    style_raw: str
    bpm: float
    beat_type: str
    time_signature: str
    split: str
    duration: float
    drummer: str = ""
    session: str = ""

    @property
    def style(self) -> str:
        """Primary style: the raw label truncated at the first '/'."""
        return self.style_raw.split("/", 1)[0]


@dataclass(frozen=True)
class DatasetIndex:
    records: tuple[TrackRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def split(self, name: str) -> tuple[TrackRecord, ...]:
        return tuple(r for r in self.records if r.split == name)

    def style_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for record in self.records:
            counts[record.style] = counts.get(record.style, 0) + 1
        return dict(sorted(counts.items()))

    @property
    def total_duration(self) -> float:
        return sum(r.duration for r in self.records)


def load_gmd_index(text: str) -> DatasetIndex:
    """Parse an ``info.csv`` document into a :class:`DatasetIndex`."""
    reader = csv.DictReader(io.StringIO(text))
    columns = reader.fieldnames or []
    for required in REQUIRED_COLUMNS:
        if required not in columns:
            raise DatasetError(f"index is missing required column {required!r}")
    records = []
    for row in reader:
        records.append(
            TrackRecord(
                track_id=row["id"],
                midi_path=row["midi_filename"],
                style_raw=row["style"],
                bpm=float(row["bpm"]),
                beat_type=row["beat_type"],
                time_signature=row["time_signature"],
                split=row["split"],
                duration=float(row["duration"]),
                drummer=row.get("drummer", ""),
                session=row.get("session", ""),
            )
        )
    return DatasetIndex(tuple(records))


def load_gmd_index_file(path) -> DatasetIndex:
    with open(path, "r", encoding="utf-8") as handle:
        return load_gmd_index(handle.read())


@dataclass(frozen=True)
class FilterCriteria:
    beat_type: str = "beat"
    time_signature: str = "4-4"
    styles: tuple[str, ...] = DEFAULT_STYLES


@dataclass
class FilterReport:
    """Removal counts per criterion, in application order."""

    removed: dict[str, int] = field(default_factory=dict)
    parse_failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def total_removed(self) -> int:
        return sum(self.removed.values())


def filter_tracks(
    index: DatasetIndex,
    criteria: FilterCriteria | None = None,
    parse_check=None,
) -> tuple[DatasetIndex, FilterReport]:
    """Apply the corpus filters in order, counting removals per criterion.

    ``parse_check``, when given, is called with each surviving record and
    must return True for parseable tracks; failures are recorded in the
    report with the failure text.
    """
    criteria = criteria or FilterCriteria()
    report = FilterReport()
    kept = list(index.records)

    def apply(name: str, predicate):
        nonlocal kept
        survivors = [r for r in kept if predicate(r)]
        report.removed[name] = len(kept) - len(survivors)
        kept = survivors

    apply("beat_type", lambda r: r.beat_type == criteria.beat_type)
    apply("time_signature", lambda r: r.time_signature == criteria.time_signature)
    apply("style", lambda r: r.style in criteria.styles)
    if parse_check is not None:
        survivors = []
        for record in kept:
            try:
                ok = parse_check(record)
                reason = "rejected"
            except Exception as error:  # noqa: BLE001 - reported, not hidden
                ok = False
                reason = str(error)
            if ok:
                survivors.append(record)
            else:
                report.parse_failures.append((record.track_id, reason))
        report.removed["parseable"] = len(kept) - len(survivors)
        kept = survivors
    return DatasetIndex(tuple(kept)), report


@dataclass(frozen=True)
class ChunkSpec:
    n_bars: int = 4
    stride_bars: int = 1

    def __post_init__(self):
        if self.n_bars < 1:
            raise ValueError("n_bars must be >= 1")
        if self.stride_bars < 1:
            raise ValueError("stride_bars must be >= 1")


def chunk_track(measure_count: int, spec: ChunkSpec) -> list[tuple[int, int]]:
    """Sliding-window measure ranges fully inside ``[0, measure_count)``."""
    chunks = []
    start = 0
    while start + spec.n_bars <= measure_count:
        chunks.append((start, start + spec.n_bars))
        start += spec.stride_bars
    return chunks


def class_weights(counts: dict[str, int]) -> dict[str, float]:
    """Inverse median frequency weights: ``median(counts) / count``."""
    if not counts:
        raise DatasetError("no class counts given")
    for label, count in counts.items():
        if count <= 0:
            raise DatasetError(f"class {label!r} has non-positive count {count}")
    median = statistics.median(counts.values())
    return {label: median / count for label, count in counts.items()}


# ---------------------------------------------------------------------------
# Synthetic fixtures


@dataclass(frozen=True)
class SynthTemplate:
    """Per-style grid pattern: (bar fraction, instrument, velocity range)
    hits repeated every bar, with uniform timing jitter bounded well below
    half a thirty-second note."""

    style: str
    pattern: tuple[tuple[Fraction, int, tuple[int, int]], ...]
    bars: int = 8
    bpm: float = 120.0
    jitter: float = 0.005  # seconds

    def __post_init__(self):
        bar_duration = 240.0 / self.bpm
        if self.jitter >= bar_duration / 64:
            raise ValueError(
                f"jitter {self.jitter}s reaches half a thirty-second "
                f"({bar_duration / 64:.4f}s); parses would become ambiguous"
            )


_F = Fraction
_KICK, _SNARE, _HH_CLOSED, _HH_OPEN, _RIDE, _TOM = 2, 4, 6, 10, 15, 9

TEMPLATES: dict[str, SynthTemplate] = {
    "rock": SynthTemplate(
        style="rock",
        pattern=tuple(
            [(_F(k, 4), _KICK, (96, 120)) for k in range(4)]
            + [(_F(1, 4), _SNARE, (90, 115)), (_F(3, 4), _SNARE, (90, 115))]
            + [(_F(k, 8), _HH_CLOSED, (60, 85)) for k in range(8)]
        ),
    ),
    "jazz": SynthTemplate(
        style="jazz",
        # Swing ride: quarter pulse plus the last eighth-triplet of beats 2/4.
        pattern=tuple(
            [(_F(k, 4), _RIDE, (70, 95)) for k in range(4)]
            + [(_F(1, 4) + _F(2, 12), _RIDE, (55, 75)), (_F(3, 4) + _F(2, 12), _RIDE, (55, 75))]
            + [(_F(1, 4), _HH_CLOSED, (50, 70)), (_F(3, 4), _HH_CLOSED, (50, 70))]
        ),
        bpm=140.0,
    ),
    "latin": SynthTemplate(
        style="latin",
        # Syncopated sixteenth figure over a steady kick.
        pattern=tuple(
            [(_F(0), _KICK, (92, 116)), (_F(1, 2), _KICK, (92, 116))]
            + [
                (_F(3, 16), _SNARE, (75, 100)),
                (_F(6, 16), _SNARE, (75, 100)),
                (_F(10, 16), _SNARE, (75, 100)),
                (_F(13, 16), _SNARE, (75, 100)),
            ]
            + [(_F(k, 4), _HH_OPEN, (60, 80)) for k in range(4)]
        ),
        bpm=110.0,
    ),
    "funk": SynthTemplate(
        style="funk",
        # Sixteenth hats with ghost snares.
        pattern=tuple(
            [(_F(k, 16), _HH_CLOSED, (55, 80)) for k in range(16)]
            + [(_F(0), _KICK, (100, 124)), (_F(7, 16), _KICK, (100, 124))]
            + [(_F(1, 4), _SNARE, (95, 120)), (_F(3, 4), _SNARE, (95, 120))]
            + [(_F(9, 16), _TOM, (40, 60))]
        ),
        bpm=100.0,
    ),
}


def synth_fixture(
    template: SynthTemplate | str,
    seed: int,
    pitch_map: PitchMap | None = None,
    bars: int | None = None,
) -> Track:
    """Deterministic synthetic track for the given style template."""
    if isinstance(template, str):
        template = TEMPLATES[template]
    if bars is not None:
        template = replace(template, bars=bars)
    if pitch_map is None:
        pitch_map = default_pitch_map()
    index_to_pitch = {index: pitch for pitch, index, _ in pitch_map.entries}
    rng = random.Random(seed)
    bar_duration = 240.0 / template.bpm
    events = []
    for bar in range(template.bars):
        bar_start = bar * bar_duration
        bar_end = bar_start + bar_duration
        for fraction, instrument, (low, high) in template.pattern:
            onset = bar_start + float(fraction) * bar_duration
            onset += rng.uniform(-template.jitter, template.jitter)
            onset = min(max(onset, bar_start), math.nextafter(bar_end, bar_start))
            velocity_raw = rng.randint(low, high)
            events.append(
                DrumEvent.from_raw(onset, index_to_pitch[instrument], instrument, velocity_raw)
            )
    events.sort(key=lambda e: (e.onset, e.instrument))
    uspq = round(60_000_000 / template.bpm)
    measures = tuple((k * bar_duration, bar_duration) for k in range(template.bars))
    grid = MeasureGrid(measures, (4, 4), ((0.0, uspq),))
    metadata = TrackMetadata(style=template.style, bpm=template.bpm, source=f"synth:{template.style}:{seed}")
    return Track(tuple(events), grid, metadata)


def write_fixture_corpus(
    out_dir,
    tracks_per_style: int = 5,
    seed: int = 0,
    bars: int = 8,
    styles: tuple[str, ...] = DEFAULT_STYLES,
) -> Path:
    """Write a miniature corpus in the ``info.csv`` + MIDI files layout.

    Deterministic for a given seed: same files, same bytes. Returns the
    path to the written ``info.csv``. Each style contributes
    ``tracks_per_style`` tracks; the last two go to validation and test.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "midi").mkdir(exist_ok=True)
    rows = []
    for style_index, style in enumerate(styles):
        template = TEMPLATES[style]
        for k in range(tracks_per_style):
            track = synth_fixture(template, seed=seed * 1000 + style_index * 101 + k, bars=bars)
            track_id = f"{style}_{k:03d}"
            midi_name = f"midi/{track_id}.mid"
            (out_dir / midi_name).write_bytes(write_midi_file(track))
            if tracks_per_style >= 3 and k == tracks_per_style - 1:
                split = "test"
            elif tracks_per_style >= 3 and k == tracks_per_style - 2:
                split = "validation"
            else:
                split = "train"
            rows.append(
                {
                    "drummer": "synth",
                    "session": "fixture",
                    "id": track_id,
                    "style": style,
                    "bpm": f"{template.bpm:g}",
                    "beat_type": "beat",
                    "time_signature": "4-4",
                    "midi_filename": midi_name,
                    "audio_filename": "",
                    "duration": f"{bars * 240.0 / template.bpm:.6f}",
                    "split": split,
                }
            )
    info_path = out_dir / "info.csv"
    with open(info_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    return info_path
