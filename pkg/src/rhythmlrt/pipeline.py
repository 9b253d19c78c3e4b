"""Track-to-export plumbing shared by the CLI commands.

Handles chunk windowing, per-chunk encoding of every representation,
sequence-length statistics and the corpus preparation pipeline (filter,
parse, chunk, encode, manifest).
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import export
from .baselines import MidiLikeConfig, encode_midilike, encode_note_tuples, encode_piano_roll
from .dataset import ChunkSpec, DatasetIndex, FilterReport, TrackRecord, chunk_track, class_weights, filter_tracks, load_gmd_index_file
from .errors import RhythmlrtError, TrackParseError
from .grammar import WeightedGrammar, max_derivation_depth, serialize_grammar
from .lrt import compute_tbpe, linearize_lrt
from .midi import MeasureGrid, PitchMap, Track, read_midi_file
from .parser import ParseConfig, ParseTree, parse_track
from .trees import SIMPLIFIED_RULE_COUNT, rhythm_tree

REPRESENTATIONS = ("lrt", "tbpe", "pianoroll30", "pianoroll50", "notetuple", "midilike")
TREE_REPRESENTATIONS = ("lrt", "tbpe")


@dataclass(frozen=True)
class EncodeOptions:
    """Everything needed to encode chunks of a track."""

    representations: tuple[str, ...] = REPRESENTATIONS
    grammar: WeightedGrammar | None = None
    parse_config: ParseConfig = field(default_factory=ParseConfig)
    pitch_map: PitchMap | None = None
    chunk: ChunkSpec | None = None
    midilike: MidiLikeConfig = field(default_factory=MidiLikeConfig)
    tbpe_max_depth: int | None = None
    tbpe_include_root: bool = True
    cluster_threshold: float = 0.030

    def __post_init__(self):
        for name in self.representations:
            if name not in REPRESENTATIONS:
                raise ValueError(f"unknown representation {name!r}")
        if self.needs_grammar and self.grammar is None:
            raise ValueError("lrt/tbpe encoding requires a grammar")

    @property
    def needs_grammar(self) -> bool:
        return any(name in TREE_REPRESENTATIONS for name in self.representations)

    def resolved_tbpe_depth(self) -> int:
        if self.tbpe_max_depth is not None:
            return self.tbpe_max_depth
        extra = 2 if self.tbpe_include_root else 1
        return max_derivation_depth(self.grammar) + extra

    def snapshot(self) -> dict:
        """JSON-serializable configuration record for manifests."""
        snap = {
            "representations": sorted(self.representations),
            "alpha": self.parse_config.alpha,
            "tie_break": self.parse_config.tie_break,
            "cluster_threshold": self.cluster_threshold,
            "midilike": self.midilike.snapshot(),
            "tbpe_include_root": self.tbpe_include_root,
        }
        if self.chunk is not None:
            snap["chunk_bars"] = self.chunk.n_bars
            snap["stride_bars"] = self.chunk.stride_bars
        if self.grammar is not None:
            snap["grammar_hash"] = export.config_hash({"text": serialize_grammar(self.grammar)})
            snap["tbpe_max_depth"] = self.resolved_tbpe_depth()
        if self.pitch_map is not None:
            snap["pitch_map"] = [list(entry) for entry in self.pitch_map.entries]
        return snap


def chunk_windows(track: Track, chunk: ChunkSpec | None) -> list[tuple[int, int]]:
    if chunk is None:
        return [(0, len(track.grid))]
    return chunk_track(len(track.grid), chunk)


def slice_track(track: Track, first_bar: int, last_bar: int) -> Track:
    """Sub-track covering measures [first_bar, last_bar), rebased to zero."""
    start = track.grid.measures[first_bar][0]
    end_start, end_duration = track.grid.measures[last_bar - 1]
    end = end_start + end_duration
    measures = tuple(
        (bar_start - start, duration)
        for bar_start, duration in track.grid.measures[first_bar:last_bar]
    )
    tempo = [(max(0.0, time - start), uspq) for time, uspq in track.grid.tempo_map if time < end]
    keep = []
    for time, uspq in tempo:
        if keep and time == keep[-1][0]:
            keep[-1] = (time, uspq)
        else:
            keep.append((time, uspq))
    grid = MeasureGrid(measures, track.grid.time_signature, tuple(keep))
    events = tuple(
        type(event)(
            onset=event.onset - start,
            pitch=event.pitch,
            instrument=event.instrument,
            velocity_raw=event.velocity_raw,
            velocity=event.velocity,
            duration=event.duration,
        )
        for event in track.events
        if start <= event.onset < end
    )
    return Track(events, grid, track.metadata)


@dataclass
class ChunkEncoding:
    window: tuple[int, int]
    arrays: dict[str, np.ndarray]

    def rows(self) -> dict[str, int]:
        return {name: int(array.shape[0]) for name, array in self.arrays.items()}


def encode_chunks(track: Track, options: EncodeOptions) -> list[ChunkEncoding]:
    """Encode every requested representation for every chunk window.

    Raises :class:`TrackParseError` when tree representations are requested
    and any measure fails to parse.
    """
    n = options.pitch_map.n if options.pitch_map else 22
    trees: list[ParseTree] | None = None
    if options.needs_grammar:
        trees = parse_track(
            track,
            options.grammar,
            options.parse_config,
            n_instruments=n,
            cluster_threshold=options.cluster_threshold,
        )
    out = []
    for first_bar, last_bar in chunk_windows(track, options.chunk):
        arrays: dict[str, np.ndarray] = {}
        window_track = None
        if set(options.representations) - set(TREE_REPRESENTATIONS):
            window_track = slice_track(track, first_bar, last_bar)
        if trees is not None:
            tree = rhythm_tree(trees[first_bar:last_bar], n)
            if "lrt" in options.representations:
                arrays["lrt"] = linearize_lrt(tree, SIMPLIFIED_RULE_COUNT, n).data
            if "tbpe" in options.representations:
                arrays["tbpe"] = compute_tbpe(
                    tree, options.resolved_tbpe_depth(), options.tbpe_include_root
                ).data
        if "pianoroll30" in options.representations:
            arrays["pianoroll30"] = encode_piano_roll(window_track, 30.0, n).data
        if "pianoroll50" in options.representations:
            arrays["pianoroll50"] = encode_piano_roll(window_track, 50.0, n).data
        if "notetuple" in options.representations:
            arrays["notetuple"] = encode_note_tuples(window_track, n)
        if "midilike" in options.representations:
            arrays["midilike"] = encode_midilike(
                window_track, options.midilike, options.pitch_map
            ).tokens
        out.append(ChunkEncoding((first_bar, last_bar), arrays))
    return out


def representation_lengths(track: Track, options: EncodeOptions) -> dict[str, int]:
    """Full-track sequence length of every requested representation."""
    whole = EncodeOptions(
        representations=options.representations,
        grammar=options.grammar,
        parse_config=options.parse_config,
        pitch_map=options.pitch_map,
        chunk=None,
        midilike=options.midilike,
        tbpe_max_depth=options.tbpe_max_depth,
        tbpe_include_root=options.tbpe_include_root,
        cluster_threshold=options.cluster_threshold,
    )
    (encoding,) = encode_chunks(track, whole)
    return encoding.rows()


def corpus_stats(lengths: list[dict[str, int]]) -> dict:
    """Mean sequence length per representation plus the tree/tuple ratio."""
    if not lengths:
        raise RhythmlrtError("no tracks to aggregate")
    means = {}
    for name in lengths[0]:
        means[name] = float(np.mean([entry[name] for entry in lengths]))
    stats = {"tracks": len(lengths), "mean_length": means}
    if means.get("notetuple"):
        if "lrt" in means:
            stats["lrt_notetuple_ratio"] = means["lrt"] / means["notetuple"]
    return stats


# ---------------------------------------------------------------------------
# Corpus preparation


@dataclass(frozen=True)
class PrepareSettings:
    options: EncodeOptions
    out_dir: str
    gmd_dir: str
    file_format: str = "bin"
    unknown_pitch: str = "drop"


def _write_array(path: Path, array: np.ndarray, metadata: dict, file_format: str) -> str:
    if file_format == "csv":
        export.write_container_csv(path.with_suffix(".csv"), array, metadata)
        return str(path.with_suffix(".csv"))
    export.write_container(path, array, metadata)
    return str(path)


def prepare_one_track(record: TrackRecord, settings: PrepareSettings):
    """Encode all chunks of one corpus track. Returns (entries, failure)."""
    options = settings.options
    midi_path = Path(settings.gmd_dir) / record.midi_path
    data = midi_path.read_bytes()
    track = read_midi_file(
        data,
        options.pitch_map,
        unknown_pitch=settings.unknown_pitch,
        source=record.track_id,
        style=record.style,
    )
    try:
        encodings = encode_chunks(track, options)
    except TrackParseError as error:
        return [], (record.track_id, str(error))
    entries = []
    for encoding in encodings:
        first_bar, last_bar = encoding.window
        chunk_id = f"{record.track_id}__{first_bar:04d}-{last_bar:04d}"
        files = {}
        for name, array in encoding.arrays.items():
            metadata = {
                "representation": name,
                "track": record.track_id,
                "chunk": [first_bar, last_bar],
                "style": record.style,
                "split": record.split,
                "bpm": record.bpm,
            }
            rel = f"exports/{chunk_id}__{name}.bin"
            files[name] = _write_array(
                Path(settings.out_dir) / rel, array, metadata, settings.file_format
            )
            files[name] = os.path.relpath(files[name], settings.out_dir)
        entries.append(
            {
                "id": chunk_id,
                "track": record.track_id,
                "style": record.style,
                "split": record.split,
                "bpm": record.bpm,
                "bars": [first_bar, last_bar],
                "rows": encoding.rows(),
                "files": files,
            }
        )
    return entries, None


def _prepare_worker(args):
    return prepare_one_track(*args)


def dataset_prepare(
    gmd_dir,
    out_dir,
    options: EncodeOptions,
    jobs: int = 1,
    file_format: str = "bin",
    unknown_pitch: str = "drop",
) -> dict:
    """Filter, parse, chunk and encode a corpus; write manifest and reports.

    Output tree: ``exports/*.bin(.json)``, ``manifest.json``,
    ``class_weights.json``, ``report.json``, ``failures.json`` and one
    ``<split>.txt`` id list per split. Deterministic for fixed inputs.
    """
    gmd_dir = Path(gmd_dir)
    out_dir = Path(out_dir)
    info_path = gmd_dir / "info.csv"
    if not info_path.exists():
        raise RhythmlrtError(f"no info.csv under {gmd_dir}")
    index = load_gmd_index_file(info_path)
    filtered, report = filter_tracks(index)
    out_dir.mkdir(parents=True, exist_ok=True)

    settings = PrepareSettings(
        options=options,
        out_dir=str(out_dir),
        gmd_dir=str(gmd_dir),
        file_format=file_format,
        unknown_pitch=unknown_pitch,
    )
    work = [(record, settings) for record in filtered.records]
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_prepare_worker, work))
    else:
        results = [_prepare_worker(item) for item in work]

    entries = []
    failures = []
    failed_ids = set()
    for chunk_entries, failure in results:
        entries.extend(chunk_entries)
        if failure is not None:
            failures.append({"track": failure[0], "error": failure[1]})
            failed_ids.add(failure[0])
    entries.sort(key=lambda entry: entry["id"])
    report.removed["parseable"] = len(failures)
    kept = DatasetIndex(tuple(r for r in filtered.records if r.track_id not in failed_ids))

    train_counts: dict[str, int] = {}
    for record in kept.split("train"):
        train_counts[record.style] = train_counts.get(record.style, 0) + 1
    weights = class_weights(train_counts) if train_counts else {}

    snapshot = options.snapshot()
    manifest = {
        "format": 1,
        "config": snapshot,
        "config_hash": export.config_hash(snapshot),
        "class_weights": weights,
        "styles": sorted({entry["style"] for entry in entries}),
        "entries": entries,
    }
    _write_json(out_dir / "manifest.json", manifest)
    _write_json(out_dir / "class_weights.json", weights)
    _write_json(out_dir / "failures.json", failures)
    _write_json(
        out_dir / "report.json",
        {
            "config": snapshot,
            "config_hash": manifest["config_hash"],
            "input_tracks": len(index),
            "removed": report.removed,
            "kept_tracks": len(kept),
            "chunks": len(entries),
            "style_counts": kept.style_counts(),
            "total_duration_seconds": kept.total_duration,
            "parse_failures": failures,
        },
    )
    for split in ("train", "validation", "test"):
        ids = [entry["id"] for entry in entries if entry["split"] == split]
        (out_dir / f"{split}.txt").write_text("\n".join(ids) + ("\n" if ids else ""), "utf-8")
    return manifest


def _write_json(path: Path, payload):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")
