"""Command-line interface.

Exit codes: 0 on success, 1 on domain errors (bad grammar, unparseable
inputs, corpus problems), 2 on usage or I/O errors.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import pipeline
from .baselines import MidiLikeConfig
from .dataset import ChunkSpec, write_fixture_corpus
from .errors import RhythmlrtError
from .grammar import default_grammar, load_grammar_file, max_derivation_depth, parse_grammar_text, validate_grammar
from .midi import default_pitch_map, load_pitch_map, read_midi_file
from .parser import ParseConfig


def _domain_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except RhythmlrtError as error:
            click.echo(f"error: {error}", err=True)
            sys.exit(1)
        except OSError as error:
            click.echo(f"i/o error: {error}", err=True)
            sys.exit(2)

    return wrapper


def _load_grammar(path):
    if path is None:
        return default_grammar()
    return load_grammar_file(path)


def _load_pitch_map(path):
    if path is None:
        return default_pitch_map()
    return load_pitch_map(path)


@click.group()
@click.version_option(package_name="rhythmlrt")
def main():
    """Rhythm-tree and baseline encoders for drum MIDI corpora."""


@main.command("grammar-check")
@click.argument("grammar_file", type=click.Path(exists=True, dir_okay=False))
@_domain_errors
def grammar_check(grammar_file):
    """Validate a weighted grammar file."""
    text = Path(grammar_file).read_text("utf-8")
    grammar = parse_grammar_text(text)
    diagnostics = validate_grammar(grammar)
    for message in diagnostics.errors:
        click.echo(f"error: {message}")
    for message in diagnostics.warnings:
        click.echo(f"warning: {message}")
    if not diagnostics.ok:
        sys.exit(1)
    num, den = grammar.time_signature
    click.echo(
        f"ok: {len(grammar.rules)} rules, {len(grammar.symbols)} symbols, "
        f"{num}/{den}, max derivation depth {max_derivation_depth(grammar)}"
    )


def _encode_options(representations, grammar_path, pitch_map_path, chunk_bars, stride,
                    alpha, cluster_threshold, require_grammar_flag=True):
    needs_grammar = any(name in pipeline.TREE_REPRESENTATIONS for name in representations)
    if needs_grammar and require_grammar_flag and grammar_path is None:
        raise click.UsageError("--grammar is required for the lrt and tbpe representations")
    grammar = _load_grammar(grammar_path) if needs_grammar else None
    chunk = ChunkSpec(chunk_bars, stride) if chunk_bars else None
    return pipeline.EncodeOptions(
        representations=tuple(representations),
        grammar=grammar,
        parse_config=ParseConfig(alpha=alpha),
        pitch_map=_load_pitch_map(pitch_map_path),
        chunk=chunk,
        midilike=MidiLikeConfig(),
        cluster_threshold=cluster_threshold,
    )


@main.command("encode")
@click.argument("midi_files", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--repr", "representation", required=True,
              type=click.Choice(pipeline.REPRESENTATIONS), help="Representation to export.")
@click.option("--grammar", "grammar_path", type=click.Path(exists=True, dir_okay=False),
              help="Weighted grammar file (required for lrt/tbpe).")
@click.option("--pitch-map", "pitch_map_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--chunk-bars", default=0, show_default=True,
              help="Sliding-window length in bars; 0 encodes whole tracks.")
@click.option("--stride", default=1, show_default=True, help="Sliding-window stride in bars.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--format", "file_format", default="bin", type=click.Choice(["bin", "csv"]),
              show_default=True)
@click.option("--alpha", default=8.0, show_default=True, help="Alignment penalty scale.")
@click.option("--cluster-threshold", default=0.030, show_default=True,
              help="Simultaneity threshold in seconds.")
@_domain_errors
def encode(midi_files, representation, grammar_path, pitch_map_path, chunk_bars, stride,
           out_dir, file_format, alpha, cluster_threshold):
    """Encode MIDI files into export containers, one file per chunk."""
    options = _encode_options([representation], grammar_path, pitch_map_path,
                              chunk_bars, stride, alpha, cluster_threshold)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = []
    written = 0
    for midi_file in midi_files:
        source = Path(midi_file).stem
        track = read_midi_file(Path(midi_file).read_bytes(), options.pitch_map,
                               unknown_pitch="drop", source=source)
        try:
            encodings = pipeline.encode_chunks(track, options)
        except RhythmlrtError as error:
            failures.append({"track": source, "error": str(error)})
            continue
        for encoding in encodings:
            first_bar, last_bar = encoding.window
            name = f"{source}__{first_bar:04d}-{last_bar:04d}__{representation}.bin"
            metadata = {
                "representation": representation,
                "track": source,
                "chunk": [first_bar, last_bar],
                "bpm": track.bpm,
                "config": options.snapshot(),
            }
            pipeline._write_array(out_dir / name, encoding.arrays[representation],
                                  metadata, file_format)
            written += 1
    if failures:
        (out_dir / "failures.json").write_text(
            json.dumps(failures, indent=2, sort_keys=True) + "\n", "utf-8"
        )
    click.echo(f"wrote {written} files to {out_dir}" +
               (f" ({len(failures)} tracks failed, see failures.json)" if failures else ""))


@main.command("stats")
@click.argument("dataset_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--repr", "representations", default="all", show_default=True,
              help="Comma-separated representation list, or 'all'.")
@click.option("--grammar", "grammar_path", type=click.Path(exists=True, dir_okay=False),
              help="Weighted grammar file (defaults to the shipped 4/4 grammar).")
@click.option("--pitch-map", "pitch_map_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="Also write the table as JSON.")
@click.option("--alpha", default=8.0, show_default=True)
@click.option("--cluster-threshold", default=0.030, show_default=True)
@_domain_errors
def stats(dataset_dir, representations, grammar_path, pitch_map_path, out_path, alpha,
          cluster_threshold):
    """Average full-track sequence length per representation."""
    if representations == "all":
        names = list(pipeline.REPRESENTATIONS)
    else:
        names = [part.strip() for part in representations.split(",") if part.strip()]
    options = _encode_options(names, grammar_path, pitch_map_path, 0, 1, alpha,
                              cluster_threshold, require_grammar_flag=False)
    dataset_dir = Path(dataset_dir)
    midi_files = sorted(
        path for pattern in ("*.mid", "*.midi") for path in dataset_dir.rglob(pattern)
    )
    if not midi_files:
        raise RhythmlrtError(f"no MIDI files under {dataset_dir}")
    lengths = []
    skipped = 0
    for midi_file in midi_files:
        track = read_midi_file(midi_file.read_bytes(), options.pitch_map,
                               unknown_pitch="drop", source=midi_file.stem)
        try:
            lengths.append(pipeline.representation_lengths(track, options))
        except RhythmlrtError:
            skipped += 1
    result = pipeline.corpus_stats(lengths)
    result["skipped_tracks"] = skipped
    click.echo(f"{'representation':<14} {'avg. len.':>10}")
    for name in names:
        click.echo(f"{name:<14} {result['mean_length'][name]:>10.1f}")
    if "lrt_notetuple_ratio" in result:
        click.echo(f"{'lrt/notetuple':<14} {result['lrt_notetuple_ratio']:>10.3f}")
    if skipped:
        click.echo(f"({skipped} unparseable tracks skipped)")
    if out_path:
        Path(out_path).write_text(json.dumps(result, indent=2, sort_keys=True) + "\n", "utf-8")


@main.command("dataset-prepare")
@click.argument("gmd_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--chunk-bars", default=4, show_default=True)
@click.option("--stride", default=1, show_default=True)
@click.option("--reprs", default="all", show_default=True,
              help="Comma-separated representation list, or 'all'.")
@click.option("--grammar", "grammar_path", type=click.Path(exists=True, dir_okay=False),
              help="Weighted grammar file (defaults to the shipped 4/4 grammar).")
@click.option("--pitch-map", "pitch_map_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--jobs", default=None, type=int, envvar="RHYTHMLRT_JOBS", show_default="1",
              help="Worker processes for track-level fan-out.")
@click.option("--format", "file_format", default="bin", type=click.Choice(["bin", "csv"]),
              show_default=True)
@click.option("--alpha", default=8.0, show_default=True)
@click.option("--cluster-threshold", default=0.030, show_default=True)
@_domain_errors
def dataset_prepare(gmd_dir, out_dir, chunk_bars, stride, reprs, grammar_path,
                    pitch_map_path, jobs, file_format, alpha, cluster_threshold):
    """Filter, parse, chunk and encode a corpus into an export tree."""
    if reprs == "all":
        names = list(pipeline.REPRESENTATIONS)
    else:
        names = [part.strip() for part in reprs.split(",") if part.strip()]
    options = _encode_options(names, grammar_path, pitch_map_path, chunk_bars, stride,
                              alpha, cluster_threshold, require_grammar_flag=False)
    manifest = pipeline.dataset_prepare(
        gmd_dir, out_dir, options, jobs=jobs or 1, file_format=file_format
    )
    click.echo(
        f"prepared {len(manifest['entries'])} chunks "
        f"({', '.join(manifest['styles'])}) under {out_dir}"
    )


@main.command("fixture")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--tracks-per-style", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--bars", default=8, show_default=True)
@_domain_errors
def fixture(out_dir, tracks_per_style, seed, bars):
    """Write a synthetic corpus in the info.csv + MIDI layout."""
    info_path = write_fixture_corpus(out_dir, tracks_per_style, seed, bars)
    click.echo(f"wrote fixture corpus index to {info_path}")


if __name__ == "__main__":
    main()
