"""Grammar-based rhythm trees and sequence encodings for drum MIDI."""

from .baselines import (
    MidiLikeConfig,
    MidiLikeVocabulary,
    PianoRoll,
    TokenSeq,
    encode_midilike,
    encode_note_tuples,
    encode_piano_roll,
)
from .dataset import (
    ChunkSpec,
    DatasetIndex,
    FilterCriteria,
    SynthTemplate,
    TEMPLATES,
    chunk_track,
    class_weights,
    filter_tracks,
    load_gmd_index,
    synth_fixture,
    write_fixture_corpus,
)
from .errors import RhythmlrtError
from .export import read_container, write_container
from .grammar import (
    ProductionRule,
    RuleBody,
    WeightedGrammar,
    default_grammar,
    max_derivation_depth,
    parse_grammar_text,
    serialize_grammar,
    validate_grammar,
)
from .lrt import LrtMatrix, TbpeMatrix, compute_tbpe, delinearize_lrt, linearize_lrt
from .midi import (
    Cluster,
    DrumEvent,
    MeasureGrid,
    PitchMap,
    Track,
    build_measure_grid,
    cluster_events,
    default_pitch_map,
    read_midi_file,
    segment_into_measures,
    write_midi_file,
)
from .parser import (
    Interval,
    ParseConfig,
    ParseNode,
    ParseTree,
    best_parse_measure,
    enumerate_parses,
    parse_track,
    partition_clusters,
    recompute_weight,
)
from .positional import classical_pe, continuous_pe
from .trees import (
    RhythmNode,
    RhythmTree,
    reroot_measures,
    rhythm_tree,
    simplify_rules,
    tree_stats,
)

__version__ = "0.1.0"
