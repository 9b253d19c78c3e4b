"""Scikit-learn style transformers over the functional core.

Each transformer is stateless (``fit`` only validates and resolves
defaults) and maps a list of tracks or trees to a list of encoded
objects, so the encoders compose with ``sklearn.pipeline.Pipeline`` and
expose ``get_params`` / ``set_params`` for grid tooling.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin

from . import baselines, lrt
from .grammar import WeightedGrammar, default_grammar, max_derivation_depth
from .midi import Track, default_pitch_map
from .parser import ParseConfig, parse_track
from .trees import RhythmTree, rhythm_tree


def _check_items(X, kind, name):
    items = list(X)
    for item in items:
        if not isinstance(item, kind):
            raise TypeError(f"{name} expects {kind.__name__} items, got {type(item).__name__}")
    return items


class RhythmTreeTransformer(BaseEstimator, TransformerMixin):
    """Tracks -> simplified global rhythm trees (parse, re-root, simplify)."""

    def __init__(self, grammar=None, alpha=8.0, cluster_threshold=0.030,
                 max_clusters_per_measure=128, n_instruments=None):
        self.grammar = grammar
        self.alpha = alpha
        self.cluster_threshold = cluster_threshold
        self.max_clusters_per_measure = max_clusters_per_measure
        self.n_instruments = n_instruments

    def fit(self, X=None, y=None):
        grammar = self.grammar if self.grammar is not None else default_grammar()
        if not isinstance(grammar, WeightedGrammar):
            raise TypeError("grammar must be a WeightedGrammar")
        self.grammar_ = grammar
        self.config_ = ParseConfig(
            alpha=self.alpha, max_clusters_per_measure=self.max_clusters_per_measure
        )
        self.n_instruments_ = (
            self.n_instruments if self.n_instruments is not None else default_pitch_map().n
        )
        return self

    def transform(self, X) -> list[RhythmTree]:
        if not hasattr(self, "grammar_"):
            self.fit()
        trees = []
        for track in _check_items(X, Track, type(self).__name__):
            measures = parse_track(
                track,
                self.grammar_,
                self.config_,
                n_instruments=self.n_instruments_,
                cluster_threshold=self.cluster_threshold,
            )
            trees.append(rhythm_tree(measures, self.n_instruments_))
        return trees


class LrtEncoder(BaseEstimator, TransformerMixin):
    """Rhythm trees -> pre-order one-hot + velocity matrices."""

    def __init__(self, rule_count=15, instrument_count=22):
        self.rule_count = rule_count
        self.instrument_count = instrument_count

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        trees = _check_items(X, RhythmTree, type(self).__name__)
        return [
            lrt.linearize_lrt(tree, self.rule_count, self.instrument_count).data
            for tree in trees
        ]


class TbpeEncoder(BaseEstimator, TransformerMixin):
    """Rhythm trees -> tree positional encoding matrices (row-aligned with
    the LRT matrices of the same trees)."""

    def __init__(self, max_depth=None, include_root=True, grammar=None):
        self.max_depth = max_depth
        self.include_root = include_root
        self.grammar = grammar

    def fit(self, X=None, y=None):
        if self.max_depth is not None:
            self.max_depth_ = self.max_depth
        else:
            grammar = self.grammar if self.grammar is not None else default_grammar()
            # Path entries: global root + measure + the grammar's division levels.
            self.max_depth_ = max_derivation_depth(grammar) + (2 if self.include_root else 1)
        return self

    def transform(self, X):
        if not hasattr(self, "max_depth_"):
            self.fit()
        trees = _check_items(X, RhythmTree, type(self).__name__)
        return [
            lrt.compute_tbpe(tree, self.max_depth_, self.include_root).data for tree in trees
        ]


class PianoRollEncoder(BaseEstimator, TransformerMixin):
    """Tracks -> sampled velocity matrices."""

    def __init__(self, frequency=30.0, n_instruments=22):
        self.frequency = frequency
        self.n_instruments = n_instruments

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        tracks = _check_items(X, Track, type(self).__name__)
        return [
            baselines.encode_piano_roll(track, self.frequency, self.n_instruments).data
            for track in tracks
        ]


class NoteTupleEncoder(BaseEstimator, TransformerMixin):
    """Tracks -> (instrument one-hot, velocity, duration, time-shift) rows."""

    def __init__(self, n_instruments=22):
        self.n_instruments = n_instruments

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        tracks = _check_items(X, Track, type(self).__name__)
        return [baselines.encode_note_tuples(track, self.n_instruments) for track in tracks]


class MidiLikeEncoder(BaseEstimator, TransformerMixin):
    """Tracks -> MIDI-Like token id sequences."""

    def __init__(self, velocity_bins=32, time_quantum=0.01, max_shift=1.0, pitch_map=None):
        self.velocity_bins = velocity_bins
        self.time_quantum = time_quantum
        self.max_shift = max_shift
        self.pitch_map = pitch_map

    def fit(self, X=None, y=None):
        self.config_ = baselines.MidiLikeConfig(
            velocity_bins=self.velocity_bins,
            time_quantum=self.time_quantum,
            max_shift=self.max_shift,
        )
        self.pitch_map_ = self.pitch_map if self.pitch_map is not None else default_pitch_map()
        return self

    def transform(self, X):
        if not hasattr(self, "config_"):
            self.fit()
        tracks = _check_items(X, Track, type(self).__name__)
        return [
            baselines.encode_midilike(track, self.config_, self.pitch_map_).tokens
            for track in tracks
        ]
