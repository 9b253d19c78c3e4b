import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import Pipeline

from rhythmlrt.dataset import synth_fixture
from rhythmlrt.estimators import (
    LrtEncoder,
    MidiLikeEncoder,
    NoteTupleEncoder,
    PianoRollEncoder,
    RhythmTreeTransformer,
    TbpeEncoder,
)

from conftest import quarters_template


@pytest.fixture(scope="module")
def tracks():
    return [synth_fixture(quarters_template(bars=2), seed=s) for s in range(3)]


class TestSklearnShape:
    def test_get_set_params_round_trip(self):
        encoder = PianoRollEncoder(frequency=50.0)
        params = encoder.get_params()
        assert params["frequency"] == 50.0
        encoder.set_params(frequency=30.0)
        assert encoder.frequency == 30.0

    def test_clone(self):
        transformer = RhythmTreeTransformer(alpha=4.0, cluster_threshold=0.02)
        copy = clone(transformer)
        assert copy.get_params() == transformer.get_params()

    def test_pipeline_composition(self, tracks):
        pipeline = Pipeline(
            [("trees", RhythmTreeTransformer()), ("lrt", LrtEncoder())]
        )
        matrices = pipeline.fit_transform(tracks)
        assert len(matrices) == 3
        assert all(m.shape[1] == 37 for m in matrices)

    def test_type_validation(self, tracks):
        with pytest.raises(TypeError, match="Track"):
            RhythmTreeTransformer().fit().transform(["not a track"])
        with pytest.raises(TypeError, match="RhythmTree"):
            LrtEncoder().transform(tracks)


class TestEncoders:
    def test_lrt_tbpe_alignment(self, tracks):
        trees = RhythmTreeTransformer().fit().transform(tracks)
        lrt = LrtEncoder().transform(trees)
        tbpe = TbpeEncoder().fit().transform(trees)
        for a, b in zip(lrt, tbpe):
            assert a.shape[0] == b.shape[0]
            assert b.shape[1] == 16  # 2 * (grammar depth 6 + root + measure)

    def test_tbpe_depth_from_grammar(self):
        encoder = TbpeEncoder().fit()
        assert encoder.max_depth_ == 8
        assert TbpeEncoder(include_root=False).fit().max_depth_ == 7
        assert TbpeEncoder(max_depth=4).fit().max_depth_ == 4

    def test_piano_roll_shapes(self, tracks):
        rolls = PianoRollEncoder(frequency=30.0).transform(tracks)
        assert all(r.shape == (120, 22) for r in rolls)  # 2 bars of 2 s at 30 Hz

    def test_note_tuples(self, tracks):
        tuples = NoteTupleEncoder().transform(tracks)
        assert all(t.shape == (8, 25) for t in tuples)  # 4 hits per bar, 2 bars

    def test_midilike_tokens(self, tracks):
        sequences = MidiLikeEncoder().fit().transform(tracks)
        assert all(s.dtype == np.int32 for s in sequences)
        assert all(len(s) > 0 for s in sequences)

    def test_corpus_length_ordering(self):
        # Mean sequence lengths keep the expected coarse order.
        from rhythmlrt.dataset import TEMPLATES

        tracks = [synth_fixture(style, seed=1, bars=4) for style in TEMPLATES]
        trees = RhythmTreeTransformer().fit().transform(tracks)
        means = {
            "pianoroll50": np.mean([len(m) for m in PianoRollEncoder(50.0).transform(tracks)]),
            "pianoroll30": np.mean([len(m) for m in PianoRollEncoder(30.0).transform(tracks)]),
            "midilike": np.mean([len(m) for m in MidiLikeEncoder().fit().transform(tracks)]),
            "lrt": np.mean([len(m) for m in LrtEncoder().transform(trees)]),
            "notetuple": np.mean([len(m) for m in NoteTupleEncoder().transform(tracks)]),
        }
        assert means["pianoroll50"] > means["pianoroll30"] > means["lrt"] > means["notetuple"]
        assert means["midilike"] > means["lrt"]
