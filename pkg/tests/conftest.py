import numpy as np
import pytest

from rhythmlrt.dataset import SynthTemplate
from rhythmlrt.grammar import default_grammar
from rhythmlrt.midi import Cluster, DrumEvent, MeasureGrid, Track, TrackMetadata, default_pitch_map


@pytest.fixture(scope="session")
def grammar():
    return default_grammar()


@pytest.fixture(scope="session")
def pitch_map():
    return default_pitch_map()


def make_event(onset, instrument=2, velocity_raw=100, pitch=None, duration=None, pitch_map=None):
    """DrumEvent with the pitch looked up from the instrument index."""
    if pitch is None:
        pitch_map = pitch_map or default_pitch_map()
        pitch = next(p for p, i, _ in pitch_map.entries if i == instrument)
    return DrumEvent.from_raw(onset, pitch, instrument, velocity_raw, duration)


def make_cluster(onset, velocities, n=22):
    """Cluster at ``onset`` whose velocity vector holds the given
    {instrument: velocity} pairs exactly (bypasses the 1/127 grid so tests
    can pin decimal velocities)."""
    vector = np.zeros(n)
    members = []
    for instrument, velocity in velocities.items():
        vector[instrument] = velocity
        members.append(
            DrumEvent(onset, 0, instrument, max(1, round(velocity * 127)), velocity)
        )
    return Cluster(onset, tuple(members), vector)


def make_track(events, bpm=120.0, bars=None, style=None):
    """Track over a constant-tempo 4/4 grid covering all events."""
    events = tuple(sorted(events, key=lambda e: (e.onset, e.instrument)))
    bar = 240.0 / bpm
    if bars is None:
        last = events[-1].onset if events else 0.0
        bars = int(last // bar) + 1
    grid = MeasureGrid(
        tuple((k * bar, bar) for k in range(bars)),
        (4, 4),
        ((0.0, round(60_000_000 / bpm)),),
    )
    return Track(events, grid, TrackMetadata(style=style, bpm=bpm, source="test"))


def quarters_template(style="pulse", bars=4, bpm=120.0, jitter=0.0):
    """Kick on every quarter; parses to the known two-level binary tree."""
    from fractions import Fraction

    return SynthTemplate(
        style=style,
        pattern=tuple((Fraction(k, 4), 2, (100, 100)) for k in range(4)),
        bars=bars,
        bpm=bpm,
        jitter=jitter,
    )
