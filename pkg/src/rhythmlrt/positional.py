"""Sinusoidal positional encodings: by sequence index and by note time.

Both produce interleaved sine/cosine pairs over a geometric frequency
ladder, so every row has norm ``sqrt(d / 2)``. The classical variant is a
function of the integer position; the continuous variant is a function of
the note's absolute onset in seconds, so simultaneous notes share a row.
"""

from __future__ import annotations

import math

import numpy as np


def classical_pe(length: int, dim: int, tau: float = 10_000.0) -> np.ndarray:
    """Sequence-position encoding for positions ``0 .. length - 1``.

    ``out[pos, 2i] = sin(pos / tau**(2i/dim))`` and the matching cosine at
    ``2i + 1``, for ``i`` in ``[0, dim/2)``.
    """
    if dim % 2 != 0:
        raise ValueError(f"dimension must be even, got {dim}")
    positions = np.arange(length, dtype=np.float64)[:, None]
    exponents = 2.0 * np.arange(dim // 2, dtype=np.float64) / dim
    angles = positions / (tau ** exponents)[None, :]
    out = np.zeros((length, dim))
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles)
    return out


def continuous_pe(
    times,
    dim: int,
    shortest_period: float = 0.1,
    longest_period: float = 300.0,
) -> np.ndarray:
    """Time-based encoding of absolute onsets (seconds).

    The lowest dimension pair completes one period every
    ``shortest_period`` seconds; periods grow geometrically towards
    ``longest_period``. Rows are a function of the time alone, so two
    simultaneous notes get bit-identical rows.
    """
    if dim % 2 != 0:
        raise ValueError(f"dimension must be even, got {dim}")
    if not 0 < shortest_period < longest_period:
        raise ValueError(
            f"need 0 < shortest_period < longest_period, got "
            f"{shortest_period} and {longest_period}"
        )
    times = np.asarray(times, dtype=np.float64)[:, None]
    exponents = 2.0 * np.arange(dim // 2, dtype=np.float64) / dim
    ratio = longest_period / shortest_period
    angles = (2.0 * math.pi / shortest_period) * times / (ratio ** exponents)[None, :]
    out = np.zeros((times.shape[0], dim))
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles)
    return out
