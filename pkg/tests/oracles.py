"""Naive reference implementations the real pipeline is checked against.

These recompute everything per pixel from the raw event list, sharing no
aggregation code with the package. The closing formulas use numpy's exp
(scalar calls) because bit-exact comparison requires both sides to use
the same elementary-function implementation.
"""
from __future__ import annotations

import numpy as np

from evrep import EventStream, SensorGeometry


def make_random_stream(rng: np.random.Generator, n: int, geometry: SensorGeometry,
                       t_max: int, sort: bool = True) -> EventStream:
    t = rng.integers(0, t_max, size=n)
    if sort:
        t = np.sort(t)
    x = rng.integers(0, geometry.width, size=n)
    y = rng.integers(0, geometry.height, size=n)
    p = rng.choice(np.array([-1, 1], np.int64), size=n)
    return EventStream(t, x, y, p, geometry)


def pixel_aggregates(events, geometry: SensorGeometry):
    """Per-pixel (last_t, last_p, pol_sum, count) from the raw event list.

    ``events`` is an iterable of (t, x, y, p); list position breaks
    timestamp ties, the later event wins.
    """
    by_pixel: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for t, x, y, p in events:
        by_pixel.setdefault((x, y), []).append((t, p))
    shape = (geometry.height, geometry.width)
    last_t = np.zeros(shape, np.int64)
    last_p = np.zeros(shape, np.int8)
    pol_sum = np.zeros(shape, np.int64)
    count = np.zeros(shape, np.int64)
    for (x, y), hits in by_pixel.items():
        last_t[y, x] = hits[-1][0]
        last_p[y, x] = hits[-1][1]
        pol_sum[y, x] = sum(p for _, p in hits)
        count[y, x] = len(hits)
    return last_t, last_p, pol_sum, count


def channels_from_events(events, geometry: SensorGeometry,
                         window_start: int, window_end: int):
    """The three representation planes recomputed pixel by pixel.

    Returns (frame, decay, freq) float64 planes for the window ending at
    ``window_end`` with tau = window_end - window_start.
    """
    events = list(events)
    last_t, last_p, pol_sum, count = pixel_aggregates(events, geometry)
    tau = float(window_end - window_start)
    shape = (geometry.height, geometry.width)
    frame = np.zeros(shape, np.float64)
    decay = np.zeros(shape, np.float64)
    freq = np.full(shape, 127.5, np.float64)
    for (x, y) in {(e[1], e[2]) for e in events}:
        frame[y, x] = float(last_p[y, x])
        if last_t[y, x] <= window_end:
            dt = np.float64(int(last_t[y, x]) - window_end)
            decay[y, x] = float(last_p[y, x]) * np.exp(dt / tau)
        with np.errstate(over="ignore"):
            freq[y, x] = 255.0 / (1.0 + np.exp(-np.float64(int(pol_sum[y, x])) / 2.0))
    return frame, decay, freq


def nn_resample(region: np.ndarray, side: int) -> np.ndarray:
    """Brute-force nearest-neighbor resampling via the floor-scaled index."""
    src_h, src_w = region.shape[-2:]
    out = np.zeros(region.shape[:-2] + (side, side), dtype=region.dtype)
    for i in range(side):
        for j in range(side):
            out[..., i, j] = region[..., (i * src_h) // side, (j * src_w) // side]
    return out
