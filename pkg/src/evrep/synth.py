"""Synthetic event generation with closed-form ground truth.

A full-height vertical bar translates horizontally with wrap-around.
Each time an edge crosses a pixel column the generator emits events at
evenly spaced rows: +1 at the leading edge, -1 at the trailing edge.
Crossing times and touched pixels follow directly from the motion model,
which makes the generated stream a precise oracle for the windowed
representations. An optional uniform noise rate stresses filtering.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import EventStream, SensorGeometry
from .windowing import WindowConfig

US_PER_S = 1_000_000


@dataclass(frozen=True)
class MovingBarScenario:
    """Vertical bar of ``bar_width`` columns moving at ``velocity_px_s``
    (sign gives direction) for ``duration_us``, wrapping around the plane."""

    geometry: SensorGeometry
    bar_width: int = 4
    velocity_px_s: float = 1000.0
    duration_us: int = 100_000
    events_per_edge: int = 8
    seed: int = 0
    noise_rate_hz_per_px: float = 0.0

    def __post_init__(self) -> None:
        if self.velocity_px_s == 0:
            raise ValueError("bar velocity must be nonzero")
        if not (1 <= self.bar_width < self.geometry.width):
            raise ValueError("bar width must be in [1, geometry.width)")
        if self.events_per_edge < 1:
            raise ValueError("events_per_edge must be at least 1")
        if self.duration_us < 0:
            raise ValueError("duration must be non-negative")
        if self.noise_rate_hz_per_px < 0:
            raise ValueError("noise rate must be non-negative")


def crossing_times(sc: MovingBarScenario) -> np.ndarray:
    """Microsecond times at which the bar advances one column, within the
    scenario duration; crossing c happens at ``round(c * 1e6 / |v|)``."""
    speed = abs(sc.velocity_px_s)
    n = int(np.ceil(sc.duration_us * speed / US_PER_S))
    times = np.round(np.arange(n + 1) * (US_PER_S / speed)).astype(np.int64)
    return times[times < sc.duration_us]


def edge_columns(sc: MovingBarScenario, crossing: int) -> tuple[int, int]:
    """(leading, trailing) column indices at the given crossing ordinal."""
    width = sc.geometry.width
    direction = 1 if sc.velocity_px_s > 0 else -1
    lead = (crossing * direction) % width
    trail = ((crossing - sc.bar_width) * direction) % width
    return lead, trail


def edge_rows(sc: MovingBarScenario) -> np.ndarray:
    """Rows receiving events at each edge crossing, evenly spaced."""
    n = sc.events_per_edge
    return (np.arange(n) * sc.geometry.height) // n


def generate_moving_bar(sc: MovingBarScenario) -> EventStream:
    """Deterministic event stream for the scenario, timestamps sorted.

    Per crossing, leading-edge events come first, then trailing-edge ones,
    rows ascending; noise events (when enabled) interleave by timestamp
    after the bar events of the same microsecond.
    """
    times = crossing_times(sc)
    n_cross = len(times)
    rows = edge_rows(sc)
    n = sc.events_per_edge
    width = sc.geometry.width
    direction = 1 if sc.velocity_px_s > 0 else -1
    cross_idx = np.arange(n_cross, dtype=np.int64)
    lead = (cross_idx * direction) % width
    trail = ((cross_idx - sc.bar_width) * direction) % width

    per_cross = 2 * n
    t = np.repeat(times, per_cross)
    x = np.empty((n_cross, per_cross), dtype=np.int64)
    x[:, :n] = lead[:, None]
    x[:, n:] = trail[:, None]
    x = x.ravel()
    y = np.tile(np.concatenate([rows, rows]), n_cross)
    p = np.tile(np.concatenate([np.ones(n, np.int64), -np.ones(n, np.int64)]), n_cross)

    if sc.noise_rate_hz_per_px > 0 and sc.duration_us > 0:
        rng = np.random.default_rng(sc.seed)
        expected = (sc.noise_rate_hz_per_px * sc.geometry.num_pixels
                    * sc.duration_us / US_PER_S)
        n_noise = int(round(expected))
        if n_noise:
            nt = rng.integers(0, sc.duration_us, size=n_noise)
            nx = rng.integers(0, sc.geometry.width, size=n_noise)
            ny = rng.integers(0, sc.geometry.height, size=n_noise)
            np_pol = rng.choice(np.array([-1, 1], np.int64), size=n_noise)
            t = np.concatenate([t, nt])
            x = np.concatenate([x, nx])
            y = np.concatenate([y, ny])
            p = np.concatenate([p, np_pol])
            order = np.argsort(t, kind="stable")
            t, x, y, p = t[order], x[order], y[order], p[order]

    return EventStream(t, x, y, p, sc.geometry)


@dataclass(frozen=True)
class WindowTruth:
    """Closed-form expectation for one window of a noiseless scenario."""

    box: tuple[int, int, int, int]          # x, y, w, h enclosing all bar events
    pixels: frozenset[tuple[int, int]]      # (x, y) pixels the edges crossed


def moving_bar_truth(sc: MovingBarScenario, cfg: WindowConfig
                     ) -> dict[int, WindowTruth]:
    """Per-window ground truth from the motion model alone.

    Covers the bar's edge events only; enable it with a noiseless scenario
    when exact support equality is required.
    """
    times = crossing_times(sc)
    rows = edge_rows(sc).tolist()
    per_window_cols: dict[int, set[int]] = {}
    for c, tc in enumerate(times.tolist()):
        if tc < cfg.origin_us:
            continue
        k = (tc - cfg.origin_us) // cfg.tau_us
        lead, trail = edge_columns(sc, c)
        per_window_cols.setdefault(k, set()).update((lead, trail))
    truth = {}
    for k, cols in per_window_cols.items():
        pixels = frozenset((cx, ry) for cx in cols for ry in rows)
        x0, x1 = min(cols), max(cols)
        y0, y1 = min(rows), max(rows)
        truth[k] = WindowTruth(box=(x0, y0, x1 - x0 + 1, y1 - y0 + 1), pixels=pixels)
    return truth
