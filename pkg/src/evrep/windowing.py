"""Tumbling-window partitioning and single-pass per-pixel accumulation.

A stream is cut into contiguous half-open windows ``[origin + k*tau,
origin + (k+1)*tau)``. Each window is reduced to a dense per-pixel state
map holding, for every pixel, the most recent event's timestamp and
polarity, the signed polarity sum, and the event count. Work is O(1)
per event and resident memory is one geometry-sized map regardless of
stream length.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .errors import EventOutsideWindowError, OutOfBoundsError, TimeBeforeOriginError
from .events import EventStream, SensorGeometry, validate_stream

DEFAULT_TAU_US = 10_000


@dataclass(frozen=True)
class WindowConfig:
    """Tumbling-window length and phase anchor, both in microseconds."""

    tau_us: int = DEFAULT_TAU_US
    origin_us: int = 0

    def __post_init__(self) -> None:
        if self.tau_us < 1:
            raise ValueError(f"tau must be at least 1 microsecond, got {self.tau_us}")


@dataclass(frozen=True)
class PixelState:
    """Aggregate of one pixel over one window."""

    last_t: Optional[int]
    last_p: Optional[int]
    pol_sum: int
    count: int


class PixelStateMap:
    """Dense per-pixel aggregates for one window.

    ``last_t`` and ``last_p`` describe the latest event per pixel (stream
    order breaks timestamp ties, later wins). Pixels with ``count == 0``
    carry ``last_p == 0`` and a meaningless ``last_t``. All planes are
    read-only ``(height, width)`` arrays; emitted maps are immutable and
    safe to hand across threads.
    """

    __slots__ = ("geometry", "window_start", "window_end",
                 "last_t", "last_p", "pol_sum", "count", "__weakref__")

    def __init__(self, geometry: SensorGeometry, window_start: int, window_end: int,
                 last_t: np.ndarray, last_p: np.ndarray,
                 pol_sum: np.ndarray, count: np.ndarray):
        if window_end <= window_start:
            raise ValueError("window_end must exceed window_start")
        planes = {"last_t": (last_t, np.int64), "last_p": (last_p, np.int8),
                  "pol_sum": (pol_sum, np.int64), "count": (count, np.int64)}
        for name, (arr, dtype) in planes.items():
            arr = np.ascontiguousarray(arr, dtype=dtype)
            if arr.shape != geometry.shape:
                raise ValueError(f"{name} plane shape {arr.shape} != {geometry.shape}")
            arr.setflags(write=False)
            setattr(self, name, arr)
        self.geometry = geometry
        self.window_start = int(window_start)
        self.window_end = int(window_end)

    @classmethod
    def empty(cls, geometry: SensorGeometry, window_start: int, window_end: int
              ) -> "PixelStateMap":
        shape = geometry.shape
        return cls(geometry, window_start, window_end,
                   np.zeros(shape, np.int64), np.zeros(shape, np.int8),
                   np.zeros(shape, np.int64), np.zeros(shape, np.int64))

    @property
    def tau_us(self) -> int:
        return self.window_end - self.window_start

    @property
    def total_count(self) -> int:
        return int(self.count.sum())

    def state_at(self, x: int, y: int) -> PixelState:
        if self.count[y, x] == 0:
            return PixelState(None, None, int(self.pol_sum[y, x]), 0)
        return PixelState(int(self.last_t[y, x]), int(self.last_p[y, x]),
                          int(self.pol_sum[y, x]), int(self.count[y, x]))


def window_index(t: int, cfg: WindowConfig) -> int:
    """Ordinal of the window containing time ``t``; window k covers
    ``[origin + k*tau, origin + (k+1)*tau)``."""
    if t < cfg.origin_us:
        raise TimeBeforeOriginError(
            f"t={t} precedes window origin {cfg.origin_us}")
    return (t - cfg.origin_us) // cfg.tau_us


def window_span(index: int, cfg: WindowConfig) -> tuple[int, int]:
    """Half-open [start, end) microsecond span of window ``index``."""
    start = cfg.origin_us + index * cfg.tau_us
    return start, start + cfg.tau_us


def accumulate(stream: EventStream, cfg: WindowConfig,
               window: int | None = None) -> PixelStateMap:
    """Reduce the events of one window to a :class:`PixelStateMap`.

    Events must be validated, time-sorted, and all inside the window span;
    ``window`` defaults to the ordinal of the first event and is required
    for an empty batch. One pass, O(1) work per event.
    """
    t = stream.t
    if window is None:
        if len(t) == 0:
            raise ValueError("window ordinal required for an empty event batch")
        window = window_index(int(t[0]), cfg)
    start, end = window_span(window, cfg)

    g = stream.geometry
    height, width = g.shape
    n_px = g.num_pixels
    if len(t):
        t_lo, t_hi = int(t.min()), int(t.max())
        if t_lo < start or t_hi >= end:
            outside = (t < start) | (t >= end)
            i = int(np.argmax(outside))
            raise EventOutsideWindowError(
                f"event {i} at t={int(t[i])} outside window {window} span [{start}, {end})")

    x = stream.x.astype(np.int64)
    y = stream.y.astype(np.int64)
    if len(t) and (int(x.max()) >= width or int(y.max()) >= height):
        raise OutOfBoundsError("unvalidated event coordinates exceed the sensor plane")
    flat = y * width + x

    count = np.bincount(flat, minlength=n_px).astype(np.int64)
    pol_sum = np.bincount(flat, weights=stream.p.astype(np.float64),
                          minlength=n_px).astype(np.int64)
    last_t = np.zeros(n_px, np.int64)
    last_p = np.zeros(n_px, np.int8)
    # Duplicate indices resolve to the latest array position, which is the
    # latest event in stream order for a time-sorted batch.
    last_t[flat] = t
    last_p[flat] = stream.p

    shape = g.shape
    return PixelStateMap(g, start, end,
                         last_t.reshape(shape), last_p.reshape(shape),
                         pol_sum.reshape(shape), count.reshape(shape))


def window_map(stream: EventStream, cfg: WindowConfig, index: int) -> PixelStateMap:
    """Accumulate just window ``index`` of a normalized stream."""
    start, end = window_span(index, cfg)
    i0 = int(np.searchsorted(stream.t, start, side="left"))
    i1 = int(np.searchsorted(stream.t, end, side="left"))
    return accumulate(stream[i0:i1], cfg, window=index)


def stream_windows(stream: EventStream, cfg: WindowConfig) -> Iterator[PixelStateMap]:
    """Yield one map per window ordinal from the first to the last event.

    Windows with no events are emitted as empty maps. The stream is
    consumed in a single pass and only the window currently being filled
    is resident; emitted maps belong to the caller.
    """
    validate_stream(stream)
    t = stream.t
    if len(t) == 0:
        return
    if np.any(np.diff(t) < 0):
        raise ValueError("stream must be normalized (non-decreasing timestamps)")
    first = window_index(int(t[0]), cfg)
    last = window_index(int(t[-1]), cfg)
    ends = cfg.origin_us + cfg.tau_us * np.arange(first + 1, last + 2, dtype=np.int64)
    cuts = np.searchsorted(t, ends, side="left")
    pos = 0
    for k, cut in zip(range(first, last + 1), cuts.tolist()):
        yield accumulate(stream[pos:cut], cfg, window=k)
        pos = cut
