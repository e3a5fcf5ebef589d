"""Sensor event domain types and raw-stream validation.

Timestamps are integer microseconds everywhere upstream of the
representations; polarity is strictly -1 or +1 (there is no zero
polarity). Streams are column stores backed by read-only numpy arrays,
so they are cheap to slice and safe to share between threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import IllegalPolarityError, OutOfBoundsError

LEGAL_POLARITIES = (-1, 1)


@dataclass(frozen=True)
class SensorGeometry:
    """Sensor plane size in pixels; bounds every per-pixel state map."""

    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"geometry must be at least 1x1, got {self.width}x{self.height}")

    @property
    def num_pixels(self) -> int:
        return self.width * self.height

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape (height, width) for row-major planes."""
        return (self.height, self.width)


@dataclass(frozen=True)
class Event:
    """One sensor event: timestamp in microseconds, pixel coordinates, polarity."""

    t: int
    x: int
    y: int
    p: int


def _column(values, dtype: np.dtype, lo: int, hi: int, name: str) -> np.ndarray:
    """Cast a column to ``dtype`` after checking it fits, so nothing wraps silently."""
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{name} column must be one-dimensional")
    if arr.size and (arr.min() < lo or arr.max() > hi):
        raise ValueError(f"{name} values must lie in [{lo}, {hi}]")
    out = np.ascontiguousarray(arr, dtype=dtype)
    return out


class EventStream:
    """Column-oriented event store with a declared geometry and time origin.

    Timestamps are expected to be non-decreasing once the stream has been
    normalized; construction does not enforce ordering or bounds (see
    :func:`validate_stream` and :func:`normalize_stream`).
    """

    __slots__ = ("t", "x", "y", "p", "geometry", "time_origin")

    def __init__(self, t, x, y, p, geometry: SensorGeometry, time_origin: int = 0):
        t = _column(t, np.int64, 0, np.iinfo(np.int64).max, "t")
        x = _column(x, np.uint16, 0, np.iinfo(np.uint16).max, "x")
        y = _column(y, np.uint16, 0, np.iinfo(np.uint16).max, "y")
        p = _column(p, np.int8, -128, 127, "p")
        if not (len(t) == len(x) == len(y) == len(p)):
            raise ValueError("event columns differ in length")
        for arr in (t, x, y, p):
            arr.setflags(write=False)
        self.t = t
        self.x = x
        self.y = y
        self.p = p
        self.geometry = geometry
        self.time_origin = int(time_origin)

    @classmethod
    def from_events(cls, events: Iterable[Event], geometry: SensorGeometry,
                    time_origin: int = 0) -> "EventStream":
        evs = list(events)
        return cls(
            [e.t for e in evs],
            [e.x for e in evs],
            [e.y for e in evs],
            [e.p for e in evs],
            geometry,
            time_origin,
        )

    @classmethod
    def empty(cls, geometry: SensorGeometry, time_origin: int = 0) -> "EventStream":
        return cls([], [], [], [], geometry, time_origin)

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[Event]:
        for t, x, y, p in zip(self.t.tolist(), self.x.tolist(), self.y.tolist(), self.p.tolist()):
            yield Event(t, x, y, p)

    def __getitem__(self, key):
        if isinstance(key, slice):
            return EventStream(self.t[key], self.x[key], self.y[key], self.p[key],
                               self.geometry, self.time_origin)
        i = int(key)
        return Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (self.geometry == other.geometry
                and self.time_origin == other.time_origin
                and np.array_equal(self.t, other.t)
                and np.array_equal(self.x, other.x)
                and np.array_equal(self.y, other.y)
                and np.array_equal(self.p, other.p))

    def __repr__(self) -> str:
        g = self.geometry
        return f"EventStream({len(self)} events, {g.width}x{g.height}, origin={self.time_origin})"

    def events(self) -> list[Event]:
        return list(self)


def validate_event(e: Event, g: SensorGeometry) -> Event:
    """Return ``e`` unchanged if it is legal for geometry ``g``, else raise.

    Every event is either accepted or mapped to exactly one error:
    a polarity outside {-1, +1} raises :class:`IllegalPolarityError`,
    coordinates off the plane raise :class:`OutOfBoundsError`.
    """
    if e.p not in LEGAL_POLARITIES:
        raise IllegalPolarityError(f"polarity must be -1 or +1, got {e.p}")
    if not (0 <= e.x < g.width and 0 <= e.y < g.height):
        raise OutOfBoundsError(
            f"event at ({e.x}, {e.y}) outside {g.width}x{g.height} plane")
    return e


def validate_stream(s: EventStream) -> EventStream:
    """Vectorized whole-stream validation; reports the first offending event."""
    bad_p = (s.p != 1) & (s.p != -1)
    if bad_p.any():
        i = int(np.argmax(bad_p))
        raise IllegalPolarityError(f"event {i}: polarity must be -1 or +1, got {int(s.p[i])}")
    g = s.geometry
    bad_xy = (s.x >= g.width) | (s.y >= g.height)
    if bad_xy.any():
        i = int(np.argmax(bad_xy))
        raise OutOfBoundsError(
            f"event {i}: ({int(s.x[i])}, {int(s.y[i])}) outside {g.width}x{g.height} plane")
    return s


def normalize_stream(s: EventStream) -> tuple[EventStream, int]:
    """Stable-sort a stream by timestamp.

    Returns the sorted stream and the number of reordered events, counted
    as events whose timestamp is below the running maximum of their
    predecessors. Events with equal timestamps keep their original relative
    order, so normalization is idempotent and a pure permutation.
    """
    if len(s) == 0:
        return s, 0
    running_max = np.maximum.accumulate(s.t)
    reordered = int(np.count_nonzero(s.t < running_max))
    if reordered == 0:
        return s, 0
    order = np.argsort(s.t, kind="stable")
    sorted_stream = EventStream(s.t[order], s.x[order], s.y[order], s.p[order],
                                s.geometry, s.time_origin)
    return sorted_stream, reordered
