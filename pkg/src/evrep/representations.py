"""Per-window representation channels, 8-bit quantization, and fusion.

Three channels are computed from a single window's pixel aggregates:

* event frame: polarity of the most recent event per pixel, ignoring time;
* decaying time surface: polarity weighted by ``exp(-age/tau)`` so the
  contribution of older events fades toward zero;
* event frequency: a sigmoid of the signed per-pixel polarity sum,
  ``255 / (1 + exp(-x/2))``, scaled to the byte range.

All channel math is 64-bit floating point from integer microsecond
inputs; quantization maps signed channels through ``127 + 128*v`` so
that -1, 0, +1 land exactly on bytes 0, 127, 255.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import RangeViolationError
from .events import SensorGeometry
from .windowing import PixelStateMap

REP_FRAME = "frame"
REP_FREQ = "freq"
REP_DECAY = "decay"
REP_FUSION = "fusion"
SINGLE_CHANNEL_KINDS = (REP_FRAME, REP_FREQ, REP_DECAY)
DEFAULT_FUSION_ORDER = (REP_FRAME, REP_FREQ, REP_DECAY)


class ChannelRange(enum.Enum):
    """Declared value range of a channel plane."""

    SIGNED_UNIT = "signed-unit"   # values in [-1, 1]
    BYTE_RANGE = "byte-range"     # values in [0, 255]


_RANGE_BOUNDS = {
    ChannelRange.SIGNED_UNIT: (-1.0, 1.0),
    ChannelRange.BYTE_RANGE: (0.0, 255.0),
}


@dataclass(frozen=True)
class Channel:
    """One real-valued representation plane with its declared range."""

    geometry: SensorGeometry
    values: np.ndarray
    range_tag: ChannelRange

    def __post_init__(self) -> None:
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.shape != self.geometry.shape:
            raise ValueError(f"plane shape {vals.shape} != {self.geometry.shape}")
        if not np.isfinite(vals).all():
            raise ValueError("channel values must be finite")
        lo, hi = _RANGE_BOUNDS[self.range_tag]
        if vals.size and (vals.min() < lo or vals.max() > hi):
            raise ValueError(f"channel values outside {self.range_tag.value} range")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class FusedFrame:
    """Three quantized planes stacked along axis 0 in the recorded order."""

    geometry: SensorGeometry
    planes: np.ndarray
    order: tuple[str, str, str] = DEFAULT_FUSION_ORDER

    def __post_init__(self) -> None:
        planes = np.ascontiguousarray(self.planes, dtype=np.uint8)
        if planes.shape != (3,) + self.geometry.shape:
            raise ValueError(f"fused planes must be (3, H, W), got {planes.shape}")
        if sorted(self.order) != sorted(SINGLE_CHANNEL_KINDS):
            raise ValueError(f"fusion order must permute {SINGLE_CHANNEL_KINDS}")
        planes.setflags(write=False)
        object.__setattr__(self, "planes", planes)


def event_frame(m: PixelStateMap) -> Channel:
    """Last polarity per pixel (+1/-1), 0 where the window saw no events."""
    return Channel(m.geometry, m.last_p.astype(np.float64), ChannelRange.SIGNED_UNIT)


def decaying_time_surface(m: PixelStateMap) -> Channel:
    """Polarity scaled by ``exp((last_t - window_end) / tau)`` per pixel.

    Ages are measured against the window end, so a pixel whose latest
    event is tau old contributes ``exp(-1)`` of its polarity. Pixels with
    no events, or whose recorded time lies beyond the window end, are 0.
    """
    tau = float(m.tau_us)
    vals = np.zeros(m.geometry.shape, dtype=np.float64)
    mask = (m.count > 0) & (m.last_t <= m.window_end)
    if mask.any():
        dt = (m.last_t[mask] - m.window_end).astype(np.float64)
        vals[mask] = m.last_p[mask].astype(np.float64) * np.exp(dt / tau)
    return Channel(m.geometry, vals, ChannelRange.SIGNED_UNIT)


def event_frequency(m: PixelStateMap, *, unsigned_counts: bool = False) -> Channel:
    """Sigmoid of the signed polarity sum, ``255 / (1 + exp(-x/2))``.

    An empty pixel has polarity sum 0 and therefore the midpoint value
    127.5; the sign of the sum pushes the value toward 255 or 0. With
    ``unsigned_counts`` the raw event count replaces the signed sum, so
    any activity pushes the value above the midpoint.
    """
    source = m.count if unsigned_counts else m.pol_sum
    vals = np.full(m.geometry.shape, 127.5, dtype=np.float64)
    mask = m.count > 0
    if mask.any():
        x = source[mask].astype(np.float64)
        with np.errstate(over="ignore"):  # exp overflow saturates to the exact limit 0
            vals[mask] = 255.0 / (1.0 + np.exp(-x / 2.0))
    return Channel(m.geometry, vals, ChannelRange.BYTE_RANGE)


def _plane_values(c, expected: ChannelRange) -> np.ndarray:
    if isinstance(c, Channel):
        if c.range_tag is not expected:
            raise ValueError(f"expected a {expected.value} channel, got {c.range_tag.value}")
        return c.values
    return np.asarray(c, dtype=np.float64)


def _check_range(vals: np.ndarray, lo: float, hi: float) -> None:
    if not np.isfinite(vals).all():
        raise RangeViolationError("values must be finite")
    if vals.size and (vals.min() < lo or vals.max() > hi):
        raise RangeViolationError(f"values outside [{lo}, {hi}]")


def quantize_signed(c) -> np.ndarray:
    """Map a signed-unit plane to bytes via ``round(127 + v*128)``, clamped.

    The anchors are exact: -1 -> 0 (black), 0 -> 127 (gray), +1 -> 255
    (white); the map is monotone in v. Halves round away from zero.
    """
    vals = _plane_values(c, ChannelRange.SIGNED_UNIT)
    _check_range(vals, -1.0, 1.0)
    q = 127.0 + vals * 128.0
    return np.clip(np.floor(q + 0.5), 0.0, 255.0).astype(np.uint8)


def quantize_byte(c) -> np.ndarray:
    """Round a byte-range plane half away from zero and clamp to [0, 255]."""
    vals = _plane_values(c, ChannelRange.BYTE_RANGE)
    _check_range(vals, 0.0, 255.0)
    return np.clip(np.floor(vals + 0.5), 0.0, 255.0).astype(np.uint8)


def render_plane(m: PixelStateMap, kind: str) -> np.ndarray:
    """Quantized single-channel plane of the given kind for one window."""
    if kind == REP_FRAME:
        return quantize_signed(event_frame(m))
    if kind == REP_FREQ:
        return quantize_byte(event_frequency(m))
    if kind == REP_DECAY:
        return quantize_signed(decaying_time_surface(m))
    raise ValueError(f"unknown single-channel representation {kind!r}")


def fuse(m: PixelStateMap, order: tuple[str, str, str] = DEFAULT_FUSION_ORDER) -> FusedFrame:
    """Stack the three quantized channels into one frame.

    The default plane order is event frame, event frequency, decaying
    time surface; an empty window fuses to (127, 128, 127) everywhere.
    """
    planes = np.stack([render_plane(m, kind) for kind in order])
    return FusedFrame(m.geometry, planes, tuple(order))
