"""Bit-exact serialization: event CSV, the EVT1 binary container,
annotation CSV, YOLO label text, and PGM/PPM/PNG image export.

All multi-byte integers in EVT1 are little-endian. Every read/write pair
round-trips exactly on valid data.
"""
from __future__ import annotations

import struct
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import (
    BadMagicError,
    CountMismatchError,
    DegenerateBoxError,
    IllegalPolarityError,
    OutOfBoundsError,
    ParseError,
    TruncatedFileError,
)
from .events import Event, EventStream, SensorGeometry

EVENTS_CSV_HEADER = "t_us,x,y,p"
ANNOTATIONS_CSV_HEADER = "t_us,x,y,w,h,class_id,track_id,confidence"

EVT1_MAGIC = b"EVT1"
EVT1_HEADER = struct.Struct("<4sHHQ")       # magic, width, height, record count
EVT1_RECORD = struct.Struct("<QHHb3x")      # t_us, x, y, p, zero padding
EVT1_RECORD_SIZE = EVT1_RECORD.size
_EVT1_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"),
                        ("p", "i1"), ("pad", "V3")])
assert _EVT1_DTYPE.itemsize == EVT1_RECORD_SIZE == 16


@contextmanager
def _text_reader(source):
    if hasattr(source, "read"):
        yield source
    else:
        with open(source, "r", encoding="ascii", newline="") as f:
            yield f


@contextmanager
def _text_writer(dest):
    if hasattr(dest, "write"):
        yield dest
    else:
        with open(dest, "w", encoding="ascii", newline="") as f:
            yield f


@contextmanager
def _binary_reader(source):
    if hasattr(source, "read"):
        yield source
    else:
        with open(source, "rb") as f:
            yield f


@contextmanager
def _binary_writer(dest):
    if hasattr(dest, "write"):
        yield dest
    else:
        with open(dest, "wb") as f:
            yield f


# ---------------------------------------------------------------------------
# Event CSV
# ---------------------------------------------------------------------------

def read_events_csv(source, geometry: SensorGeometry, *, time_origin: int = 0,
                    zero_polarity_negative: bool = False) -> EventStream:
    """Parse ``t_us,x,y,p`` lines into a stream.

    Polarity is -1/+1; with ``zero_polarity_negative`` a 0 is accepted and
    mapped to -1 (for dumps that encode negative polarity as 0). Parse
    failures carry the 1-based line number.
    """
    ts: list[int] = []
    xs: list[int] = []
    ys: list[int] = []
    ps: list[int] = []
    with _text_reader(source) as f:
        lines = iter(f)
        try:
            header = next(lines)
        except StopIteration:
            raise ParseError("missing header", line=1) from None
        if header.strip() != EVENTS_CSV_HEADER:
            raise ParseError(f"expected header {EVENTS_CSV_HEADER!r}", line=1)
        for lineno, raw in enumerate(lines, start=2):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ParseError(f"expected 4 fields, got {len(parts)}", line=lineno)
            try:
                t, x, y, p = (int(v) for v in parts)
            except ValueError:
                raise ParseError(f"non-integer field in {line!r}", line=lineno) from None
            if t < 0:
                raise ParseError(f"negative timestamp {t}", line=lineno)
            if p == 0 and zero_polarity_negative:
                p = -1
            if p not in (-1, 1):
                raise IllegalPolarityError(f"line {lineno}: polarity must be -1 or +1, got {p}")
            if not (0 <= x < geometry.width and 0 <= y < geometry.height):
                raise OutOfBoundsError(
                    f"line {lineno}: ({x}, {y}) outside "
                    f"{geometry.width}x{geometry.height} plane")
            ts.append(t)
            xs.append(x)
            ys.append(y)
            ps.append(p)
    return EventStream(ts, xs, ys, ps, geometry, time_origin)


def write_events_csv(stream: EventStream, dest) -> None:
    """Write the canonical CSV form (header plus one ``t,x,y,p`` line per event)."""
    with _text_writer(dest) as f:
        f.write(EVENTS_CSV_HEADER + "\n")
        for t, x, y, p in zip(stream.t.tolist(), stream.x.tolist(),
                              stream.y.tolist(), stream.p.tolist()):
            f.write(f"{t},{x},{y},{p}\n")


# ---------------------------------------------------------------------------
# EVT1 binary container
# ---------------------------------------------------------------------------

def write_events_evt1(stream: EventStream, dest) -> None:
    """Write the EVT1 container: 16-byte header, then 16 bytes per event."""
    g = stream.geometry
    header = EVT1_HEADER.pack(EVT1_MAGIC, g.width, g.height, len(stream))
    records = np.zeros(len(stream), dtype=_EVT1_DTYPE)
    records["t"] = stream.t.astype(np.uint64)
    records["x"] = stream.x
    records["y"] = stream.y
    records["p"] = stream.p
    with _binary_writer(dest) as f:
        f.write(header)
        f.write(records.tobytes())


def _read_evt1_header(f) -> tuple[SensorGeometry, int]:
    header = f.read(EVT1_HEADER.size)
    if len(header) < EVT1_HEADER.size:
        raise TruncatedFileError(
            f"header is {len(header)} bytes, need {EVT1_HEADER.size}")
    magic, width, height, count = EVT1_HEADER.unpack(header)
    if magic != EVT1_MAGIC:
        raise BadMagicError(f"expected {EVT1_MAGIC!r}, got {magic!r}")
    try:
        geometry = SensorGeometry(width, height)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    return geometry, count


def read_evt1_header(source) -> tuple[SensorGeometry, int]:
    """Geometry and declared record count of an EVT1 file."""
    with _binary_reader(source) as f:
        return _read_evt1_header(f)


def _checked_records(raw: np.ndarray, offset: int) -> tuple[np.ndarray, ...]:
    t_u64 = raw["t"]
    if t_u64.size and int(t_u64.max()) > np.iinfo(np.int64).max:
        raise ParseError(f"timestamp beyond supported range near record {offset}")
    p = raw["p"]
    bad = (p != 1) & (p != -1)
    if bad.any():
        i = int(np.argmax(bad))
        raise IllegalPolarityError(
            f"record {offset + i}: polarity must be -1 or +1, got {int(p[i])}")
    return t_u64.astype(np.int64), raw["x"].copy(), raw["y"].copy(), p.copy()


def read_events_evt1(source, *, time_origin: int = 0,
                     chunk_records: int = 1 << 16) -> EventStream:
    """Load a whole EVT1 file, reading in bounded chunks.

    Raises :class:`TruncatedFileError` when the payload ends early and
    :class:`CountMismatchError` when bytes remain past the declared count.
    """
    columns: list[tuple[np.ndarray, ...]] = []
    with _binary_reader(source) as f:
        geometry, count = _read_evt1_header(f)
        done = 0
        while done < count:
            take = min(chunk_records, count - done)
            buf = f.read(take * EVT1_RECORD_SIZE)
            if len(buf) < take * EVT1_RECORD_SIZE:
                raise TruncatedFileError(
                    f"payload ends at record {done + len(buf) // EVT1_RECORD_SIZE}"
                    f" of {count}")
            columns.append(_checked_records(np.frombuffer(buf, _EVT1_DTYPE), done))
            done += take
        if f.read(1):
            raise CountMismatchError(f"data present beyond the declared {count} records")
    g = geometry
    if not columns:
        return EventStream.empty(g, time_origin)
    t = np.concatenate([c[0] for c in columns])
    x = np.concatenate([c[1] for c in columns])
    y = np.concatenate([c[2] for c in columns])
    p = np.concatenate([c[3] for c in columns])
    bad = (x >= g.width) | (y >= g.height)
    if bad.any():
        i = int(np.argmax(bad))
        raise OutOfBoundsError(
            f"record {i}: ({int(x[i])}, {int(y[i])}) outside {g.width}x{g.height} plane")
    return EventStream(t, x, y, p, g, time_origin)


def iter_events_evt1(source) -> Iterator[Event]:
    """Stream one event at a time from an EVT1 file.

    Never holds more than one 16-byte record buffer beyond the header,
    so memory use is constant however large the file is.
    """
    with _binary_reader(source) as f:
        geometry, count = _read_evt1_header(f)
        for i in range(count):
            buf = f.read(EVT1_RECORD_SIZE)
            if len(buf) < EVT1_RECORD_SIZE:
                raise TruncatedFileError(f"payload ends at record {i} of {count}")
            t, x, y, p, = EVT1_RECORD.unpack(buf)
            if p not in (-1, 1):
                raise IllegalPolarityError(
                    f"record {i}: polarity must be -1 or +1, got {p}")
            if not (0 <= x < geometry.width and 0 <= y < geometry.height):
                raise OutOfBoundsError(
                    f"record {i}: ({x}, {y}) outside "
                    f"{geometry.width}x{geometry.height} plane")
            yield Event(t, x, y, p)
        if f.read(1):
            raise CountMismatchError(f"data present beyond the declared {count} records")


# ---------------------------------------------------------------------------
# Annotations and YOLO labels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnnotationRecord:
    """One bounding-box annotation: timestamp, top-left corner, size, class."""

    t: int
    x: int
    y: int
    w: int
    h: int
    class_id: int
    track_id: int
    confidence: float

    def __post_init__(self) -> None:
        if self.w < 1 or self.h < 1:
            raise ValueError(f"box size must be at least 1x1, got {self.w}x{self.h}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


def read_annotations_csv(source) -> list[AnnotationRecord]:
    """Parse ``t_us,x,y,w,h,class_id,track_id,confidence`` rows."""
    records: list[AnnotationRecord] = []
    with _text_reader(source) as f:
        lines = iter(f)
        try:
            header = next(lines)
        except StopIteration:
            raise ParseError("missing header", line=1) from None
        if header.strip() != ANNOTATIONS_CSV_HEADER:
            raise ParseError(f"expected header {ANNOTATIONS_CSV_HEADER!r}", line=1)
        for lineno, raw in enumerate(lines, start=2):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 8:
                raise ParseError(f"expected 8 fields, got {len(parts)}", line=lineno)
            try:
                record = AnnotationRecord(
                    t=int(parts[0]), x=int(parts[1]), y=int(parts[2]),
                    w=int(parts[3]), h=int(parts[4]),
                    class_id=int(parts[5]), track_id=int(parts[6]),
                    confidence=float(parts[7]))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            records.append(record)
    return records


def write_annotations_csv(records: Iterable[AnnotationRecord], dest) -> None:
    with _text_writer(dest) as f:
        f.write(ANNOTATIONS_CSV_HEADER + "\n")
        for r in records:
            f.write(f"{r.t},{r.x},{r.y},{r.w},{r.h},"
                    f"{r.class_id},{r.track_id},{r.confidence!r}\n")


def clip_box_to_plane(box: AnnotationRecord, geometry: SensorGeometry
                      ) -> tuple[int, int, int, int]:
    """Intersect a box with the sensor plane; returns (x0, y0, x1, y1)."""
    x0 = max(box.x, 0)
    y0 = max(box.y, 0)
    x1 = min(box.x + box.w, geometry.width)
    y1 = min(box.y + box.h, geometry.height)
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        raise DegenerateBoxError(
            f"box ({box.x}, {box.y}, {box.w}, {box.h}) has no area on the "
            f"{geometry.width}x{geometry.height} plane")
    return x0, y0, x1, y1


def yolo_label_line(box: AnnotationRecord, geometry: SensorGeometry) -> str:
    """``class cx cy w h`` with center and size normalized by the geometry."""
    x0, y0, x1, y1 = clip_box_to_plane(box, geometry)
    cx = (x0 + x1) / 2.0 / geometry.width
    cy = (y0 + y1) / 2.0 / geometry.height
    bw = (x1 - x0) / geometry.width
    bh = (y1 - y0) / geometry.height
    return f"{box.class_id} {cx:.6f} {cy:.6f} {bw:.6f} {bh:.6f}"


def yolo_label_text(boxes: Iterable[AnnotationRecord], geometry: SensorGeometry) -> str:
    """One YOLO line per box, newline-terminated; empty string for no boxes."""
    return "".join(yolo_label_line(b, geometry) + "\n" for b in boxes)


def write_yolo_labels(boxes: Iterable[AnnotationRecord], geometry: SensorGeometry,
                      dest) -> None:
    with _text_writer(dest) as f:
        f.write(yolo_label_text(boxes, geometry))


# ---------------------------------------------------------------------------
# Image export
# ---------------------------------------------------------------------------

def export_image(planes, path) -> None:
    """Write 8-bit plane(s) to disk, pixel (0, 0) top-left, row-major.

    A single (H, W) plane becomes binary PGM (P5); a (3, H, W) stack
    becomes binary PPM (P6) with the planes interleaved per pixel. A
    ``.png`` suffix selects PNG encoding instead.
    """
    arr = np.ascontiguousarray(planes)
    if arr.dtype != np.uint8:
        raise ValueError(f"image planes must be uint8, got {arr.dtype}")
    if arr.ndim == 2:
        height, width = arr.shape
    elif arr.ndim == 3 and arr.shape[0] == 3:
        _, height, width = arr.shape
    else:
        raise ValueError(f"expected (H, W) or (3, H, W) planes, got shape {arr.shape}")
    if height < 1 or width < 1:
        raise ValueError("cannot write a zero-sized image")
    path = Path(path)
    if path.suffix.lower() == ".png":
        _write_png(arr, path)
        return
    with open(path, "wb") as f:
        if arr.ndim == 2:
            f.write(b"P5\n%d %d\n255\n" % (width, height))
            f.write(arr.tobytes())
        else:
            f.write(b"P6\n%d %d\n255\n" % (width, height))
            f.write(np.transpose(arr, (1, 2, 0)).tobytes())


def _write_png(arr: np.ndarray, path: Path) -> None:
    from PIL import Image

    if arr.ndim == 2:
        Image.fromarray(arr, mode="L").save(path)
    else:
        Image.fromarray(np.transpose(arr, (1, 2, 0)), mode="RGB").save(path)


def _read_pnm(path, magic: bytes) -> tuple[int, int, bytes]:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != magic:
        raise ParseError(f"not a {magic.decode()} file: {path}")
    width, height = (int(v) for v in parts[1].split())
    if parts[2] != b"255":
        raise ParseError(f"unsupported maxval in {path}")
    return width, height, parts[3]


def read_pgm(path) -> np.ndarray:
    """Read back a P5 file written by :func:`export_image`."""
    width, height, payload = _read_pnm(path, b"P5")
    return np.frombuffer(payload, dtype=np.uint8, count=width * height
                         ).reshape(height, width).copy()


def read_ppm(path) -> np.ndarray:
    """Read back a P6 file written by :func:`export_image` as (3, H, W)."""
    width, height, payload = _read_pnm(path, b"P6")
    pixels = np.frombuffer(payload, dtype=np.uint8, count=width * height * 3
                           ).reshape(height, width, 3)
    return np.transpose(pixels, (2, 0, 1)).copy()
